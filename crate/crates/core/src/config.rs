//! Accuracy parameters, constant profiles and work budgets.

use crate::error::{Error, Result};

/// Default cap on membership tests and similar units of exact work.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Which constants drive sketch sizes and trial counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// Scaled constants tuned for desk-scale instances.
    Practical,
    /// The asymptotic formulas evaluated verbatim.
    Theory,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Practical => "practical",
            Profile::Theory => "theory",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "practical" => Ok(Profile::Practical),
            "theory" => Ok(Profile::Theory),
            _ => Err(Error::invalid(format!("unknown profile `{s}`"))),
        }
    }
}

/// Parameters shared by every randomized estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub profile: Profile,
    /// Sketch size scale.
    pub c_sketch: f64,
    /// Overlap-trial scale.
    pub c_trials: f64,
    /// Rejection-rate trial scale.
    pub c_rho: f64,
    /// Cap on exact work (oracle membership tests, verbatim trial counts).
    pub budget: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            epsilon: 0.2,
            delta: 0.1,
            seed: 0,
            profile: Profile::Practical,
            c_sketch: 64.0,
            c_trials: 16.0,
            c_rho: 16.0,
            budget: budget_from_env(),
        }
    }
}

impl Config {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        Config {
            epsilon,
            delta,
            seed,
            ..Config::default()
        }
    }

    pub fn theory(epsilon: f64, delta: f64, seed: u64) -> Self {
        Config {
            profile: Profile::Theory,
            ..Config::new(epsilon, delta, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::invalid("epsilon must lie in (0, 1/2)"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid("delta must lie in (0, 1/2)"));
        }
        if self.profile == Profile::Practical
            && !(self.c_sketch >= 1.0 && self.c_trials >= 1.0 && self.c_rho >= 1.0)
        {
            return Err(Error::invalid("practical-profile constants must be at least 1"));
        }
        Ok(())
    }
}

/// Reads `TARU_BUDGET`, falling back to [`DEFAULT_BUDGET`].
pub fn budget_from_env() -> u64 {
    std::env::var("TARU_BUDGET")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

/// Converts a real-valued count to an integer, failing when it exceeds `budget`.
pub fn checked_count(value: f64, budget: u64, what: &str) -> Result<usize> {
    if !value.is_finite() || value > budget as f64 {
        return Err(Error::Budget(format!("{what} = {value:.3e} exceeds the budget {budget}")));
    }
    Ok(value.ceil().max(1.0) as usize)
}
