//! Approximate counting and sampling of query answers, and union counting.

use super::decomp::{gyo_join_tree, Decomposition};
use super::reduce::{reduce_cq_to_ta, Reduction};
use super::{is_answer, Answer, Database, Query};
use crate::config::{checked_count, Config};
use crate::error::{Error, Result};
use crate::fpras::{fpras_ta, Certificate, Estimate};
use crate::nfa::Draw;
use crate::rng::{weighted_index, Seed};
use crate::sampler::{fpaus, sample_language, TreeSampler};
use rand::RngCore;
use std::collections::HashMap;

/// Reduction with a supplied decomposition, or a GYO join tree when none
/// is given.
pub fn prepare(q: &Query, db: &Database, hd: Option<&Decomposition>, k: usize, budget: u64) -> Result<Reduction> {
    let owned;
    let hd = match hd {
        Some(h) => h,
        None => {
            owned = gyo_join_tree(q)?;
            &owned
        }
    };
    reduce_cq_to_ta(q, db, hd, k, budget)
}

/// An estimate of `|Q(D)|` with the reduction that produced it.
#[derive(Clone, Debug)]
pub struct CqCount {
    pub estimate: Estimate,
    pub n: usize,
    pub width: usize,
    pub states: usize,
    pub automaton_size: usize,
}

pub fn count_cq(q: &Query, db: &Database, hd: Option<&Decomposition>, k: usize, cfg: &Config) -> Result<CqCount> {
    let r = prepare(q, db, hd, k, cfg.budget)?;
    let estimate = fpras_ta(&r.automaton, r.n, cfg)?;
    Ok(CqCount {
        estimate,
        n: r.n,
        width: r.width,
        states: r.automaton.num_states(),
        automaton_size: r.automaton.size(),
    })
}

/// Answer sampler: a tree sampler on the reduction automaton whose draws
/// are decoded.
pub struct CqSampler {
    pub reduction: Reduction,
    pub sampler: TreeSampler,
}

pub fn sample_cq(q: &Query, db: &Database, hd: Option<&Decomposition>, k: usize, cfg: &Config) -> Result<CqSampler> {
    let reduction = prepare(q, db, hd, k, cfg.budget)?;
    let sampler = sample_language(&reduction.automaton, reduction.n, cfg)?;
    Ok(CqSampler { reduction, sampler })
}

impl CqSampler {
    pub fn draw(&self, index: u64) -> Result<Draw<Answer>> {
        Ok(match self.sampler.draw(index)? {
            Draw::Sample(t) => Draw::Sample(self.reduction.decode_answer(&t)?),
            Draw::Fail => Draw::Fail,
            Draw::Empty => Draw::Empty,
        })
    }

    /// An answer or `None` (⊥).
    pub fn fpaus(&self, delta: f64, index: u64) -> Result<Option<Answer>> {
        fpaus(&self.sampler, delta, index)?
            .map(|t| self.reduction.decode_answer(&t))
            .transpose()
    }

    /// Preprocessing estimate of `|Q(D)|`.
    pub fn estimate(&self) -> f64 {
        self.sampler.preprocessing.value
    }
}

/// Estimate of `|Q_1(D) ∪ … ∪ Q_m(D)|`.
#[derive(Clone, Debug)]
pub struct UcqCount {
    pub value: f64,
    pub per_query: Vec<f64>,
    pub trials: u64,
    pub hits: u64,
    pub certificate: Certificate,
}

/// Consecutive FAIL draws tolerated before a union trial gives up.
const MAX_DRAW_FAILS: u64 = 64;

/// Karp–Luby union estimate. Each disjunct gets an estimate and a sampler
/// at accuracy `ε/3`; each trial picks a disjunct in proportion to its
/// estimate, draws an answer from it and counts a hit when no earlier
/// disjunct contains the answer (exact membership).
pub fn count_ucq(queries: &[(Query, Option<Decomposition>)], db: &Database, k: usize, cfg: &Config) -> Result<UcqCount> {
    cfg.validate()?;
    let Some((first, _)) = queries.first() else {
        return Err(Error::invalid("a union needs at least one query"));
    };
    if let Some((q, _)) = queries.iter().find(|(q, _)| q.head.len() != first.head.len()) {
        return Err(Error::invalid(format!(
            "head arity {} of `{}` differs from {} of `{}`",
            q.head.len(),
            q.name,
            first.head.len(),
            first.name
        )));
    }
    let m = queries.len();
    if m == 1 {
        let c = count_cq(first, db, queries[0].1.as_ref(), k, cfg)?;
        return Ok(UcqCount {
            value: c.estimate.value,
            per_query: vec![c.estimate.value],
            trials: 0,
            hits: 0,
            certificate: Certificate { method: "fpras", ..c.estimate.certificate },
        });
    }
    let root = Seed::from_u64(cfg.seed);
    let eps = cfg.epsilon / 3.0;
    let mut samplers = Vec::with_capacity(m);
    for (i, (q, hd)) in queries.iter().enumerate() {
        let sub = Config {
            epsilon: eps,
            delta: cfg.delta / (2.0 * m as f64),
            seed: root.derive("disjunct", &[i as u64]).rng().next_u64(),
            ..cfg.clone()
        };
        samplers.push(sample_cq(q, db, hd.as_ref(), k, &sub)?);
    }
    let per_query: Vec<f64> = samplers.iter().map(CqSampler::estimate).collect();
    let total: f64 = per_query.iter().sum();
    let certificate = Certificate {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        seed: cfg.seed,
        profile: cfg.profile,
        method: "karp-luby",
    };
    if total == 0.0 {
        return Ok(UcqCount { value: 0.0, per_query, trials: 0, hits: 0, certificate });
    }
    let trials = checked_count(3.0 * m as f64 * (4.0 / cfg.delta).ln() / (eps * eps), cfg.budget, "union trials")? as u64;
    let mut rng = root.derive("karp-luby", &[]).rng();
    let mut next_draw = vec![0u64; m];
    let mut member: HashMap<(usize, Answer), bool> = HashMap::new();
    let mut hits = 0u64;
    for _ in 0..trials {
        let i = weighted_index(&mut rng, &per_query).expect("positive total");
        let mut fails = 0;
        let answer = loop {
            let idx = next_draw[i];
            next_draw[i] += 1;
            match samplers[i].draw(idx)? {
                Draw::Sample(a) => break a,
                Draw::Empty => return Err(Error::Fail(format!("disjunct {i} reported an empty slice after a positive estimate"))),
                Draw::Fail => {
                    fails += 1;
                    if fails >= MAX_DRAW_FAILS {
                        return Err(Error::Fail(format!("{MAX_DRAW_FAILS} consecutive FAIL draws from disjunct {i}")));
                    }
                }
            }
        };
        let mut first_owner = true;
        for (j, (qj, _)) in queries.iter().enumerate().take(i) {
            let key = (j, answer.clone());
            let inside = match member.get(&key) {
                Some(&b) => b,
                None => {
                    let b = is_answer(qj, db, &answer, cfg.budget)?;
                    member.insert(key, b);
                    b
                }
            };
            if inside {
                first_owner = false;
                break;
            }
        }
        if first_owner {
            hits += 1;
        }
    }
    Ok(UcqCount { value: total * hits as f64 / trials as f64, per_query, trials, hits, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::fixtures;

    #[test]
    fn running_example_count_and_samples() {
        let (q, db) = (fixtures::q1(), fixtures::d1());
        let c = count_cq(&q, &db, None, 1, &Config::new(0.2, 0.1, 1)).unwrap();
        assert!((c.estimate.value - 1.0).abs() <= 0.2, "{}", c.estimate.value);
        let s = sample_cq(&q, &db, None, 1, &Config::new(0.2, 0.1, 2)).unwrap();
        for i in 0..20 {
            if let Draw::Sample(a) = s.draw(i).unwrap() {
                assert_eq!(a, vec!["b".to_string()]);
            }
        }
    }

    #[test]
    fn union_of_disjoint_and_duplicate_disjuncts() {
        let db = Database::parse("A(a). A(b). B(c). B(d). B(e).").unwrap();
        let qa = Query::parse("Q(x) :- A(x).").unwrap();
        let qb = Query::parse("Q(x) :- B(x).").unwrap();
        let cfg = Config::new(0.2, 0.1, 4);
        let u = count_ucq(&[(qa.clone(), None), (qb, None)], &db, 1, &cfg).unwrap();
        assert!((u.value - 5.0).abs() <= 1.0, "{}", u.value);
        let d = count_ucq(&[(qa.clone(), None), (qa.clone(), None)], &db, 1, &cfg).unwrap();
        assert!((d.value - 2.0).abs() <= 0.4, "{}", d.value);
        let bad = Query::parse("Q(x,y) :- B(x), A(y).").unwrap();
        assert!(count_ucq(&[(qa, None), (bad, None)], &db, 1, &cfg).is_err());
    }
}
