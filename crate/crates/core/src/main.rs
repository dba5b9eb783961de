//! Command-line front end. Results go to stdout as one JSON object; a short
//! human summary goes to stderr.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use taru::apps::{dnnf, ecsp, nwa};
use taru::automaton::TreeAutomaton;
use taru::cq::{self, Database, Decomposition, Query};
use taru::fpras::{fpras_bta, fpras_ta, EngineStats, Estimate};
use taru::nfa::{self, brute::brute_nfa_count, parse_explicit_nfa};
use taru::oracles::{brute_slice, state_set_count};
use taru::partial::PartialTree;
use taru::partition::{brute_completions, build_partition_nfa, ExactTreeOracle};
use taru::sampler::{fpaus, sample_language};
use taru::{Config, Draw, Error, Profile};

const MAX_N: u64 = 10_000;

#[derive(Parser)]
#[command(name = "taru", version, about = "Approximate counting and uniform sampling for tree automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fpras,
    ExactDp,
    Brute,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Fpras => "fpras",
            Mode::ExactDp => "exact-dp",
            Mode::Brute => "brute",
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "practical")]
    profile: String,
    #[arg(long, value_enum, default_value = "fpras")]
    mode: Mode,
    /// Upper bound on worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

fn size_arg() -> clap::builder::RangedU64ValueParser<u64> {
    clap::value_parser!(u64).range(0..=MAX_N)
}

#[derive(Subcommand)]
enum Command {
    /// Count the trees of size n accepted by an automaton.
    Count {
        #[arg(long)]
        automaton: PathBuf,
        #[arg(long, value_parser = size_arg())]
        n: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Draw trees of size n uniformly.
    Sample {
        #[arg(long)]
        automaton: PathBuf,
        #[arg(long, value_parser = size_arg())]
        n: u64,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Count words of length n accepted by an explicit-label NFA.
    NfaCount {
        #[arg(long)]
        nfa: PathBuf,
        #[arg(long, value_parser = size_arg())]
        n: u64,
        /// Also draw this many words.
        #[arg(long, default_value_t = 0)]
        count: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Count the answers of a conjunctive query.
    CqCount {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        database: PathBuf,
        #[arg(long)]
        decomposition: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw answers of a conjunctive query uniformly.
    CqSample {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        database: PathBuf,
        #[arg(long)]
        decomposition: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Count the answers of a union of conjunctive queries.
    UcqCount {
        /// One file per disjunct.
        #[arg(long, required = true)]
        query: Vec<PathBuf>,
        #[arg(long)]
        database: PathBuf,
        /// One per disjunct, in the same order, when given.
        #[arg(long)]
        decomposition: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Count the output assignments of a constraint problem.
    EcspCount {
        #[arg(long)]
        ecsp: PathBuf,
        #[arg(long)]
        decomposition: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Count the models of a structured DNNF circuit.
    DnnfCount {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        vtree: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Count well-matched nested words of length n accepted by an NWA.
    NwaCount {
        #[arg(long)]
        nwa: PathBuf,
        #[arg(long, value_parser = size_arg())]
        n: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Count the completions of a partial tree, such as `a(#1,#5)`.
    PartitionCount {
        #[arg(long)]
        automaton: PathBuf,
        #[arg(long)]
        partial: String,
        /// Defaults to the initial state.
        #[arg(long)]
        state: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact slice enumeration and cross-checked counts.
    Oracle {
        #[arg(long)]
        automaton: PathBuf,
        #[arg(long, value_parser = size_arg())]
        n: u64,
        /// Print the trees as well.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// What a subcommand produces before the certificate is attached.
struct Outcome {
    fields: Map<String, Value>,
    summary: String,
    warnings: Vec<String>,
}

impl Outcome {
    fn new(summary: String) -> Self {
        Outcome { fields: Map::new(), summary, warnings: Vec::new() }
    }

    fn set(&mut self, key: &str, v: Value) -> &mut Self {
        self.fields.insert(key.to_string(), v);
        self
    }

    fn stats(&mut self, s: &EngineStats) {
        if s.clamps > 0 {
            self.warnings.push(format!("{} acceptance probabilities clamped to 1", s.clamps));
        }
        if s.nfa.clamps > 0 {
            self.warnings.push(format!("{} word-sampler acceptance probabilities clamped to 1", s.nfa.clamps));
        }
        if s.nfa.cap_hits > 0 {
            self.warnings.push(format!("{} overlap trials hit their cap", s.nfa.cap_hits));
        }
        self.set("stats", s.to_json());
    }
}

/// An estimate printed as an integer when it is one.
fn number(x: f64) -> Value {
    if x.fract() == 0.0 && (0.0..9.0e15).contains(&x) {
        json!(x as u64)
    } else {
        json!(x)
    }
}

fn big(x: &BigUint) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

struct Inputs {
    digests: Map<String, Value>,
}

impl Inputs {
    fn read(&mut self, key: &str, path: &Path) -> anyhow::Result<String> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let digest: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let entry = self.digests.entry(key.to_string()).or_insert(Value::Null);
        match entry {
            Value::Null => *entry = json!(digest),
            Value::Array(a) => a.push(json!(digest)),
            other => *other = json!([other.clone(), digest]),
        }
        Ok(text)
    }

    fn json(&mut self, key: &str, path: &Path) -> anyhow::Result<Value> {
        let text = self.read(key, path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(e.line(), e.column(), format!("{}: {e}", path.display())).into())
    }

    fn decomposition(&mut self, path: &Path, q: &Query) -> anyhow::Result<Decomposition> {
        Ok(Decomposition::from_json(&self.json("decomposition", path)?, q)?)
    }

    fn automaton(&mut self, path: &Path) -> anyhow::Result<TreeAutomaton> {
        Ok(TreeAutomaton::from_json(&self.json("automaton", path)?)?)
    }
}

fn config(c: &Common) -> anyhow::Result<Config> {
    let profile: Profile = c.profile.parse()?;
    let cfg = Config { profile, ..Config::new(c.epsilon, c.delta, c.seed) };
    cfg.validate()?;
    Ok(cfg)
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Count { common, .. }
        | Command::Sample { common, .. }
        | Command::NfaCount { common, .. }
        | Command::CqCount { common, .. }
        | Command::CqSample { common, .. }
        | Command::UcqCount { common, .. }
        | Command::EcspCount { common, .. }
        | Command::DnnfCount { common, .. }
        | Command::NwaCount { common, .. }
        | Command::PartitionCount { common, .. }
        | Command::Oracle { common, .. } => common,
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Count { .. } => "count",
        Command::Sample { .. } => "sample",
        Command::NfaCount { .. } => "nfa-count",
        Command::CqCount { .. } => "cq-count",
        Command::CqSample { .. } => "cq-sample",
        Command::UcqCount { .. } => "ucq-count",
        Command::EcspCount { .. } => "ecsp-count",
        Command::DnnfCount { .. } => "dnnf-count",
        Command::NwaCount { .. } => "nwa-count",
        Command::PartitionCount { .. } => "partition-count",
        Command::Oracle { .. } => "oracle",
    }
}

/// Counts `L_n(T)` in the requested mode.
fn count_automaton(a: &TreeAutomaton, n: usize, mode: Mode, cfg: &Config, out: &mut Outcome) -> anyhow::Result<()> {
    match mode {
        Mode::Brute => {
            let c = brute_slice(a, n, cfg.budget)?.len();
            out.set("count", json!(c));
            out.summary = format!("{c} (brute force)");
        }
        Mode::ExactDp => {
            let c = state_set_count(a, n, cfg.budget)?;
            out.summary = format!("{c} (exact)");
            out.set("count", big(&c));
        }
        Mode::Fpras => {
            let e: Estimate = if n == 0 {
                return Err(Error::invalid("n must be at least 1").into());
            } else if a.is_binary() {
                fpras_bta(a, n, cfg)?
            } else {
                fpras_ta(a, n, cfg)?
            };
            out.set("estimate", number(e.value));
            out.stats(&e.stats);
            out.summary = format!("≈ {:.4}", e.value);
        }
    }
    Ok(())
}

fn query_k(k: Option<usize>, hd: Option<&Decomposition>) -> usize {
    k.unwrap_or_else(|| hd.map_or(1, Decomposition::width).max(1))
}

fn run(cmd: &Command, inputs: &mut Inputs) -> anyhow::Result<Outcome> {
    let cfg = config(common(cmd))?;
    let mode = common(cmd).mode;
    let mut out = Outcome::new(String::new());
    match cmd {
        Command::Count { automaton, n, .. } => {
            let a = inputs.automaton(automaton)?;
            count_automaton(&a, *n as usize, mode, &cfg, &mut out)?;
            out.set("n", json!(n));
        }
        Command::Sample { automaton, n, count, .. } => {
            let a = inputs.automaton(automaton)?;
            let s = sample_language(&a, *n as usize, &cfg)?;
            let mut samples = Vec::new();
            let mut bottoms = 0;
            for i in 0..*count {
                match fpaus(&s, cfg.delta, i)? {
                    Some(t) => samples.push(json!(t.to_text(&a.alphabet))),
                    None => {
                        bottoms += 1;
                        samples.push(Value::Null);
                    }
                }
            }
            out.set("samples", json!(samples)).set("bottom", json!(bottoms)).set("estimate", number(s.preprocessing.value));
            out.stats(&s.stats());
            out.summary = format!("{} samples, {bottoms} ⊥", count);
            out.set("n", json!(n));
        }
        Command::NfaCount { nfa: path, n, count, .. } => {
            let (machine, oracle) = parse_explicit_nfa(&inputs.json("nfa", path)?)?;
            let k = *n as usize;
            match mode {
                Mode::Brute | Mode::ExactDp => {
                    let c = brute_nfa_count(&machine, k, &oracle, cfg.budget)?;
                    out.summary = format!("{c} (exact)");
                    out.set("count", big(&c));
                }
                Mode::Fpras => {
                    let c = nfa::count_succinct_nfa(&machine, k, &oracle, &cfg)?;
                    out.set("estimate", number(c.estimate)).set("nfa_size", json!(c.size));
                    out.summary = format!("≈ {:.4}", c.estimate);
                    out.stats(&EngineStats { nfa: c.stats, ..Default::default() });
                }
            }
            if *count > 0 {
                let (draws, _) = nfa::sample_words(&machine, k, &oracle, &cfg, *count as usize)?;
                let words: Vec<Value> = draws
                    .into_iter()
                    .map(|d| match d {
                        Draw::Sample(w) => json!(oracle.word_text(&w)),
                        _ => Value::Null,
                    })
                    .collect();
                out.set("samples", json!(words));
            }
            out.set("n", json!(n));
        }
        Command::CqCount { query, database, decomposition, k, .. } => {
            let q = Query::parse(&inputs.read("query", query)?)?;
            let db = Database::parse(&inputs.read("database", database)?)?;
            let hd = decomposition.as_ref().map(|p| inputs.decomposition(p, &q)).transpose()?;
            let k = query_k(*k, hd.as_ref());
            match mode {
                Mode::Brute => {
                    let s = cq::brute_cq_count(&q, &db, cfg.budget)?;
                    out.set("count", json!(s.count()));
                    out.summary = format!("{} answers (brute force)", s.count());
                }
                Mode::ExactDp => {
                    let r = cq::count::prepare(&q, &db, hd.as_ref(), k, cfg.budget)?;
                    let c = state_set_count(&r.automaton, r.n, cfg.budget)?;
                    out.summary = format!("{c} answers (exact)");
                    out.set("count", big(&c)).set("width", json!(r.width));
                }
                Mode::Fpras => {
                    let c = cq::count_cq(&q, &db, hd.as_ref(), k, &cfg)?;
                    out.set("estimate", number(c.estimate.value))
                        .set("width", json!(c.width))
                        .set("tree_size", json!(c.n))
                        .set("states", json!(c.states));
                    out.stats(&c.estimate.stats);
                    out.summary = format!("≈ {:.4} answers", c.estimate.value);
                }
            }
        }
        Command::CqSample { query, database, decomposition, k, count, .. } => {
            let q = Query::parse(&inputs.read("query", query)?)?;
            let db = Database::parse(&inputs.read("database", database)?)?;
            let hd = decomposition.as_ref().map(|p| inputs.decomposition(p, &q)).transpose()?;
            let s = cq::sample_cq(&q, &db, hd.as_ref(), query_k(*k, hd.as_ref()), &cfg)?;
            let mut answers = Vec::new();
            let mut bottoms = 0;
            for i in 0..*count {
                match s.fpaus(cfg.delta, i)? {
                    Some(a) => answers.push(json!(a)),
                    None => {
                        bottoms += 1;
                        answers.push(Value::Null);
                    }
                }
            }
            out.set("samples", json!(answers)).set("bottom", json!(bottoms)).set("estimate", number(s.estimate()));
            out.stats(&s.sampler.stats());
            out.summary = format!("{count} answers drawn, {bottoms} ⊥");
        }
        Command::UcqCount { query, database, decomposition, k, .. } => {
            if !decomposition.is_empty() && decomposition.len() != query.len() {
                return Err(Error::invalid("give one decomposition per query or none").into());
            }
            let db = Database::parse(&inputs.read("database", database)?)?;
            let mut qs = Vec::new();
            for (i, p) in query.iter().enumerate() {
                let q = Query::parse(&inputs.read("query", p)?)?;
                let hd = decomposition.get(i).map(|d| inputs.decomposition(d, &q)).transpose()?;
                qs.push((q, hd));
            }
            let k = k.unwrap_or_else(|| qs.iter().map(|(_, h)| query_k(None, h.as_ref())).max().unwrap_or(1));
            match mode {
                Mode::Brute | Mode::ExactDp => {
                    let mut all = BTreeSet::new();
                    for (q, _) in &qs {
                        all.extend(cq::brute_cq_count(q, &db, cfg.budget)?.answers);
                    }
                    out.set("count", json!(all.len()));
                    out.summary = format!("{} answers (brute force)", all.len());
                }
                Mode::Fpras => {
                    let u = cq::count_ucq(&qs, &db, k, &cfg)?;
                    out.set("estimate", number(u.value))
                        .set("per_query", json!(u.per_query.iter().map(|&x| number(x)).collect::<Vec<_>>()))
                        .set("trials", json!(u.trials))
                        .set("hits", json!(u.hits))
                        .set("method", json!(u.certificate.method));
                    out.summary = format!("≈ {:.4} answers in the union", u.value);
                }
            }
        }
        Command::EcspCount { ecsp: path, decomposition, k, .. } => {
            let e = ecsp::Ecsp::from_json(&inputs.json("ecsp", path)?)?;
            match mode {
                Mode::Brute => {
                    let c = ecsp::brute_ecsp_count(&e, cfg.budget)?;
                    out.set("count", json!(c));
                    out.summary = format!("{c} output assignments (brute force)");
                }
                _ => {
                    let (q, db) = ecsp::ecsp_to_cq(&e)?;
                    let hd = decomposition.as_ref().map(|p| inputs.decomposition(p, &q)).transpose()?;
                    let k = query_k(*k, hd.as_ref());
                    if mode == Mode::ExactDp {
                        let hd = hd.map(|h| ecsp::extend_decomposition(&e, &q, &h));
                        let r = cq::count::prepare(&q, &db, hd.as_ref(), k, cfg.budget)?;
                        let c = state_set_count(&r.automaton, r.n, cfg.budget)?;
                        out.summary = format!("{c} output assignments (exact)");
                        out.set("count", big(&c));
                    } else {
                        let c = ecsp::count_ecsp(&e, hd.as_ref(), k, &cfg)?;
                        out.set("estimate", number(c.estimate.value)).set("width", json!(c.width));
                        out.stats(&c.estimate.stats);
                        out.summary = format!("≈ {:.4} output assignments", c.estimate.value);
                    }
                }
            }
        }
        Command::DnnfCount { circuit, vtree, .. } => {
            let t = dnnf::VTree::from_json(&inputs.json("vtree", vtree)?)?;
            let c = dnnf::Circuit::from_json(&inputs.json("circuit", circuit)?, &t)?;
            match mode {
                Mode::Brute => {
                    let m = dnnf::brute_dnnf_count(&c, &t, cfg.budget)?;
                    out.set("count", json!(m));
                    out.summary = format!("{m} models (truth table)");
                }
                _ => {
                    let d = dnnf::dnnf_to_ta(&c, &t)?;
                    count_automaton(&d.automaton, d.n, mode, &cfg, &mut out)?;
                    out.summary = format!("{} models", out.summary);
                }
            }
            out.set("variables", json!(t.vars.len()));
        }
        Command::NwaCount { nwa: path, n, .. } => {
            let a = nwa::Nwa::from_json(&inputs.json("nwa", path)?)?;
            let n = *n as usize;
            match mode {
                Mode::Brute => {
                    let c = nwa::brute_nwa_count(&a, n, cfg.budget)?;
                    out.set("count", json!(c));
                    out.summary = format!("{c} nested words (brute force)");
                }
                _ => {
                    let t = nwa::nwa_to_ta(&a, n)?;
                    count_automaton(&t.automaton, t.tree_size, mode, &cfg, &mut out)?;
                    out.summary = format!("{} nested words", out.summary);
                }
            }
            out.set("n", json!(n));
        }
        Command::PartitionCount { automaton, partial, state, .. } => {
            let a = inputs.automaton(automaton)?;
            let t = PartialTree::parse(partial, &a.alphabet)?;
            let s = match state {
                Some(name) => a.state_index(name).ok_or_else(|| Error::invalid(format!("unknown state `{name}`")))?,
                None => a.initial,
            };
            match mode {
                Mode::Brute => {
                    let c = brute_completions(&a, &t, s, cfg.budget)?;
                    out.summary = format!("{c} completions (brute force)");
                    out.set("count", big(&c));
                }
                _ => {
                    let p = build_partition_nfa(&a, &t, s, t.full_size())?;
                    let o = ExactTreeOracle::for_partial(&a, &t, cfg.budget)?;
                    if mode == Mode::ExactDp {
                        let c = brute_nfa_count(&p.nfa, p.word_length(), &o, cfg.budget)?;
                        out.summary = format!("{c} completions (exact)");
                        out.set("count", big(&c));
                    } else {
                        let c = nfa::count_succinct_nfa(&p.nfa, p.word_length(), &o, &cfg)?;
                        out.set("estimate", number(c.estimate)).set("nfa_size", json!(c.size));
                        out.stats(&EngineStats { nfa: c.stats, ..Default::default() });
                        out.summary = format!("≈ {:.4} completions", c.estimate);
                    }
                    out.set("main_path", json!(p.path.len()));
                }
            }
            out.set("size", json!(t.full_size()));
        }
        Command::Oracle { automaton, n, list, .. } => {
            let a = inputs.automaton(automaton)?;
            let n = *n as usize;
            let slice = brute_slice(&a, n, cfg.budget)?;
            let dp = state_set_count(&a, n, cfg.budget)?;
            let agree = BigUint::from(slice.len()) == dp;
            out.set("count", json!(slice.len())).set("state_set_count", big(&dp)).set("agree", json!(agree)).set("n", json!(n));
            if *list {
                out.set("trees", json!(slice.trees.iter().map(|t| t.to_text(&a.alphabet)).collect::<Vec<_>>()));
            }
            if !agree {
                out.warnings.push("exact oracles disagree".into());
            }
            out.summary = format!("{} trees of size {n}", slice.len());
        }
    }
    Ok(out)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<Error>() {
        return match err {
            Error::Fail(_) | Error::Budget(_) => 3,
            _ => 2,
        };
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let cmd = &cli.command;
    let c = common(cmd);
    let started = Instant::now();
    let mut inputs = Inputs { digests: Map::new() };
    let outcome = run(cmd, &mut inputs);
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(mut out) => {
            let mut certificate = json!({
                "tool": "taru",
                "version": env!("CARGO_PKG_VERSION"),
                "command": name(cmd),
                "mode": c.mode.name(),
                "profile": c.profile,
                "epsilon": c.epsilon,
                "delta": c.delta,
                "seed": c.seed,
                "jobs": c.jobs,
                "inputs": inputs.digests,
                "warnings": out.warnings,
            });
            if matches!(name(cmd), "sample" | "cq-sample") {
                certificate["caveat"] = json!(
                    "draws are uniform conditioned on accurate preprocessing estimates; that event is not checked at run time"
                );
            }
            out.set("certificate", certificate);
            out.set("elapsed_ms", json!((elapsed_ms * 1000.0).round() / 1000.0));
            println!("{}", Value::Object(out.fields));
            eprintln!("{}: {} [{:.1} ms]", name(cmd), out.summary, elapsed_ms);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
