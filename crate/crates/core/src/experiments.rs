//! Seeded Monte Carlo estimates over random lifts, exact enumeration counterparts,
//! and campaign files (CSV plus JSONL) that replay byte for byte.
//!
//! Seed scheme: cell `c` of a campaign (cells ordered statistic-major, then n) uses the
//! cell seed `sample_seed(master, c)`, and sample `i` of that cell uses
//! `sample_seed(cell_seed, i)`. Shards may split the sample range of a cell freely.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base_graph::BaseGraph;
use crate::coloring::{chromatic_number_with, count_proper_colorings_with, count_strongly_equitable_with, Budget, DEFAULT_COUNT_CAP};
use crate::error::{Error, Result};
use crate::lift::{count_cycles, expand, sample_lift, sample_seed, Lift, MAX_CYCLE_LENGTH};
use crate::moments_exact::brute_force_moment;

/// A lift statistic, written `Z_j`, `chi`, `Y`, `X` or `Y*Z_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Statistic {
    Cycles(usize),
    Chromatic,
    Equitable,
    Proper,
    EquitableTimesCycles(usize),
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Cycles(j) => write!(f, "Z_{j}"),
            Statistic::Chromatic => write!(f, "chi"),
            Statistic::Equitable => write!(f, "Y"),
            Statistic::Proper => write!(f, "X"),
            Statistic::EquitableTimesCycles(j) => write!(f, "Y*Z_{j}"),
        }
    }
}

fn parse_cycle_length(s: &str) -> Option<usize> {
    let rest = s.strip_prefix('Z')?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    let j: usize = rest.parse().ok()?;
    (1..=MAX_CYCLE_LENGTH).contains(&j).then_some(j)
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let parsed = match t {
            "chi" | "χ" => Some(Statistic::Chromatic),
            "Y" => Some(Statistic::Equitable),
            "X" => Some(Statistic::Proper),
            _ => {
                let product = ["Y*", "Y·", "YZ"].iter().find_map(|p| t.strip_prefix(p).map(|r| (p, r)));
                match product {
                    Some((&"YZ", rest)) => parse_cycle_length(&format!("Z{rest}")).map(Statistic::EquitableTimesCycles),
                    Some((_, rest)) => parse_cycle_length(rest).map(Statistic::EquitableTimesCycles),
                    None => parse_cycle_length(t).map(Statistic::Cycles),
                }
            }
        };
        parsed.ok_or_else(|| Error::InvalidConfig(format!("unknown statistic {s:?}")))
    }
}

impl TryFrom<String> for Statistic {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Statistic> for String {
    fn from(s: Statistic) -> Self {
        s.to_string()
    }
}

/// Solver limits shared by every statistic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub budget: Budget,
    /// Largest lifted graph (in vertices) for exact colouring counts.
    pub count_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { budget: Budget::from_env(), count_cap: DEFAULT_COUNT_CAP }
    }
}

impl Statistic {
    pub fn needs_colours(&self) -> bool {
        !matches!(self, Statistic::Cycles(_) | Statistic::Chromatic)
    }

    /// Value on one lift; `None` when the solver budget ran out.
    pub fn evaluate(&self, lift: &Lift<'_>, k: usize, limits: Limits) -> Result<Option<BigUint>> {
        let censor = |r: Result<BigUint>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::BudgetExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        };
        match *self {
            Statistic::Cycles(j) => Ok(Some(BigUint::from(count_cycles(&expand(lift), j)?))),
            Statistic::Chromatic => censor(chromatic_number_with(&expand(lift), limits.budget).map(BigUint::from)),
            Statistic::Proper => censor(count_proper_colorings_with(&expand(lift), k, limits.count_cap, limits.budget)),
            Statistic::Equitable => censor(count_strongly_equitable_with(lift, k, limits.count_cap, limits.budget)),
            Statistic::EquitableTimesCycles(j) => {
                let y = censor(count_strongly_equitable_with(lift, k, limits.count_cap, limits.budget))?;
                match y {
                    Some(y) if y.is_zero() => Ok(Some(y)),
                    Some(y) => Ok(Some(y * count_cycles(&expand(lift), j)?)),
                    None => Ok(None),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub statistic: Statistic,
    pub n: usize,
    pub k: usize,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub censored: u64,
    pub seconds: f64,
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Clock {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

fn evaluate_samples(
    g: &BaseGraph,
    n: usize,
    k: usize,
    statistic: Statistic,
    samples: u64,
    seed: u64,
    limits: Limits,
) -> Result<Vec<Option<BigUint>>> {
    let one = |i: u64| -> Result<Option<BigUint>> {
        let lift = sample_lift(g, n, sample_seed(seed, i))?;
        statistic.evaluate(&lift, k, limits)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..samples).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..samples).map(one).collect()
    }
}

fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn check_sampling(n: usize, k: usize, statistic: Statistic, samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("fiber size must be positive".into()));
    }
    if statistic.needs_colours() && k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    Ok(())
}

/// Sample mean and standard error of a statistic over independent uniform lifts.
/// Censored samples are left out of the mean and counted.
pub fn mc_expectation(
    g: &BaseGraph,
    n: usize,
    k: usize,
    statistic: Statistic,
    samples: u64,
    seed: u64,
    limits: Limits,
) -> Result<EstimateRecord> {
    check_sampling(n, k, statistic, samples)?;
    let clock = Clock::start();
    let raw = evaluate_samples(g, n, k, statistic, samples, seed, limits)?;
    let values: Vec<f64> = raw.iter().flatten().map(to_f64).collect();
    if values.is_empty() {
        return Err(Error::AllCensored { samples });
    }
    let (mean, stderr) = mean_and_stderr(&values);
    Ok(EstimateRecord {
        statistic,
        n,
        k,
        mean,
        stderr,
        samples: values.len() as u64,
        censored: samples - values.len() as u64,
        seconds: clock.seconds(),
    })
}

/// Exact mean of a statistic over every n-lift. Budget exhaustion is an error here.
pub fn exact_expectation(g: &BaseGraph, n: usize, k: usize, statistic: Statistic, limits: Limits) -> Result<BigRational> {
    check_sampling(n, k, statistic, 1)?;
    brute_force_moment(g, n, |l| match statistic.evaluate(l, k, limits)? {
        Some(v) => Ok(BigRational::from_integer(BigInt::from(v))),
        None => Err(Error::BudgetExhausted { nodes: limits.budget.0 }),
    })
}

/// `mc_expectation` with the enumeration oracle; stderr is 0 and `samples` counts lifts.
pub fn exact_record(g: &BaseGraph, n: usize, k: usize, statistic: Statistic, limits: Limits) -> Result<EstimateRecord> {
    let clock = Clock::start();
    let mean = exact_expectation(g, n, k, statistic, limits)?;
    let lifts = crate::lift::lift_count(g, n).round() as u64;
    Ok(EstimateRecord {
        statistic,
        n,
        k,
        mean: mean.to_f64().unwrap_or(f64::NAN),
        stderr: 0.0,
        samples: lifts,
        censored: 0,
        seconds: clock.seconds(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    /// Sum of Y Z_j over sum of Y.
    pub ratio: f64,
    /// Delta-method standard error.
    pub stderr: f64,
    pub samples: u64,
    pub censored: u64,
}

/// Ratio estimator of E[Y Z_j] / E[Y] over sampled lifts.
pub fn joint_ratio_estimate(
    g: &BaseGraph,
    n: usize,
    k: usize,
    j: usize,
    samples: u64,
    seed: u64,
    limits: Limits,
) -> Result<RatioEstimate> {
    check_sampling(n, k, Statistic::Equitable, samples)?;
    let pair = |i: u64| -> Result<Option<(f64, f64)>> {
        let lift = sample_lift(g, n, sample_seed(seed, i))?;
        match Statistic::Equitable.evaluate(&lift, k, limits)? {
            None => Ok(None),
            Some(y) if y.is_zero() => Ok(Some((0.0, 0.0))),
            Some(y) => Ok(Some((to_f64(&y), count_cycles(&expand(&lift), j)? as f64))),
        }
    };
    #[cfg(feature = "parallel")]
    let raw: Vec<Option<(f64, f64)>> = {
        use rayon::prelude::*;
        (0..samples).into_par_iter().map(pair).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let raw: Vec<Option<(f64, f64)>> = (0..samples).map(pair).collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = raw.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::AllCensored { samples });
    }
    let sum_y: f64 = kept.iter().map(|p| p.0).sum();
    if sum_y == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let ratio = kept.iter().map(|(y, z)| y * z).sum::<f64>() / sum_y;
    let m = kept.len() as f64;
    let stderr = if kept.len() < 2 {
        0.0
    } else {
        let resid = kept.iter().map(|(y, z)| (y * z - ratio * y).powi(2)).sum::<f64>() / (m - 1.0);
        (resid / m).sqrt() / (sum_y / m)
    };
    Ok(RatioEstimate { ratio, stderr, samples: kept.len() as u64, censored: samples - kept.len() as u64 })
}

/// E[Y Z_j] / E[Y] by enumerating every lift.
pub fn joint_ratio_exact(g: &BaseGraph, n: usize, k: usize, j: usize, limits: Limits) -> Result<BigRational> {
    let y = exact_expectation(g, n, k, Statistic::Equitable, limits)?;
    if y.is_zero() {
        return Err(Error::UndefinedRatio);
    }
    Ok(exact_expectation(g, n, k, Statistic::EquitableTimesCycles(j), limits)? / y)
}

fn default_count_cap() -> usize {
    DEFAULT_COUNT_CAP
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// "K4", "petersen" or a path to an edge-list file.
    pub graph: String,
    pub n: Vec<usize>,
    pub k: usize,
    pub statistics: Vec<String>,
    pub samples: u64,
    pub seed: u64,
    /// Solver node budget; `LIFTCHROMA_BUDGET` takes precedence when set.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default = "default_count_cap")]
    pub count_cap: usize,
    /// Enumerate all lifts instead of sampling.
    #[serde(default)]
    pub exact: bool,
    /// Record wall time; off by default so replays are byte-identical.
    #[serde(default)]
    pub record_timing: bool,
    /// Prefix for `<output>.csv` and `<output>.jsonl`; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn parsed_statistics(&self) -> Result<Vec<Statistic>> {
        self.statistics.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<(BaseGraph, Vec<Statistic>)> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::InvalidConfig("n list must be non-empty and positive".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidConfig("no statistics requested".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        let stats = self.parsed_statistics()?;
        let g = BaseGraph::from_spec(&self.graph).map_err(|e| Error::InvalidConfig(format!("graph {:?}: {e}", self.graph)))?;
        Ok((g, stats))
    }

    pub fn limits(&self) -> Limits {
        let budget = std::env::var(crate::coloring::BUDGET_ENV_VAR)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .or(self.budget)
            .map(Budget)
            .unwrap_or_default();
        Limits { budget, count_cap: self.count_cap }
    }

    /// SHA-256 of the compact JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub records: Vec<EstimateRecord>,
    pub config_hash: String,
    pub csv_path: Option<PathBuf>,
    pub jsonl_path: Option<PathBuf>,
}

#[derive(Serialize)]
struct JsonlHeader<'a> {
    config: &'a CampaignConfig,
    config_sha256: &'a str,
    seed: u64,
    seed_scheme: &'static str,
}

const SEED_SCHEME: &str = "sample i of cell c: sample_seed(sample_seed(seed, c), i); sample_seed(m, i) = splitmix64(m ^ splitmix64(i))";

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutput> {
    let (g, stats) = config.validate()?;
    let limits = config.limits();
    let mut records = Vec::new();
    let mut cell = 0u64;
    for &stat in &stats {
        for &n in &config.n {
            let mut rec = if config.exact {
                exact_record(&g, n, config.k, stat, limits)?
            } else {
                mc_expectation(&g, n, config.k, stat, config.samples, sample_seed(config.seed, cell), limits)?
            };
            if !config.record_timing {
                rec.seconds = 0.0;
            }
            records.push(rec);
            cell += 1;
        }
    }
    let config_hash = config.hash();
    let (csv_path, jsonl_path) = match &config.output {
        Some(prefix) => {
            let (c, j) = output_paths(prefix);
            write_csv(&c, &records)?;
            write_jsonl(&j, config, &config_hash, &records)?;
            (Some(c), Some(j))
        }
        None => (None, None),
    };
    Ok(CampaignOutput { records, config_hash, csv_path, jsonl_path })
}

pub fn output_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".csv"), with(".jsonl"))
}

pub fn write_csv(path: &Path, records: &[EstimateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_jsonl(path: &Path, config: &CampaignConfig, hash: &str, records: &[EstimateRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header = JsonlHeader { config, config_sha256: hash, seed: config.seed, seed_scheme: SEED_SCHEME };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
