//! Seeded Monte Carlo estimation of the expected additive gap, size sweeps
//! and the two named scenario constructions.
//!
//! Trial `i` always draws from the substream `(master_seed, i)` and the gaps
//! are reduced as integers, so an estimate does not depend on how trials are
//! spread over worker threads.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ExperimentError;
use crate::mechanisms::{default_node, Mechanism, MechanismConfig, MechanismKind};
use crate::priors::{DenseSampler, Prior};
use crate::profile::NodeId;
use crate::rng::{mix_seed, trial_rng};

/// Priors with more nodes than this use lazy sampling when they allow it.
pub const LAZY_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub prior: Prior,
    pub mechanism: Mechanism,
    pub trials: u64,
    pub master_seed: u64,
    /// Worker threads; `0` uses the global pool.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean_gap: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub gap_sum: u64,
    pub gap_sq_sum: u64,
    pub gap_histogram: BTreeMap<usize, u64>,
    /// Trials in which the winner was the default reached by fallback.
    pub via_default: u64,
    pub lazy: bool,
}

impl MCEstimate {
    pub fn via_default_frequency(&self) -> f64 {
        self.via_default as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    sum: u64,
    sq: u64,
    hist: BTreeMap<usize, u64>,
    via_default: u64,
}

impl Tally {
    fn add(&mut self, gap: usize, via_default: bool) {
        self.sum += gap as u64;
        self.sq += (gap as u64) * (gap as u64);
        *self.hist.entry(gap).or_default() += 1;
        self.via_default += via_default as u64;
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.sum += other.sum;
        self.sq += other.sq;
        self.via_default += other.via_default;
        for (g, c) in other.hist {
            *self.hist.entry(g).or_default() += c;
        }
        self
    }

    fn finish(self, trials: u64, seed: u64, lazy: bool) -> MCEstimate {
        let t = trials as u128;
        let (s, q) = (self.sum as u128, self.sq as u128);
        // Sample variance numerator T Σx² - (Σx)², exact in integers.
        let stderr = if trials > 1 {
            let num = t * q - s * s;
            (num as f64 / (t * t * (t - 1)) as f64).sqrt()
        } else {
            0.0
        };
        MCEstimate {
            mean_gap: self.sum as f64 / trials as f64,
            stderr,
            trials,
            seed,
            gap_sum: self.sum,
            gap_sq_sum: self.sq,
            gap_histogram: self.hist,
            via_default: self.via_default,
            lazy,
        }
    }
}

fn uses_lazy(prior: &Prior) -> bool {
    prior.m() > LAZY_THRESHOLD && prior.popularities().is_some()
}

fn run_trial(
    cfg: &RunConfig,
    lazy: bool,
    sampler: &mut DenseSampler,
    trial: u64,
) -> Result<(usize, bool), ExperimentError> {
    let mut rng = trial_rng(cfg.master_seed, trial);
    let mech = &cfg.mechanism;
    let (out, default_degree) = if lazy {
        let mut s = cfg.prior.sample_lazy(&mut rng)?;
        let out = mech.select_lazy(&mut s, &mut rng)?;
        let dd = mech.default_node().map(|t| s.total(t.0));
        (out, dd)
    } else {
        let p = sampler.sample(&cfg.prior, &mut rng)?;
        let out = mech.select(&p)?;
        let dd = mech.default_node().map(|t| p.degree(t));
        (out, dd)
    };
    if let (Mechanism::AvdBeats { .. }, Some(dd)) = (mech, default_degree) {
        if out.winner_degree < dd {
            return Err(ExperimentError::FloorViolated {
                trial,
                winner: out.winner_degree,
                default: dd,
            });
        }
    }
    Ok((out.gap, out.via_default))
}

fn run_all(cfg: &RunConfig, lazy: bool) -> Result<Tally, ExperimentError> {
    (0..cfg.trials)
        .into_par_iter()
        .fold(
            || (DenseSampler::default(), Ok(Tally::default())),
            |(mut sampler, acc), trial| {
                let acc = acc.and_then(|mut tally| {
                    let (gap, via) = run_trial(cfg, lazy, &mut sampler, trial)?;
                    tally.add(gap, via);
                    Ok(tally)
                });
                (sampler, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce(
            || Ok(Tally::default()),
            |a, b| match (a, b) {
                (Ok(a), Ok(b)) => Ok(a.merge(b)),
                // Keep the lowest failing trial so errors are deterministic too.
                (Err(a), Err(b)) => Err(lower_error(a, b)),
                (Err(e), _) | (_, Err(e)) => Err(e),
            },
        )
}

fn lower_error(a: ExperimentError, b: ExperimentError) -> ExperimentError {
    match (&a, &b) {
        (
            ExperimentError::FloorViolated { trial: ta, .. },
            ExperimentError::FloorViolated { trial: tb, .. },
        ) if tb < ta => b,
        _ => a,
    }
}

/// Estimates `E[Δ(x) - d_w(x)]` over `cfg.trials` independent profiles.
pub fn mc_additive(cfg: &RunConfig) -> Result<MCEstimate, ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    cfg.prior.validate()?;
    cfg.mechanism.validate_for(cfg.prior.m())?;
    let lazy = uses_lazy(&cfg.prior);
    let tally = if cfg.workers == 0 {
        run_all(cfg, lazy)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .expect("thread pool");
        pool.install(|| run_all(cfg, lazy))?
    };
    Ok(tally.finish(cfg.trials, cfg.master_seed, lazy))
}

/// A prior parameterised by the number of voters `n`; every family builds
/// `n + 1` original nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorFamily {
    Uniform { p: f64 },
    /// Twin of every node of `Uniform { n + 1, p }`.
    Duplicated { p: f64 },
    /// Popularities spaced evenly from `lo` (node 0) to `hi` (node n).
    PopularityLinear { lo: f64, hi: f64 },
}

impl PriorFamily {
    pub fn build(&self, n: usize) -> Result<Prior, ExperimentError> {
        let m = n + 1;
        Ok(match *self {
            PriorFamily::Uniform { p } => Prior::uniform(m, p)?,
            PriorFamily::Duplicated { p } => Prior::duplicate(Prior::uniform(m, p)?)?,
            PriorFamily::PopularityLinear { lo, hi } => {
                let p = (0..m)
                    .map(|j| lo + (hi - lo) * j as f64 / n.max(1) as f64)
                    .collect();
                Prior::popularity(p)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub trials: u64,
    pub seed: u64,
    pub mean_gap: f64,
    pub stderr: f64,
    pub sqrt_nlogn: f64,
    pub log_n: f64,
    pub log2_n: f64,
    pub ratio_sqrt_nlogn: f64,
    pub ratio_log_n: f64,
    pub ratio_log2_n: f64,
    pub via_default_frequency: f64,
}

impl SweepRow {
    fn new(n: usize, m: usize, est: &MCEstimate) -> Self {
        let nf = n as f64;
        let log_n = nf.ln();
        let sqrt_nlogn = (nf * log_n).sqrt();
        let log2_n = log_n * log_n;
        Self {
            n,
            m,
            trials: est.trials,
            seed: est.seed,
            mean_gap: est.mean_gap,
            stderr: est.stderr,
            sqrt_nlogn,
            log_n,
            log2_n,
            ratio_sqrt_nlogn: est.mean_gap / sqrt_nlogn,
            ratio_log_n: est.mean_gap / log_n,
            ratio_log2_n: est.mean_gap / log2_n,
            via_default_frequency: est.via_default_frequency(),
        }
    }
}

/// Seed of the sweep point at `n`.
pub fn sweep_point_seed(master_seed: u64, n: usize) -> u64 {
    mix_seed(master_seed, n as u64)
}

/// One estimate per `n`, with the default node recomputed from each prior
/// unless the rule fixes it.
pub fn sweep(
    family: &PriorFamily,
    rule: &MechanismConfig,
    ns: &[usize],
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<SweepRow>, ExperimentError> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(ExperimentError::BadSweep);
    }
    ns.iter()
        .map(|&n| {
            let prior = family.build(n)?;
            let cfg = RunConfig {
                mechanism: rule.resolve(&prior),
                prior,
                trials,
                master_seed: sweep_point_seed(master_seed, n),
                workers,
            };
            let est = mc_additive(&cfg)?;
            Ok(SweepRow::new(n, cfg.prior.m(), &est))
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicationResult {
    pub n: usize,
    pub estimate: MCEstimate,
    pub via_default_frequency: f64,
    /// Constant mechanism on the base prior with the same trial seeds.
    pub paired_constant: MCEstimate,
}

/// AvdBeats on the duplicated `Uniform { n + 1, 1/2 }` prior.
pub fn scenario_duplication(
    n: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<DuplicationResult, ExperimentError> {
    let base = Prior::uniform(n + 1, 0.5)?;
    let prior = Prior::duplicate(base.clone())?;
    let t = default_node(&prior);
    let estimate = mc_additive(&RunConfig {
        prior,
        mechanism: Mechanism::AvdBeats { t },
        trials,
        master_seed: seed,
        workers,
    })?;
    let paired_constant = mc_additive(&RunConfig {
        prior: base,
        mechanism: Mechanism::Constant { t },
        trials,
        master_seed: seed,
        workers,
    })?;
    Ok(DuplicationResult {
        n,
        via_default_frequency: estimate.via_default_frequency(),
        estimate,
        paired_constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultRule {
    MaxExpected,
    Forced(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStats {
    pub trials: u64,
    pub gap_sum: u64,
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Result {
    pub k: usize,
    pub variant: MechanismKind,
    pub default: NodeId,
    pub estimate: MCEstimate,
    /// Keyed by how many of the two blocks approved their hub.
    pub cases: BTreeMap<String, CaseStats>,
}

const CASE_NAMES: [&str; 3] = ["neither", "one", "both"];

/// The correlated block prior under an AVD variant.
pub fn scenario_example1(
    k: usize,
    variant: MechanismKind,
    default_rule: DefaultRule,
    trials: u64,
    seed: u64,
) -> Result<Example1Result, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let prior = Prior::block_correlated(k)?;
    let t = match default_rule {
        DefaultRule::MaxExpected => default_node(&prior),
        DefaultRule::Forced(t) => t,
    };
    let mech = Mechanism::with_default(variant, t);
    mech.validate_for(prior.m())?;
    let mut tally = Tally::default();
    let mut cases = [(0u64, 0u64); 3];
    let mut sampler = DenseSampler::default();
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let p = sampler.sample(&prior, &mut rng)?;
        let out = mech.select(&p)?;
        let approved = (p.degree(NodeId(0)) > 0) as usize + (p.degree(NodeId(1)) > 0) as usize;
        cases[approved].0 += 1;
        cases[approved].1 += out.gap as u64;
        tally.add(out.gap, out.via_default);
    }
    let cases = CASE_NAMES
        .iter()
        .zip(cases)
        .map(|(name, (c, g))| {
            let mean = if c == 0 { 0.0 } else { g as f64 / c as f64 };
            (
                name.to_string(),
                CaseStats {
                    trials: c,
                    gap_sum: g,
                    mean_gap: mean,
                },
            )
        })
        .collect();
    Ok(Example1Result {
        k,
        variant,
        default: t,
        estimate: tally.finish(trials, seed, false),
        cases,
    })
}
