use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use impartial_core::bounds::{self, comfort_zone, hazard_ratio, BinomialSpec, Suite};
use impartial_core::experiments::{self, PriorFamily, RunConfig};
use impartial_core::impartiality::{check_exhaustive, check_random, MAX_EXHAUSTIVE_M};
use impartial_core::rng::trial_rng;
use impartial_core::{ExperimentError, MechanismConfig, Prior};

/// Exit code for a failed inequality, counterexample or floor violation.
const MATH_FAILURE: u8 = 2;
const USAGE: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "impartial", version, about = "Impartial selection with priors: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo estimate of the expected additive gap.
    Simulate(SimulateArgs),
    /// Estimates over a list of sizes, written as CSV.
    Sweep(SweepArgs),
    /// Searches for a profitable deviation.
    CheckImpartial(CheckArgs),
    /// Numeric verification of the analysis inequalities.
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// Comfort zone of Bin(n, p).
    Zones(ZonesArgs),
    /// Hazard ratio Pr[B = x] / Pr[B >= x] of Bin(n, p).
    Hazard(HazardArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Prior as inline JSON or a path to a JSON file.
    #[arg(long, required_unless_present = "config")]
    prior: Option<String>,
    /// Mechanism as inline JSON or a path; a missing default is resolved from the prior.
    #[arg(long, required_unless_present = "config")]
    mechanism: Option<String>,
    #[arg(long, required_unless_present = "config")]
    trials: Option<u64>,
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// A full run config, or an earlier result file whose config is re-run.
    #[arg(long, conflicts_with_all = ["prior", "mechanism", "trials", "seed"])]
    config: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    prior_family: String,
    #[arg(long)]
    mechanism_rule: String,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// CSV path; the resolved config goes next to it with a `.json` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    mechanism: String,
    #[arg(long)]
    m: Option<usize>,
    /// Sample profiles from `--prior` instead of enumerating all of them.
    #[arg(long, requires = "prior")]
    random: bool,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BoundsAction {
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long)]
    n: u64,
    #[arg(long, num_args = 1..)]
    p: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SuiteArg {
    Tails,
    Zones,
    Technical,
    Section5,
    EventD,
    TwoNode,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Tails => Suite::Tails,
            SuiteArg::Zones => Suite::Zones,
            SuiteArg::Technical => Suite::Technical,
            SuiteArg::Section5 => Suite::Section5,
            SuiteArg::EventD => Suite::EventD,
            SuiteArg::TwoNode => Suite::TwoNode,
        }
    }
}

#[derive(Args, Debug)]
struct ZonesArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Size used in the threshold n^-5.33; defaults to `n`.
    #[arg(long)]
    threshold_n: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HazardArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Points to evaluate; every x in [0, n] when absent.
    #[arg(long, value_delimiter = ',')]
    x: Vec<i64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Pass,
    Fail,
}

/// Inline JSON when the argument looks like JSON, otherwise a file path.
fn read_json(arg: &str) -> Result<Value> {
    let text = match arg.trim_start().chars().next() {
        Some('{') | Some('[') => arg.to_string(),
        _ => fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?,
    };
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {arg}"))
}

fn parse<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    serde_json::from_value(read_json(arg)?).with_context(|| format!("invalid {what}"))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let mut cfg: RunConfig = match &a.config {
        Some(arg) => {
            let v = read_json(arg)?;
            let inner = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(inner).context("invalid run config")?
        }
        None => {
            let prior: Prior = parse(a.prior.as_deref().unwrap(), "prior")?;
            let rule: MechanismConfig = parse(a.mechanism.as_deref().unwrap(), "mechanism")?;
            RunConfig {
                mechanism: rule.resolve(&prior),
                prior,
                trials: a.trials.unwrap(),
                master_seed: a.seed.unwrap(),
                workers: 0,
            }
        }
    };
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    match experiments::mc_additive(&cfg) {
        Ok(estimate) => {
            emit(&json!({ "config": cfg, "estimate": estimate }), a.out.as_deref())?;
            Ok(Outcome::Pass)
        }
        Err(e @ ExperimentError::FloorViolated { .. }) => {
            emit(&json!({ "config": cfg, "failure": e.to_string() }), a.out.as_deref())?;
            Ok(Outcome::Fail)
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep(a: SweepArgs) -> Result<Outcome> {
    let family: PriorFamily = parse(&a.prior_family, "prior family")?;
    let rule: MechanismConfig = parse(&a.mechanism_rule, "mechanism rule")?;
    let rows = experiments::sweep(&family, &rule, &a.n, a.trials, a.seed, a.workers)?;
    let file = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    experiments::write_sweep_csv(&rows, file)?;
    let mut side = a.out.clone().into_os_string();
    side.push(".json");
    let config = json!({
        "prior_family": family,
        "mechanism_rule": rule,
        "n": a.n,
        "trials": a.trials,
        "seed": a.seed,
        "workers": a.workers,
        "point_seeds": rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
    });
    emit(&json!({ "config": config, "rows": rows }), Some(Path::new(&side)))?;
    Ok(Outcome::Pass)
}

fn check_impartial(a: CheckArgs) -> Result<Outcome> {
    let rule: MechanismConfig = parse(&a.mechanism, "mechanism")?;
    let prior: Option<Prior> = a.prior.as_deref().map(|p| parse(p, "prior")).transpose()?;
    let mech = match &prior {
        Some(prior) => rule.resolve(prior),
        None => rule.try_into().context("mechanism needs a default node or a prior")?,
    };
    let (report, config) = if a.random {
        let prior = prior.expect("clap requires --prior with --random");
        let mut rng = trial_rng(a.seed, 0);
        let report = check_random(&mech, &prior, a.trials, &mut rng)?;
        let config = json!({ "mode": "random", "mechanism": mech, "prior": prior, "trials": a.trials, "seed": a.seed });
        (report, config)
    } else {
        let Some(m) = a.m.or(prior.as_ref().map(Prior::m)) else {
            bail!("--m is required for the exhaustive check");
        };
        if m > MAX_EXHAUSTIVE_M {
            bail!("exhaustive check supports m <= {MAX_EXHAUSTIVE_M}; use --random");
        }
        let report = check_exhaustive(&mech, m)?;
        (report, json!({ "mode": "exhaustive", "mechanism": mech, "m": m }))
    };
    let passed = report.passed();
    emit(&json!({ "config": config, "report": report }), a.out.as_deref())?;
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let report = bounds::run_suite(a.suite.into(), a.n, &a.p)?;
    for r in &report.reports {
        let status = if r.is_skipped() {
            "skip"
        } else if r.points_checked == 0 {
            "n/a"
        } else if r.holds() {
            "ok"
        } else {
            "FAIL"
        };
        let margin = r.tightest.as_ref().map_or(f64::NAN, |t| t.margin);
        eprintln!(
            "{status:>4}  {:<18} points {:>9}  violations {:>5}  min margin {margin:.3e}",
            r.inequality, r.points_checked, r.violations.len()
        );
    }
    let passed = report.passed();
    emit(&report, a.out.as_deref())?;
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn zones(a: ZonesArgs) -> Result<Outcome> {
    let spec = BinomialSpec::new(a.n, a.p)?;
    let thr = a.threshold_n.unwrap_or(a.n);
    let zone = comfort_zone(&spec, thr);
    let config = json!({ "n": a.n, "p": a.p, "threshold_n": thr });
    emit(&json!({ "config": config, "zone": zone, "width": zone.upper - zone.lower }), a.out.as_deref())?;
    Ok(Outcome::Pass)
}

fn hazard(a: HazardArgs) -> Result<Outcome> {
    let spec = BinomialSpec::new(a.n, a.p)?;
    let xs: Vec<i64> = if a.x.is_empty() {
        (0..=a.n as i64).collect()
    } else {
        a.x.clone()
    };
    let points = xs
        .iter()
        .map(|&x| Ok(json!({ "x": x, "hazard": hazard_ratio(&spec, x)? })))
        .collect::<Result<Vec<_>>>()?;
    let config = json!({ "n": a.n, "p": a.p, "x": a.x });
    emit(&json!({ "config": config, "points": points }), a.out.as_deref())?;
    Ok(Outcome::Pass)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::CheckImpartial(a) => check_impartial(a),
        Command::Bounds {
            action: BoundsAction::Verify(a),
        } => verify(a),
        Command::Zones(a) => zones(a),
        Command::Hazard(a) => hazard(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(MATH_FAILURE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}
