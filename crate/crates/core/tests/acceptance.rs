//! Acceptance gate. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! `cargo test -p impartial-core --test acceptance -- --regenerate-bands`
//! rewrites `tests/data/sweep_bands.json` from an oracle run.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use impartial_core::bounds::{
    lb_thresholds, run_suite, two_node_analysis, BinomialSpec, BinomialTable, Suite, SuiteReport,
};
use impartial_core::experiments::{
    scenario_duplication, scenario_example1, sweep, write_sweep_csv, DefaultRule, PriorFamily,
    SweepRow,
};
use impartial_core::impartiality::{all_defaults, check_exhaustive, check_structure, STRUCTURE_PROPERTIES};
use impartial_core::{Mechanism, MechanismConfig, MechanismKind, NodeId};

const SWEEP_NS: [usize; 3] = [256, 1024, 4096];
const SWEEP_TRIALS: u64 = 2000;
const SWEEP_SEED: u64 = 0x5eed_a11c;
const ORACLE_SEED: u64 = 0x0bac_1e55;
const ORACLE_AVD_TRIALS: u64 = 8000;
const BAND_SIGMAS: f64 = 4.0;

fn bands_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/sweep_bands.json")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Exact binomial arithmetic, independent of the crate's log-space code.

struct ExactTails {
    n: u64,
    /// `upper[c]` = Σ_{i ≥ c} C(n, i), for c in [0, n + 1].
    upper: Vec<BigUint>,
}

impl ExactTails {
    fn new(n: u64) -> Self {
        let mut row = Vec::with_capacity(n as usize + 1);
        let mut c = BigUint::one();
        for i in 0..=n {
            row.push(c.clone());
            c = c * (n - i) / (i + 1);
        }
        let mut upper = vec![BigUint::zero(); n as usize + 2];
        for i in (0..=n as usize).rev() {
            upper[i] = &upper[i + 1] + &row[i];
        }
        ExactTails { n, upper }
    }

    /// `ln Pr[B ≥ c]` for `B ~ Bin(n, 1/2)`.
    fn log_sf(&self, c: i64) -> f64 {
        let c = c.clamp(0, self.n as i64 + 1) as usize;
        big_ln(&self.upper[c]) - self.n as f64 * std::f64::consts::LN_2
    }
}

fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 60 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 60;
    ((x >> shift).to_u64().unwrap() as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `E[max - d_t]` for the constant mechanism with `n + 1` nodes, p = 1/2.
fn exact_constant_gap(n: usize) -> f64 {
    let t = ExactTails::new(n as u64);
    let m = (n + 1) as f64;
    let e_max: f64 = (1..=n as i64)
        .map(|c| {
            let s = t.log_sf(c).exp();
            -(m * (-s).ln_1p()).exp_m1()
        })
        .sum();
    e_max - n as f64 / 2.0
}

// Sweep bands.

#[derive(Debug, Serialize, Deserialize)]
struct Band {
    n: usize,
    center: f64,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepBands {
    sweep_seed: u64,
    sweep_trials: u64,
    oracle_seed: u64,
    oracle_avd_trials: u64,
    sigmas: f64,
    /// Bands on mean_gap / sqrt(n ln n).
    constant_ratio: Vec<Band>,
    /// Bands on mean_gap.
    avd_mean: Vec<Band>,
}

fn sqrt_nlogn(n: usize) -> f64 {
    let n = n as f64;
    (n * n.ln()).sqrt()
}

fn rule(kind: MechanismKind) -> MechanismConfig {
    MechanismConfig { kind, default: None }
}

fn uniform_half() -> PriorFamily {
    PriorFamily::Uniform { p: 0.5 }
}

fn regenerate_bands() -> SweepBands {
    let oracle = |kind, trials| {
        sweep(&uniform_half(), &rule(kind), &SWEEP_NS, trials, ORACLE_SEED, 0).expect("oracle sweep")
    };
    let constant = oracle(MechanismKind::Constant, SWEEP_TRIALS);
    let avd = oracle(MechanismKind::AvdBeats, ORACLE_AVD_TRIALS);
    let w = SWEEP_TRIALS as f64;
    let constant_ratio = constant
        .iter()
        .map(|row| {
            let exact = exact_constant_gap(row.n);
            let sd = row.stderr * (row.trials as f64).sqrt();
            assert!(
                (row.mean_gap - exact).abs() <= BAND_SIGMAS * row.stderr,
                "oracle run disagrees with the exact mean at n = {}",
                row.n
            );
            let half = BAND_SIGMAS * sd / w.sqrt();
            let s = sqrt_nlogn(row.n);
            Band { n: row.n, center: exact / s, lo: (exact - half) / s, hi: (exact + half) / s }
        })
        .collect();
    let avd_mean = avd
        .iter()
        .map(|row| {
            let sd = row.stderr * (row.trials as f64).sqrt();
            let half = BAND_SIGMAS * (row.stderr.powi(2) + sd * sd / w).sqrt();
            Band { n: row.n, center: row.mean_gap, lo: row.mean_gap - half, hi: row.mean_gap + half }
        })
        .collect();
    SweepBands {
        sweep_seed: SWEEP_SEED,
        sweep_trials: SWEEP_TRIALS,
        oracle_seed: ORACLE_SEED,
        oracle_avd_trials: ORACLE_AVD_TRIALS,
        sigmas: BAND_SIGMAS,
        constant_ratio,
        avd_mean,
    }
}

fn load_bands() -> Result<SweepBands, String> {
    let text = fs::read_to_string(bands_path()).map_err(|e| format!("bands file: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("bands file: {e}"))
}

// Criteria.

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let expected_deviations = 4096 * 4 * 8;
    for kind in [MechanismKind::AvdBeats, MechanismKind::Constant] {
        for mech in all_defaults(kind, 4) {
            let r = check_exhaustive(&mech, 4).expect("m = 4 is supported");
            if !r.passed() || r.profiles_checked != 4096 || r.deviations_checked != expected_deviations {
                pass = false;
                notes.push(format!("{mech} did not pass"));
            }
        }
    }
    for mech in [Mechanism::ApprovalVoting, Mechanism::AvdTie { t: NodeId(0) }] {
        let r = check_exhaustive(&mech, 4).expect("m = 4 is supported");
        match &r.counterexample {
            Some(ce) if !r.passed() && ce.reverify(&mech).unwrap_or(false) => {
                notes.push(format!(
                    "{mech}: node {} flips {} -> {}",
                    ce.deviator, ce.winner_before, ce.winner_after
                ));
            }
            _ => {
                pass = false;
                notes.push(format!("{mech}: no re-verifiable counterexample"));
            }
        }
    }
    outcome(pass, format!("avd_beats and constant pass for every default; {}", notes.join("; ")))
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [4usize, 5] {
        let r = check_structure(m).expect("structure check");
        let total: u64 = r.violations.values().sum();
        let complete = STRUCTURE_PROPERTIES.iter().all(|p| r.violations.contains_key(*p));
        let expected = 1u64 << (m * (m - 1));
        pass &= r.holds() && complete && total == 0 && r.profiles_checked == expected;
        notes.push(format!("m = {m}: {} profiles, {total} violations", r.profiles_checked));
    }
    outcome(pass, notes.join(", "))
}

fn suite_passes(r: &SuiteReport, require_all_active: bool) -> Result<(), String> {
    for b in &r.reports {
        if b.exploratory {
            continue;
        }
        if b.is_skipped() && require_all_active {
            return Err(format!("{} skipped", b.inequality));
        }
        if !b.holds() {
            return Err(format!("{} has {} violations", b.inequality, b.violations.len()));
        }
    }
    Ok(())
}

fn criterion_3() -> Outcome {
    let ps = [0.1, 0.2, 0.5, 0.8];
    let mut points = 0u64;
    for n in [100u64, 1000, 10_000] {
        let r = run_suite(Suite::Tails, n, &ps).expect("tails suite");
        if let Err(e) = suite_passes(&r, false) {
            return outcome(false, format!("n = {n}: {e}"));
        }
        for name in ["chernoff-eq1", "chernoff-eq2", "chernoff-eq3", "chernoff-eq4", "hoeffding", "reverse-chernoff"] {
            let checked: u64 = r.reports.iter().filter(|b| b.inequality == name).map(|b| b.points_checked).sum();
            if checked == 0 {
                return outcome(false, format!("n = {n}: {name} never applied"));
            }
        }
        let inverse = r
            .reports
            .iter()
            .find(|b| b.inequality == "inverse-chernoff" && !b.is_skipped())
            .map_or(0, |b| b.points_checked);
        if inverse == 0 {
            return outcome(false, format!("n = {n}: inverse Chernoff not checked at p = 1/2"));
        }
        points += r.reports.iter().map(|b| b.points_checked).sum::<u64>();
    }
    // Spot-check the log-space tails against exact integer sums.
    let n = 1000u64;
    let exact = ExactTails::new(n);
    let table = BinomialTable::new(BinomialSpec::new(n, 0.5).unwrap());
    let worst = (0..=n as i64 + 1)
        .map(|c| {
            let (a, b) = (table.log_sf(c), exact.log_sf(c));
            if a == b { 0.0 } else { ((a - b) / b.abs().max(1.0)).abs() }
        })
        .fold(0.0, f64::max);
    let pass = worst < 1e-10;
    outcome(pass, format!("{points} points, zero violations; exact-sum tail check at n = 1000 max rel. error {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let n = 1u64 << 18;
    let zones = run_suite(Suite::Zones, n, &[0.5, 0.5]).expect("zones suite");
    if let Err(e) = suite_passes(&zones, true) {
        return outcome(false, format!("zones: {e}"));
    }
    let tech = run_suite(Suite::Technical, n, &[0.5, 0.5]).expect("technical suite");
    if let Err(e) = suite_passes(&tech, true) {
        return outcome(false, format!("technical: {e}"));
    }
    let t = &tech.reports[0];
    let margin = t.tightest.as_ref().map_or(f64::NAN, |p| p.margin);
    outcome(
        true,
        format!(
            "n = 2^18: {} zone reports hold; technical lemma {} points, min log-margin {margin:.3}",
            zones.reports.len(),
            t.points_checked
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    for n in [10_000u64, 100_000] {
        let s5 = run_suite(Suite::Section5, n, &[]).expect("section5 suite");
        if let Err(e) = suite_passes(&s5, true) {
            return outcome(false, format!("n = {n}: {e}"));
        }
        let d = run_suite(Suite::EventD, n, &[]).expect("event-d suite");
        if let Err(e) = suite_passes(&d, true) {
            return outcome(false, format!("n = {n}: {e}"));
        }
        let th = lb_thresholds(n).unwrap();
        notes.push(format!("n = {n}: L = {}, U = {}", th.lower, th.upper));
    }
    // Threshold definitions against exact integer tails.
    let n = 10_000u64;
    let th = lb_thresholds(n).unwrap();
    let ex = ExactTails::new(n);
    let nf = n as f64;
    let lu = -(3.0 * std::f64::consts::E.powi(2) * nf * 6f64.sqrt()).ln();
    let ll = -(nf * 2f64.sqrt()).ln();
    let (l, u) = (th.lower as i64, th.upper as i64);
    let exact_ok = ex.log_sf(u + 1) <= lu && ex.log_sf(u) > lu && ex.log_sf(l + 1) < ll && ex.log_sf(l) >= ll;
    if !exact_ok {
        return outcome(false, "thresholds disagree with exact tails at n = 10^4".into());
    }
    outcome(true, format!("{}; all lemmas and event D hold; thresholds match exact tails", notes.join(", ")))
}

fn run_sweep(kind: MechanismKind, workers: usize) -> Vec<SweepRow> {
    sweep(&uniform_half(), &rule(kind), &SWEEP_NS, SWEEP_TRIALS, SWEEP_SEED, workers).expect("sweep")
}

fn criterion_6(bands: &Result<SweepBands, String>, rows: &[SweepRow]) -> Outcome {
    let bands = match bands {
        Ok(b) => b,
        Err(e) => return outcome(false, e.clone()),
    };
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio_sqrt_nlogn).collect();
    let mut pass = true;
    for (row, band) in rows.iter().zip(&bands.constant_ratio) {
        let r = row.ratio_sqrt_nlogn;
        pass &= band.n == row.n && r >= band.lo && r <= band.hi && (1.0 / 6.0..=1.0).contains(&r);
    }
    let drift: Vec<f64> = ratios.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).collect();
    pass &= drift.iter().all(|&d| d < 0.25);
    outcome(
        pass,
        format!(
            "mean_gap/sqrt(n ln n) = {:.4} / {:.4} / {:.4}; drift {:.1}% / {:.1}%",
            ratios[0],
            ratios[1],
            ratios[2],
            100.0 * drift[0],
            100.0 * drift[1]
        ),
    )
}

fn criterion_7(bands: &Result<SweepBands, String>, constant: &[SweepRow], avd: &[SweepRow]) -> Outcome {
    let bands = match bands {
        Ok(b) => b,
        Err(e) => return outcome(false, e.clone()),
    };
    let mut pass = true;
    for (row, band) in avd.iter().zip(&bands.avd_mean) {
        pass &= band.n == row.n && row.mean_gap >= band.lo && row.mean_gap <= band.hi;
        pass &= row.mean_gap >= 0.01 * row.log_n;
    }
    let dominance = avd[2].mean_gap / constant[2].mean_gap;
    let growth = avd[2].mean_gap / avd[1].mean_gap;
    pass &= dominance <= 0.2 && growth <= 2.0;
    outcome(
        pass,
        format!(
            "avd mean_gap = {:.3} / {:.3} / {:.3}; avd/constant at 4096 = {dominance:.3}; growth 1024 -> 4096 = {growth:.3}",
            avd[0].mean_gap, avd[1].mean_gap, avd[2].mean_gap
        ),
    )
}

fn criterion_8() -> Outcome {
    let r = scenario_duplication(101, 10_000, SWEEP_SEED, 0).expect("duplication scenario");
    let (a, b) = (&r.estimate, &r.paired_constant);
    let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let diff = (a.mean_gap - b.mean_gap).abs();
    let pass = r.via_default_frequency == 1.0 && diff <= 3.0 * sigma;
    outcome(
        pass,
        format!(
            "via_default = {}; avd {:.3} vs constant {:.3} (|diff| = {diff:.3}, 3 sigma = {:.3})",
            r.via_default_frequency,
            a.mean_gap,
            b.mean_gap,
            3.0 * sigma
        ),
    )
}

fn criterion_9() -> Outcome {
    let avd = Mechanism::AvdBeats { t: NodeId(0) };
    let ratios: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&p| two_node_analysis(p, &avd).expect("two-node").ratio)
        .collect();
    let mut pass = (ratios[0] - 1.9).abs() < 1e-12;
    pass &= ratios.windows(2).all(|w| w[1] > w[0]) && ratios.iter().all(|&r| r < 2.0);
    pass &= (2.0 - ratios[2]) < 2e-3;

    let tie = scenario_example1(50, MechanismKind::AvdTie, DefaultRule::Forced(NodeId(2)), 10_000, SWEEP_SEED)
        .expect("example scenario");
    let e = &tie.estimate;
    pass &= (e.mean_gap - 50.0).abs() <= 3.0 * e.stderr;

    let beats = scenario_example1(50, MechanismKind::AvdBeats, DefaultRule::Forced(NodeId(2)), 10_000, SWEEP_SEED)
        .expect("example scenario");
    println!(
        "    avd_beats variant report: mean_gap = {:.3} (stderr {:.3}), via_default = {:.4}, cases {}",
        beats.estimate.mean_gap,
        beats.estimate.stderr,
        beats.estimate.via_default_frequency(),
        serde_json::to_string(&beats.cases).unwrap()
    );
    outcome(
        pass,
        format!(
            "two-node ratios {:.4} / {:.4} / {:.4}; avd_tie example mean_gap = {:.3} +- {:.3}",
            ratios[0], ratios[1], ratios[2], e.mean_gap, e.stderr
        ),
    )
}

fn criterion_10() -> Outcome {
    let csv = |workers| {
        let mut buf = Vec::new();
        write_sweep_csv(&run_sweep(MechanismKind::Constant, workers), &mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(1), csv(8));
    outcome(a == b, format!("{} bytes with 1 worker, {} with 8, identical: {}", a.len(), b.len(), a == b))
}

fn report(id: u8, start: Instant, o: Outcome, failures: &mut u32) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{status}] ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
    if !o.pass {
        *failures += 1;
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if args.iter().any(|a| a == "--regenerate-bands") {
        let bands = regenerate_bands();
        let text = serde_json::to_string_pretty(&bands).unwrap() + "\n";
        fs::write(bands_path(), text).expect("write bands");
        println!("wrote {}", bands_path().display());
        return ExitCode::SUCCESS;
    }

    let mut failures = 0;
    let t = Instant::now();
    report(1, t, criterion_1(), &mut failures);
    let t = Instant::now();
    report(2, t, criterion_2(), &mut failures);
    let t = Instant::now();
    report(3, t, criterion_3(), &mut failures);
    let t = Instant::now();
    report(4, t, criterion_4(), &mut failures);
    let t = Instant::now();
    report(5, t, criterion_5(), &mut failures);

    let bands = load_bands();
    let t = Instant::now();
    let constant = run_sweep(MechanismKind::Constant, 0);
    report(6, t, criterion_6(&bands, &constant), &mut failures);
    let t = Instant::now();
    let avd = run_sweep(MechanismKind::AvdBeats, 0);
    report(7, t, criterion_7(&bands, &constant, &avd), &mut failures);
    let t = Instant::now();
    report(8, t, criterion_8(), &mut failures);
    let t = Instant::now();
    report(9, t, criterion_9(), &mut failures);
    let t = Instant::now();
    report(10, t, criterion_10(), &mut failures);

    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
