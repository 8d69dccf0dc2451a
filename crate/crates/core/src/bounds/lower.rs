//! Thresholds and lemmas behind the logarithmic lower bound on uniform
//! instances with `p = 1/2`.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::{log_add, log_sf, BinomialSpec, BinomialTable};
use super::report::BoundReport;
use super::zones::lowest_true;
use crate::error::BoundsError;

pub const MIN_N: u64 = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbThresholds {
    pub lower: u64,
    pub upper: u64,
}

fn log_u_threshold(n: u64) -> f64 {
    -(3.0 * E * E * n as f64 * 6f64.sqrt()).ln()
}

fn log_l_threshold(n: u64) -> f64 {
    -(n as f64 * 2f64.sqrt()).ln()
}

/// `U` is the lowest `c` with `Pr[B > c] ≤ 1/(3e²n√6)`, `L` the lowest `c`
/// with `Pr[B > c] < 1/(n√2)`, for `B ~ Bin(n, 1/2)`.
pub fn lb_thresholds(n: u64) -> Result<LbThresholds, BoundsError> {
    if n < 2 {
        return Err(BoundsError::NTooSmall { n, min: 2 });
    }
    let b = BinomialSpec::new(n, 0.5)?;
    let (lu, ll) = (log_u_threshold(n), log_l_threshold(n));
    let upper = lowest_true(0, n, |c| log_sf(&b, c as i64 + 1) <= lu);
    let lower = lowest_true(0, n, |c| log_sf(&b, c as i64 + 1) < ll);
    Ok(LbThresholds { lower, upper })
}

fn require_n(n: u64) -> Result<(), BoundsError> {
    if n < MIN_N {
        Err(BoundsError::NTooSmall { n, min: MIN_N })
    } else {
        Ok(())
    }
}

/// Threshold lemmas, lb-step2, the exponential claim, pdf-vs-cdf and the
/// `n - 1` lemma, each over its full range.
pub fn verify_section5_lemmas(n: u64) -> Result<Vec<BoundReport>, BoundsError> {
    require_n(n)?;
    let th = lb_thresholds(n)?;
    let (l, u) = (th.lower as i64, th.upper as i64);
    let nf = n as f64;
    let ln_n = nf.ln();
    let b = BinomialTable::new(BinomialSpec::new(n, 0.5)?);
    let b1 = BinomialTable::new(BinomialSpec::new(n - 1, 0.5)?);
    let grid = |range: String| format!("n = {n}, L = {l}, U = {u}, {range}");

    let mut step1 = BoundReport::new("lb-step1", "L >= n/2 + sqrt(n ln n / 6)", grid("single point".into()), &[]);
    step1.check_le_linear(&[], nf / 2.0 + (nf * ln_n / 6.0).sqrt(), l as f64);
    let mut chernoff_u = BoundReport::new("chernoff-u", "U <= n/2 + sqrt(n ln n)", grid("single point".into()), &[]);
    chernoff_u.check_le_linear(&[], u as f64, nf / 2.0 + (nf * ln_n).sqrt());
    let mut step3 = BoundReport::new("lb-step3", "U - L >= (1/6) sqrt(n / ln n)", grid("single point".into()), &[]);
    step3.check_le_linear(&[], (nf / ln_n).sqrt() / 6.0, (u - l) as f64);

    let mut step2 = BoundReport::new(
        "lb-step2",
        "Pr[B = x] >= ((2L - n)/n) Pr[B >= x]",
        grid("every integer x in [L, n]".into()),
        &["x"],
    );
    let coef = (2.0 * l as f64 - nf) / nf;
    let ln_coef = if coef > 0.0 { coef.ln() } else { f64::NEG_INFINITY };
    for x in l..=n as i64 {
        step2.check_ge(&[x as f64], b.log_pmf(x), ln_coef + b.log_sf(x));
    }

    let expo = claim_expo(&b);

    let mut pdf = BoundReport::new(
        "pdf-vs-cdf",
        "Pr[B = U] <= (8/(3e sqrt 6)) sqrt(ln n) / n^(3/2)",
        grid("x = U".into()),
        &["x"],
    );
    let rhs = (8.0 / (3.0 * E * 6f64.sqrt())).ln() + 0.5 * ln_n.ln() - 1.5 * ln_n;
    pdf.check_le(&[u as f64], b.log_pmf(u), rhs);

    let mut n1 = BoundReport::new(
        "n-1",
        "Pr[B' = x] >= (2/3) Pr[B = x], B' ~ Bin(n-1, 1/2)",
        grid("every integer x in [L+1, U]".into()),
        &["x"],
    );
    let ln23 = (2.0f64 / 3.0).ln();
    for x in (l + 1)..=u {
        n1.check_ge(&[x as f64], b1.log_pmf(x), ln23 + b.log_pmf(x));
    }

    Ok(vec![step1, chernoff_u, step3, step2, expo, pdf, n1])
}

/// `Pr[B = x] ≤ (y/(n-y))^(y-x) Pr[B = y]` for every `x ≤ y < n`.
fn claim_expo(b: &BinomialTable) -> BoundReport {
    let n = b.n() as i64;
    let grid = format!("n = {n}, every pair of integers 0 <= x <= y < n");
    let lp: Vec<f64> = (0..=n).map(|x| b.log_pmf(x)).collect();
    let desc = "Pr[B = x] <= (y/(n-y))^(y-x) Pr[B = y]";
    let chunks: Vec<BoundReport> = (0..n)
        .into_par_iter()
        .fold(
            || BoundReport::new("claim-expo", desc, grid.clone(), &["x", "y"]),
            |mut r, y| {
                let base = lp[y as usize];
                if y == 0 {
                    r.check_le(&[0.0, 0.0], lp[0], base);
                    return r;
                }
                let slope = (y as f64 / (n - y) as f64).ln();
                // Track the tightest x per y; every pair still counts.
                let mut worst = (f64::INFINITY, y);
                for x in 0..=y {
                    let rhs = (y - x) as f64 * slope + base;
                    let m = rhs - lp[x as usize];
                    if m < worst.0 {
                        worst = (m, x);
                    }
                }
                r.points_checked += y as u64;
                let x = worst.1;
                r.check_le(&[x as f64, y as f64], lp[x as usize], (y - x) as f64 * slope + base);
                r
            },
        )
        .collect();
    let mut out = BoundReport::new("claim-expo", desc, grid, &["x", "y"]);
    for c in chunks {
        out.merge(c);
    }
    out
}

/// `(1/2)(L - n/2) Σ_{d=L+1}^{U} C(n,2) Pr[B' = d]² Pr[B ≤ d-1]^(n-2)`.
pub fn event_d_lower_bound(n: u64) -> Result<f64, BoundsError> {
    require_n(n)?;
    let th = lb_thresholds(n)?;
    let b = BinomialTable::new(BinomialSpec::new(n, 0.5)?);
    let b1 = BinomialTable::new(BinomialSpec::new(n - 1, 0.5)?);
    let nf = n as f64;
    let ln_pairs = (nf * (nf - 1.0) / 2.0).ln();
    let mut acc = f64::NEG_INFINITY;
    for d in (th.lower as i64 + 1)..=th.upper as i64 {
        let term = ln_pairs + 2.0 * b1.log_pmf(d) + (nf - 2.0) * b.log_cdf(d - 1);
        acc = log_add(acc, term);
    }
    Ok(0.5 * (th.lower as f64 - nf / 2.0) * acc.exp())
}

/// `ln n / (6561 e⁵ √6)`.
pub fn event_d_target(n: u64) -> f64 {
    (n as f64).ln() / (6561.0 * E.powi(5) * 6f64.sqrt())
}

pub fn verify_event_d(n: u64) -> Result<BoundReport, BoundsError> {
    let v = event_d_lower_bound(n)?;
    let mut r = BoundReport::new(
        "event-d",
        "(1/2)(L - n/2) sum_d C(n,2) Pr[B' = d]^2 Pr[B <= d-1]^(n-2) >= ln n / (6561 e^5 sqrt 6)",
        format!("n = {n}"),
        &["n"],
    );
    r.check_le_linear(&[n as f64], event_d_target(n), v);
    r.check_le_linear(&[n as f64], v, n as f64);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::binomial::binom_sf;

    #[test]
    fn thresholds_match_a_linear_scan() {
        for n in [2u64, 10, 80, 1000] {
            let th = lb_thresholds(n).unwrap();
            let b = BinomialSpec::new(n, 0.5).unwrap();
            let nf = n as f64;
            let tu = 1.0 / (3.0 * E * E * nf * 6f64.sqrt());
            let tl = 1.0 / (nf * 2f64.sqrt());
            let u = (0..=n as i64).find(|&c| binom_sf(&b, c + 1) <= tu).unwrap();
            let l = (0..=n as i64).find(|&c| binom_sf(&b, c + 1) < tl).unwrap();
            assert_eq!((th.lower as i64, th.upper as i64), (l, u), "n={n}");
            assert!(th.lower <= th.upper);
        }
        assert!(lb_thresholds(1).is_err());
    }

    #[test]
    fn pmf_ratio_of_n_and_n_minus_one() {
        let n = 10_000i64;
        let b = BinomialTable::new(BinomialSpec::new(n as u64, 0.5).unwrap());
        let b1 = BinomialTable::new(BinomialSpec::new(n as u64 - 1, 0.5).unwrap());
        for x in [4990i64, 5000, 5100, 5200] {
            let ratio = (b1.log_pmf(x) - b.log_pmf(x)).exp();
            let exact = 2.0 * (n - x) as f64 / n as f64;
            assert!((ratio - exact).abs() < 1e-11, "x={x}: {ratio} vs {exact}");
        }
    }

    #[test]
    fn section5_rejects_small_n() {
        assert_eq!(
            verify_section5_lemmas(79).unwrap_err(),
            BoundsError::NTooSmall { n: 79, min: 80 }
        );
        assert!(event_d_lower_bound(50).is_err());
    }

    #[test]
    fn claim_expo_counts_every_pair() {
        let b = BinomialTable::new(BinomialSpec::new(200, 0.5).unwrap());
        let r = claim_expo(&b);
        assert_eq!(r.points_checked, 200 * 201 / 2);
        assert!(r.holds());
    }

    #[test]
    fn event_d_is_nonnegative_and_at_most_n() {
        for n in [80u64, 500, 2000] {
            let v = event_d_lower_bound(n).unwrap();
            assert!(v >= 0.0 && v <= n as f64, "n={n}: {v}");
        }
    }
}
