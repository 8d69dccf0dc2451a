//! Hoeffding, Chernoff/Okamoto and reverse Chernoff bounds, and a suite
//! that sandwiches exact binomial tails between them.

use serde::{Deserialize, Serialize};

use super::binomial::{BinomialSpec, BinomialTable};
use super::report::BoundReport;
use crate::error::BoundsError;

/// Raw Hoeffding value `2 exp(-2ν² / Σ(b_j - a_j)²)`, uncapped.
pub fn hoeffding_raw(ranges: &[(f64, f64)], nu: f64) -> Result<f64, BoundsError> {
    if nu.is_nan() || nu < 0.0 || ranges.iter().any(|&(a, b)| b < a || a.is_nan() || b.is_nan()) {
        return Err(BoundsError::BadHoeffding);
    }
    let spread: f64 = ranges.iter().map(|&(a, b)| (b - a) * (b - a)).sum();
    if spread == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(2.0 * (-2.0 * nu * nu / spread).exp())
}

/// Hoeffding's bound on `Pr[|X - E X| ≥ ν]`, capped at 1.
pub fn hoeffding_bound(ranges: &[(f64, f64)], nu: f64) -> Result<f64, BoundsError> {
    hoeffding_raw(ranges, nu).map(|v| v.min(1.0))
}

/// The tail bounds that apply at one point; `None` where the regime
/// condition fails. Eqs (1)-(2) bound `Pr[B ≥ x]`, eqs (3)-(4) `Pr[B ≤ x]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChernoffBounds {
    pub eq1: Option<f64>,
    pub eq2: Option<f64>,
    pub eq3: Option<f64>,
    pub eq4: Option<f64>,
}

impl ChernoffBounds {
    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            eq1: self.eq1.map(&f),
            eq2: self.eq2.map(&f),
            eq3: self.eq3.map(&f),
            eq4: self.eq4.map(&f),
        }
    }
}

/// Natural logs of the applicable Chernoff bounds.
pub fn chernoff_log_bounds(b: &BinomialSpec, x: i64) -> ChernoffBounds {
    let n = b.n as f64;
    let mu = b.mean();
    let x = x as f64;
    let mut out = ChernoffBounds::default();
    // Both tails degenerate to a point mass when μ ∈ {0, n}.
    if !(mu > 0.0 && mu < n) {
        return out;
    }
    if x >= mu {
        let d2 = (x - mu) * (x - mu);
        if mu >= n / 2.0 {
            out.eq1 = Some(-d2 * n / (2.0 * mu * (n - mu)));
        } else if x <= 2.0 * mu {
            out.eq2 = Some(-d2 / (3.0 * mu));
        }
    }
    if x <= mu {
        let d2 = (mu - x) * (mu - x);
        if mu <= n / 2.0 {
            out.eq3 = Some(-d2 * n / (2.0 * mu * (n - mu)));
        } else if x >= 2.0 * mu - n {
            out.eq4 = Some(-d2 / (3.0 * (n - mu)));
        }
    }
    out
}

pub fn chernoff_bounds(b: &BinomialSpec, x: i64) -> ChernoffBounds {
    chernoff_log_bounds(b, x).map(f64::exp)
}

/// Log of `(1/√(2n)) exp(-3δ²n)`.
pub fn log_inverse_chernoff(n: u64, delta: f64) -> Result<f64, BoundsError> {
    if !(0.0..=0.1).contains(&delta) {
        return Err(BoundsError::BadDelta {
            delta,
            range: "[0, 1/10]",
        });
    }
    let n = n as f64;
    Ok(-0.5 * (2.0 * n).ln() - 3.0 * delta * delta * n)
}

/// Lower bound on `Pr[B ≥ n(1/2 + δ)]` for `B ~ Bin(n, 1/2)`.
pub fn inverse_chernoff(n: u64, delta: f64) -> Result<f64, BoundsError> {
    log_inverse_chernoff(n, delta).map(f64::exp)
}

/// `c log(a / c)` with the convention `0 log(·) = 0`.
fn xlog_ratio(c: f64, a: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * (a / c).ln()
    }
}

/// Log of the reverse Chernoff lower bound on `Pr[B ≥ n(p + δ)]`.
pub fn log_reverse_chernoff(n: u64, p: f64, delta: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::BadProbability(p));
    }
    if !(delta >= 0.0 && delta < 1.0 - p && p + delta > 0.0) {
        return Err(BoundsError::BadDelta {
            delta,
            range: "[0, 1 - p) with p + delta > 0",
        });
    }
    let nf = n as f64;
    let s = p + delta;
    let t = 1.0 - s;
    let exponent = xlog_ratio(s, p) + xlog_ratio(t, 1.0 - p);
    Ok(-0.5 * (8.0 * nf * s * t).ln() + nf * exponent)
}

pub fn reverse_chernoff(n: u64, p: f64, delta: f64) -> Result<f64, BoundsError> {
    log_reverse_chernoff(n, p, delta).map(f64::exp)
}

fn grid_label(n: u64, p: f64) -> String {
    format!("n = {n}, p = {p}, every integer x in [0, n] meeting the regime condition")
}

/// Checks every tail inequality at every integer `x` of `Bin(n, p)`.
pub fn verify_tails(n: u64, p: f64) -> Result<Vec<BoundReport>, BoundsError> {
    let spec = BinomialSpec::new(n, p)?;
    let table = BinomialTable::new(spec);
    let mu = spec.mean();
    let nf = n as f64;
    let grid = grid_label(n, p);
    let names = &["n", "p", "x"];

    let mut eq = [
        BoundReport::new("chernoff-eq1", "Pr[B >= x] <= exp(-(x-mu)^2 n / (2 mu (n-mu))), x >= mu >= n/2", grid.clone(), names),
        BoundReport::new("chernoff-eq2", "Pr[B >= x] <= exp(-(x-mu)^2 / (3 mu)), mu < n/2, mu <= x <= 2 mu", grid.clone(), names),
        BoundReport::new("chernoff-eq3", "Pr[B <= x] <= exp(-(mu-x)^2 n / (2 mu (n-mu))), x <= mu <= n/2", grid.clone(), names),
        BoundReport::new("chernoff-eq4", "Pr[B <= x] <= exp(-(mu-x)^2 / (3 (n-mu))), mu > n/2, 2 mu - n <= x <= mu", grid.clone(), names),
    ];
    let mut hoeffding = BoundReport::new(
        "hoeffding",
        "Pr[|B - mu| >= nu] <= 2 exp(-2 nu^2 / n), nu = |x - mu|",
        grid.clone(),
        names,
    );
    let mut reverse = BoundReport::new(
        "reverse-chernoff",
        "Pr[B >= x] >= reverse Chernoff bound at delta = x/n - p, x >= mu",
        grid.clone(),
        names,
    );
    let mut inverse = if p == 0.5 {
        BoundReport::new(
            "inverse-chernoff",
            "Pr[B >= x] >= exp(-3 delta^2 n) / sqrt(2n), p = 1/2, delta = x/n - 1/2 in [0, 1/10]",
            grid.clone(),
            names,
        )
    } else {
        BoundReport::skipped(
            "inverse-chernoff",
            "Pr[B >= x] >= exp(-3 delta^2 n) / sqrt(2n)",
            grid.clone(),
            format!("applies to p = 1/2 only, got p = {p}"),
        )
    };
    let mut recurrence = BoundReport::new(
        "sf-recurrence",
        "|log(Pr[B >= x+1] + Pr[B = x]) - log Pr[B >= x]| <= 1e-12",
        grid.clone(),
        names,
    );
    let mut hazard_range = BoundReport::new(
        "hazard-range",
        "0 < Pr[B = x] <= Pr[B >= x]",
        grid.clone(),
        names,
    );

    let ranges_sq = nf;
    for xi in 0..=n as i64 {
        let x = xi as f64;
        let params = [nf, p, x];
        let sf = table.log_sf(xi);
        let cdf = table.log_cdf(xi);
        let lb = chernoff_log_bounds(&spec, xi);
        for (report, bound, tail) in [
            (0, lb.eq1, sf),
            (1, lb.eq2, sf),
            (2, lb.eq3, cdf),
            (3, lb.eq4, cdf),
        ] {
            if let Some(bound) = bound {
                eq[report].check_le(&params, tail, bound);
            }
        }

        // Two-sided deviation event at ν = |x - μ|.
        let nu = (x - mu).abs();
        let hi = (mu + nu - 1e-9).ceil() as i64;
        let lo = (mu - nu + 1e-9).floor() as i64;
        let two_sided = if hi <= lo {
            0.0
        } else {
            super::binomial::log_add(table.log_sf(hi), table.log_cdf(lo))
        };
        let bound = (2.0f64).ln() - 2.0 * nu * nu / ranges_sq;
        hoeffding.check_le(&params, two_sided, bound);

        if x >= mu && xi < n as i64 && mu < nf {
            let delta = (x / nf - p).max(0.0);
            if delta < 1.0 - p {
                let rc = log_reverse_chernoff(n, p, delta)?;
                reverse.check_ge(&params, sf, rc);
            }
        }
        if p == 0.5 {
            let delta = x / nf - 0.5;
            if (0.0..=0.1).contains(&delta) {
                inverse.check_ge(&params, sf, log_inverse_chernoff(n, delta)?);
            }
        }

        let rebuilt = super::binomial::log_add(table.log_sf(xi + 1), table.log_pmf(xi));
        let diff = if rebuilt == sf { 0.0 } else { (rebuilt - sf).abs() };
        recurrence.check_le_linear(&params, diff, 1e-12);

        if sf > f64::NEG_INFINITY {
            let lp = table.log_pmf(xi);
            if lp == f64::NEG_INFINITY {
                hazard_range.check_le_linear(&params, 1.0, 0.0);
            } else {
                hazard_range.check_le(&params, lp, sf);
            }
        }
    }

    let mut out: Vec<BoundReport> = eq.into_iter().collect();
    out.extend([hoeffding, reverse, inverse, recurrence, hazard_range]);
    if p == 0.5 && n <= 1000 {
        out.push(hazard_monotone(&table));
    }
    Ok(out)
}

/// Hazard ratio nondecreasing above the mean; an observation, not a claim.
fn hazard_monotone(table: &BinomialTable) -> BoundReport {
    let spec = table.spec();
    let n = spec.n as i64;
    let mut r = BoundReport::new(
        "hazard-monotone",
        "h(x) <= h(x+1) for x >= ceil(mu), h(x) = Pr[B = x] / Pr[B >= x]",
        format!("n = {n}, p = 1/2, x in [ceil(mu), n-1]"),
        &["n", "x"],
    )
    .exploratory();
    let h = |x: i64| table.log_pmf(x) - table.log_sf(x);
    for x in (spec.mean().ceil() as i64)..n {
        r.check_le(&[n as f64, x as f64], h(x), h(x + 1));
    }
    r
}
