//! Comfort zones and the hazard-ratio lemmas that drive the upper bound for
//! the default-node mechanism.

use serde::{Deserialize, Serialize};

use super::binomial::{log_cdf, log_sf, BinomialSpec, BinomialTable};
use super::report::BoundReport;
use crate::error::BoundsError;

/// Exponent of the `n^-5.33` threshold.
pub const ZONE_EXPONENT: f64 = 5.33;

/// `ξ_t ≥ XI_FACTOR · ln n` is the standing assumption of the zone lemmas.
pub const XI_FACTOR: f64 = 8200.0;

/// Hazard constant before the `√(ln n / ξ_t)` factor.
pub fn technical_constant(n: u64, xi_t: f64) -> f64 {
    264.0 * std::f64::consts::E * ((n as f64).ln() / xi_t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComfortZone {
    pub lower: u64,
    pub upper: u64,
}

impl ComfortZone {
    pub fn contains(&self, x: i64) -> bool {
        x >= self.lower as i64 && x <= self.upper as i64
    }

    /// Largest distance between the start of one zone and the end of the
    /// other, in either order.
    pub fn gap(&self, other: &ComfortZone) -> i64 {
        let a = other.lower as i64 - self.upper as i64;
        let b = self.lower as i64 - other.upper as i64;
        a.max(b)
    }

    /// Both `L' - U ≤ 2` and `L - U' ≤ 2`.
    pub fn almost_intersects(&self, other: &ComfortZone) -> bool {
        self.gap(other) <= 2
    }
}

fn log_threshold(n_for_threshold: u64) -> f64 {
    -ZONE_EXPONENT * (n_for_threshold as f64).ln()
}

/// Lowest `c ∈ [lo, hi]` with `pred(c)`, for a monotone predicate that holds
/// at `hi`.
pub(crate) fn lowest_true(mut lo: u64, mut hi: u64, pred: impl Fn(u64) -> bool) -> u64 {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// `L` is the highest `c` with `Pr[B < c] ≤ n^-5.33`, `U` the lowest `c` with
/// `Pr[B > c] ≤ n^-5.33`.
pub fn comfort_zone(b: &BinomialSpec, n_for_threshold: u64) -> ComfortZone {
    let thr = log_threshold(n_for_threshold);
    // Pr[B < c] ≤ thr holds at c = 0 and fails at c = n + 1.
    let first_fail = lowest_true(0, b.n + 1, |c| log_cdf(b, c as i64 - 1) > thr);
    let lower = first_fail.saturating_sub(1);
    let upper = lowest_true(0, b.n, |c| log_sf(b, c as i64 + 1) <= thr);
    ComfortZone { lower, upper }
}

fn require_xi(n: u64, p_t: f64) -> Result<BinomialSpec, BoundsError> {
    let t = BinomialSpec::new(n, p_t)?;
    let required = XI_FACTOR * (n as f64).ln();
    if t.xi() < required {
        return Err(BoundsError::XiTooSmall {
            n,
            xi_t: t.xi(),
            required,
        });
    }
    Ok(t)
}

/// Re-checks the defining inequalities of a zone against exact tails.
fn check_zone_definition(report: &mut BoundReport, b: &BinomialSpec, z: ComfortZone, n: u64, tag: f64) {
    let thr = log_threshold(n);
    let (l, u) = (z.lower as i64, z.upper as i64);
    if l > 0 {
        report.check_le(&[tag, 0.0, l as f64], log_cdf(b, l - 1), thr);
        report.check_ge(&[tag, 1.0, l as f64], log_cdf(b, l), thr);
    }
    if (u as u64) < b.n {
        report.check_le(&[tag, 2.0, u as f64], log_sf(b, u + 1), thr);
        report.check_ge(&[tag, 3.0, u as f64], log_sf(b, u), thr);
    }
}

/// Zone-width and almost-intersect lemmas for the pair `(t, k)`.
pub fn verify_zone_lemmas(n: u64, p_t: f64, p_k: f64) -> Result<Vec<BoundReport>, BoundsError> {
    let t = require_xi(n, p_t)?;
    let k = BinomialSpec::new(n, p_k)?;
    let ln_n = (n as f64).ln();
    let zt = comfort_zone(&t, n);
    let zk = comfort_zone(&k, n);
    let grid = format!("n = {n}, p_t = {p_t}, p_k = {p_k}, Z_t = [{}, {}], Z_k = [{}, {}]", zt.lower, zt.upper, zk.lower, zk.upper);

    let mut definition = BoundReport::new(
        "zone-definition",
        "Pr[B < L] <= n^-5.33 < Pr[B < L+1] and Pr[B > U] <= n^-5.33 < Pr[B > U-1] (node 0 = t, 1 = k; check 0..3)",
        grid.clone(),
        &["node", "check", "c"],
    );
    check_zone_definition(&mut definition, &t, zt, n, 0.0);
    check_zone_definition(&mut definition, &k, zk, n, 1.0);

    let width = |spec: &BinomialSpec, z: ComfortZone, id: &str| {
        let mu = spec.mean();
        let w = 4.0 * (spec.xi() * ln_n).sqrt();
        let mut r = BoundReport::new(
            id,
            "U <= mu + 4 sqrt(xi ln n) and L >= mu - 4 sqrt(xi ln n) (side 0 = U, 1 = L)",
            grid.clone(),
            &["side"],
        );
        r.check_le_linear(&[0.0], z.upper as f64, mu + w);
        r.check_le_linear(&[1.0], mu - w, z.lower as f64);
        r
    };
    let mut out = vec![definition, width(&t, zt, "zone-width-t")];
    if k.xi() >= XI_FACTOR * ln_n {
        out.push(width(&k, zk, "zone-width-k"));
    } else {
        out.push(BoundReport::skipped(
            "zone-width-k",
            "U <= mu + 4 sqrt(xi ln n) and L >= mu - 4 sqrt(xi ln n) for node k",
            grid.clone(),
            format!("xi_k = {} is below 8200 ln n = {}", k.xi(), XI_FACTOR * ln_n),
        ));
    }

    let desc = "(3/4) mu_k <= mu_t <= (4/3) mu_k and (16/25) xi_k <= xi_t <= (25/16) xi_k (check 0..3)";
    if zt.almost_intersects(&zk) {
        let mut r = BoundReport::new("almost-intersect", desc, grid.clone(), &["check"]);
        let (mt, mk, xt, xk) = (t.mean(), k.mean(), t.xi(), k.xi());
        r.check_le_linear(&[0.0], 0.75 * mk, mt);
        r.check_le_linear(&[1.0], mt, 4.0 / 3.0 * mk);
        r.check_le_linear(&[2.0], 16.0 / 25.0 * xk, xt);
        r.check_le_linear(&[3.0], xt, 25.0 / 16.0 * xk);
        out.push(r);
    } else {
        out.push(BoundReport::skipped(
            "almost-intersect",
            desc,
            grid,
            format!("zones do not almost intersect (gap {} > 2)", zt.gap(&zk)),
        ));
    }
    Ok(out)
}

/// `Pr[B_k = h - ℓ] ≤ 264e √(ln n / ξ_t) Pr[B_k > h]` for every `h ∈ Z_t`
/// with `h - 2 ∈ Z_k` and `ℓ ∈ {0, 1, 2}`.
pub fn verify_technical_lemma(n: u64, p_t: f64, p_k: f64) -> Result<BoundReport, BoundsError> {
    let t = require_xi(n, p_t)?;
    if p_k > p_t {
        return Err(BoundsError::NotMaxExpected { p_t, p_k });
    }
    let k = BinomialSpec::new(n, p_k)?;
    let zt = comfort_zone(&t, n);
    let zk = comfort_zone(&k, n);
    let c = technical_constant(n, t.xi());
    let grid = format!(
        "n = {n}, p_t = {p_t}, p_k = {p_k}, h in Z_t = [{}, {}] with h - 2 in Z_k = [{}, {}], l in {{0, 1, 2}}",
        zt.lower, zt.upper, zk.lower, zk.upper
    );
    let desc = format!("Pr[B_k = h - l] <= 264e sqrt(ln n / xi_t) Pr[B_k > h], constant = {c}");
    let lo = zt.lower.max(zk.lower + 2);
    let hi = zt.upper.min(zk.upper + 2);
    if lo > hi {
        return Ok(BoundReport::skipped(
            "technical-lemma",
            &desc,
            grid,
            "no h has h in Z_t and h - 2 in Z_k".to_string(),
        ));
    }
    let table = BinomialTable::new(k);
    let ln_c = c.ln();
    let mut r = BoundReport::new("technical-lemma", &desc, grid, &["h", "l"]);
    for h in lo as i64..=hi as i64 {
        let tail = table.log_sf(h + 1);
        for l in 0..3i64 {
            r.check_le(&[h as f64, l as f64], table.log_pmf(h - l), ln_c + tail);
        }
    }
    Ok(r)
}
