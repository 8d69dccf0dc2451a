//! Log-space binomial probabilities.
//!
//! The point mass uses Loader's saddle-point form
//!
//! ```text
//! log C(n,x) p^x q^(n-x) = stirlerr(n) - stirlerr(x) - stirlerr(n-x)
//!     - bd0(x, np) - bd0(n-x, nq) - ½ log(2π x (n-x)/n)
//! ```
//!
//! which keeps close to full relative precision in the pmf even where the pmf
//! itself is far below the smallest normal double. Tails are sums of these terms, accumulated
//! from the smallest term towards the largest.

use serde::{Deserialize, Serialize};

use crate::error::BoundsError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Terms this far (in log units) below the first term of a tail sum are
/// dropped; the pmf is log-concave, so the remainder is smaller still.
const TAIL_CUTOFF: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialSpec {
    pub n: u64,
    pub p: f64,
}

impl BinomialSpec {
    pub fn new(n: u64, p: f64) -> Result<Self, BoundsError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(BoundsError::BadProbability(p));
        }
        Ok(Self { n, p })
    }

    /// `μ = np`.
    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }

    /// `ξ = min{μ, n - μ}`.
    pub fn xi(&self) -> f64 {
        let mu = self.mean();
        mu.min(self.n as f64 - mu)
    }

    /// Largest point of the pmf, `⌊(n+1)p⌋` clamped to `n`.
    pub fn mode(&self) -> u64 {
        (((self.n + 1) as f64 * self.p).floor() as u64).min(self.n)
    }
}

/// `log(n!) - log(√(2πn) (n/e)^n)`, the error of Stirling's formula.
pub(crate) fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        if n == 0 {
            // log(0!) - log(√0 ...) is +∞ in the limit; callers never reach it.
            return 0.0;
        }
        let nf = n as f64;
        let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
        return ln_fact - (nf + 0.5) * nf.ln() + nf - HALF_LN_2PI;
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x log(x/np) + np - x`, accurate when `x ≈ np`.
pub(crate) fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `log Pr[B = x]` for `x ∈ [0, n]`, with `-∞` for impossible outcomes.
pub(crate) fn log_pmf_unchecked(n: u64, p: f64, x: u64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < q { nf * (-p).ln_1p() } else { nf * q.ln() };
    }
    if x == n {
        return if q < p { nf * (-q).ln_1p() } else { nf * p.ln() };
    }
    let xf = x as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = LN_2PI + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `log(e^a + e^b)`.
#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 - e^a)` for `a ≤ 0`.
#[inline]
pub(crate) fn log1m_exp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// Sum of `exp(lp(y))` over `ys` (ordered away from the mode), in log
/// space, adding from the far end so small terms are not swamped.
fn log_sum_away_from_mode(b: &BinomialSpec, ys: impl Iterator<Item = u64>) -> f64 {
    let mut terms = Vec::new();
    let mut first = None;
    for y in ys {
        let lp = log_pmf_unchecked(b.n, b.p, y);
        let head = *first.get_or_insert(lp);
        if lp < head - TAIL_CUTOFF || lp == f64::NEG_INFINITY {
            break;
        }
        terms.push(lp);
    }
    terms
        .iter()
        .rev()
        .fold(f64::NEG_INFINITY, |acc, &lp| log_add(acc, lp))
}

/// `log Pr[B ≥ x]`, with the clamps `x ≤ 0 → 0` and `x > n → -∞`.
pub fn log_sf(b: &BinomialSpec, x: i64) -> f64 {
    if x <= 0 {
        return 0.0;
    }
    let x = x as u64;
    if x > b.n {
        return f64::NEG_INFINITY;
    }
    if x > b.mode() {
        log_sum_away_from_mode(b, x..=b.n)
    } else {
        log1m_exp(log_cdf(b, x as i64 - 1))
    }
}

/// `log Pr[B ≤ x]`, with the clamps `x < 0 → -∞` and `x ≥ n → 0`.
pub fn log_cdf(b: &BinomialSpec, x: i64) -> f64 {
    if x < 0 {
        return f64::NEG_INFINITY;
    }
    let x = x as u64;
    if x >= b.n {
        return 0.0;
    }
    if x < b.mode() {
        log_sum_away_from_mode(b, (0..=x).rev())
    } else {
        log1m_exp(log_sf(b, x as i64 + 1))
    }
}

/// Natural log of `Pr[B = x]`.
pub fn binom_pmf_log(b: &BinomialSpec, x: i64) -> Result<f64, BoundsError> {
    if x < 0 || x as u64 > b.n {
        return Err(BoundsError::OutOfRange { x, n: b.n });
    }
    Ok(log_pmf_unchecked(b.n, b.p, x as u64))
}

/// `Pr[B ≥ x]`.
pub fn binom_sf(b: &BinomialSpec, x: i64) -> f64 {
    log_sf(b, x).exp()
}

/// `Pr[B ≤ x]`.
pub fn binom_cdf(b: &BinomialSpec, x: i64) -> f64 {
    log_cdf(b, x).exp()
}

/// `Pr[B = x] / Pr[B ≥ x]`.
pub fn hazard_ratio(b: &BinomialSpec, x: i64) -> Result<f64, BoundsError> {
    let lp = binom_pmf_log(b, x)?;
    let ls = log_sf(b, x);
    if ls == f64::NEG_INFINITY {
        return Err(BoundsError::ZeroTail { x: x as u64 });
    }
    Ok((lp - ls).exp())
}

/// Every point mass and both tails of one binomial law, for sweeping
/// inequalities over the whole support.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    spec: BinomialSpec,
    log_pmf: Vec<f64>,
    /// `log Pr[B ≥ x]` for `x ∈ [0, n + 1]`.
    log_sf: Vec<f64>,
    /// `log Pr[B ≤ x]` for `x ∈ [0, n]`.
    log_cdf: Vec<f64>,
}

impl BinomialTable {
    pub fn new(spec: BinomialSpec) -> Self {
        let n = spec.n as usize;
        let log_pmf: Vec<f64> = (0..=spec.n)
            .map(|x| log_pmf_unchecked(spec.n, spec.p, x))
            .collect();
        let mode = spec.mode() as usize;

        // Upper tail summed from x = n down: smallest terms first for x > mode.
        let mut upper = vec![f64::NEG_INFINITY; n + 2];
        for x in (0..=n).rev() {
            upper[x] = log_add(upper[x + 1], log_pmf[x]);
        }
        let mut lower = vec![f64::NEG_INFINITY; n + 1];
        let mut acc = f64::NEG_INFINITY;
        for x in 0..=n {
            acc = log_add(acc, log_pmf[x]);
            lower[x] = acc;
        }
        // Each tail is taken from its own accumulation on its side of the
        // mode and from the complement of the other one across it.
        let mut log_sf = upper.clone();
        for x in 1..=mode {
            log_sf[x] = log1m_exp(lower[x - 1]);
        }
        log_sf[0] = 0.0;
        let mut log_cdf = lower;
        for x in mode..n {
            log_cdf[x] = log1m_exp(upper[x + 1]);
        }
        log_cdf[n] = 0.0;
        Self {
            spec,
            log_pmf,
            log_sf,
            log_cdf,
        }
    }

    pub fn spec(&self) -> BinomialSpec {
        self.spec
    }

    pub fn n(&self) -> u64 {
        self.spec.n
    }

    pub fn log_pmf(&self, x: i64) -> f64 {
        if x < 0 || x as u64 > self.spec.n {
            f64::NEG_INFINITY
        } else {
            self.log_pmf[x as usize]
        }
    }

    pub fn pmf(&self, x: i64) -> f64 {
        self.log_pmf(x).exp()
    }

    /// `log Pr[B ≥ x]`.
    pub fn log_sf(&self, x: i64) -> f64 {
        if x <= 0 {
            0.0
        } else if x as u64 > self.spec.n {
            f64::NEG_INFINITY
        } else {
            self.log_sf[x as usize]
        }
    }

    pub fn sf(&self, x: i64) -> f64 {
        self.log_sf(x).exp()
    }

    /// `log Pr[B ≤ x]`.
    pub fn log_cdf(&self, x: i64) -> f64 {
        if x < 0 {
            f64::NEG_INFINITY
        } else if x as u64 >= self.spec.n {
            0.0
        } else {
            self.log_cdf[x as usize]
        }
    }

    pub fn cdf(&self, x: i64) -> f64 {
        self.log_cdf(x).exp()
    }
}
