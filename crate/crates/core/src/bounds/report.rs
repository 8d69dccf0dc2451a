use serde::{Deserialize, Serialize};

/// Relative slack, in log units, allowed before a point counts as a
/// violation. Covers rounding in the log-space sums, nothing more.
pub const LOG_TOL: f64 = 1e-9;

/// Points kept verbatim in a report; larger grids keep violations and the
/// tightest point only.
pub const POINT_LOG_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedPoint {
    pub params: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `log(rhs) - log(lhs)` for a claim `lhs ≤ rhs`; negative means violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality: String,
    pub description: String,
    pub grid: String,
    pub param_names: Vec<String>,
    /// Not a claim of the source analysis; never fails a suite.
    pub exploratory: bool,
    pub points_checked: u64,
    pub violations: Vec<CheckedPoint>,
    pub tightest: Option<CheckedPoint>,
    pub points: Vec<CheckedPoint>,
    pub points_truncated: bool,
    pub skipped: Option<String>,
}

impl BoundReport {
    pub fn new(inequality: &str, description: &str, grid: String, param_names: &[&str]) -> Self {
        Self {
            inequality: inequality.to_string(),
            description: description.to_string(),
            grid,
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            exploratory: false,
            points_checked: 0,
            violations: Vec::new(),
            tightest: None,
            points: Vec::new(),
            points_truncated: false,
            skipped: None,
        }
    }

    pub fn exploratory(mut self) -> Self {
        self.exploratory = true;
        self
    }

    pub fn skipped(inequality: &str, description: &str, grid: String, reason: String) -> Self {
        let mut r = Self::new(inequality, description, grid, &[]);
        r.skipped = Some(reason);
        r
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }

    /// Records the claim `exp(log_lhs) ≤ exp(log_rhs)`.
    pub fn check_le(&mut self, params: &[f64], log_lhs: f64, log_rhs: f64) {
        let margin = log_margin(log_lhs, log_rhs);
        let tol = LOG_TOL * log_rhs.abs().max(1.0);
        self.record(params, log_lhs.exp(), log_rhs.exp(), margin, tol);
    }

    /// Records the claim `exp(log_lhs) ≥ exp(log_rhs)`.
    pub fn check_ge(&mut self, params: &[f64], log_lhs: f64, log_rhs: f64) {
        let margin = log_margin(log_rhs, log_lhs);
        let tol = LOG_TOL * log_lhs.abs().max(1.0);
        self.record(params, log_lhs.exp(), log_rhs.exp(), margin, tol);
    }

    fn record(&mut self, params: &[f64], lhs: f64, rhs: f64, margin: f64, tol: f64) {
        self.points_checked += 1;
        let violated = margin < -tol || margin.is_nan();
        let worse = self.tightest.as_ref().is_none_or(|t| margin < t.margin);
        let keep = self.points.len() < POINT_LOG_CAP;
        if !keep {
            self.points_truncated = true;
        }
        if !(violated || worse || keep) {
            return;
        }
        let point = CheckedPoint {
            params: params.to_vec(),
            lhs,
            rhs,
            margin,
        };
        if violated {
            self.violations.push(point.clone());
        }
        if worse {
            self.tightest = Some(point.clone());
        }
        if keep {
            self.points.push(point);
        }
    }

    /// Records a plain claim `lhs ≤ rhs` between ordinary reals.
    pub fn check_le_linear(&mut self, params: &[f64], lhs: f64, rhs: f64) {
        let tol = LOG_TOL * rhs.abs().max(1.0);
        self.record(params, lhs, rhs, rhs - lhs, tol);
    }

    /// Folds a report over a disjoint slice of the same grid into this one.
    pub fn merge(&mut self, other: BoundReport) {
        self.points_checked += other.points_checked;
        self.violations.extend(other.violations);
        if let Some(t) = other.tightest {
            if self.tightest.as_ref().is_none_or(|s| t.margin < s.margin) {
                self.tightest = Some(t);
            }
        }
        let room = POINT_LOG_CAP.saturating_sub(self.points.len());
        if other.points.len() > room || other.points_truncated {
            self.points_truncated = true;
        }
        self.points.extend(other.points.into_iter().take(room));
    }
}

/// `log(large) - log(small)`, with `+∞` when `small` is an impossible event.
fn log_margin(log_small: f64, log_large: f64) -> f64 {
    if log_small == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        log_large - log_small
    }
}

/// All reports produced by one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: serde_json::Value,
    pub reports: Vec<BoundReport>,
}

impl SuiteReport {
    /// Every non-exploratory inequality held where it was checked.
    pub fn passed(&self) -> bool {
        self.reports
            .iter()
            .filter(|r| !r.exploratory)
            .all(BoundReport::holds)
    }

    pub fn report(&self, inequality: &str) -> Option<&BoundReport> {
        self.reports.iter().find(|r| r.inequality == inequality)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn le_and_ge_record_margins() {
        let mut r = BoundReport::new("t", "d", "g".into(), &["x"]);
        r.check_le(&[1.0], 0.5f64.ln(), 1.0f64.ln());
        r.check_ge(&[2.0], 0.5f64.ln(), 0.25f64.ln());
        assert!(r.holds());
        assert_eq!(r.points_checked, 2);
        assert!((r.points[1].lhs - 0.5).abs() < 1e-15);
        assert!((r.points[1].rhs - 0.25).abs() < 1e-15);
        r.check_le(&[3.0], 0.0, -1.0);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.tightest.as_ref().unwrap().params, vec![3.0]);
    }

    #[test]
    fn equality_is_not_a_violation() {
        let mut r = BoundReport::new("t", "d", "g".into(), &[]);
        r.check_le(&[], -700.25, -700.25);
        r.check_le(&[], f64::NEG_INFINITY, f64::NEG_INFINITY);
        assert!(r.holds());
    }
}
