//! Exact binomial machinery and numeric verification of the tail, zone and
//! threshold inequalities behind the mechanism analysis.

pub mod binomial;
pub mod lower;
pub mod report;
pub mod tails;
pub mod two_node;
pub mod zones;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use binomial::{
    binom_cdf, binom_pmf_log, binom_sf, hazard_ratio, BinomialSpec, BinomialTable,
};
pub use lower::{
    event_d_lower_bound, event_d_target, lb_thresholds, verify_event_d, verify_section5_lemmas,
    LbThresholds,
};
pub use report::{BoundReport, CheckedPoint, SuiteReport};
pub use tails::{
    chernoff_bounds, hoeffding_bound, inverse_chernoff, reverse_chernoff, verify_tails,
    ChernoffBounds,
};
pub use two_node::{two_node_analysis, TwoNodeAnalysis};
pub use zones::{comfort_zone, verify_technical_lemma, verify_zone_lemmas, ComfortZone};

use crate::error::BoundsError;
use crate::mechanisms::{Mechanism, MechanismKind};
use crate::profile::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Tails,
    Zones,
    Technical,
    Section5,
    EventD,
    TwoNode,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Tails => "tails",
            Suite::Zones => "zones",
            Suite::Technical => "technical",
            Suite::Section5 => "section5",
            Suite::EventD => "event-d",
            Suite::TwoNode => "two-node",
        }
    }

    /// Probabilities used when none are given.
    pub fn default_ps(self) -> Vec<f64> {
        match self {
            Suite::Tails => vec![0.1, 0.2, 0.5, 0.8],
            Suite::TwoNode => vec![0.1, 0.01, 0.001],
            _ => vec![0.5],
        }
    }
}

/// Runs one suite. `ps` lists the success probabilities for `tails` and
/// `two-node`, and `[p_t]` or `[p_t, p_k]` for `zones` and `technical`.
pub fn run_suite(suite: Suite, n: u64, ps: &[f64]) -> Result<SuiteReport, BoundsError> {
    let ps = if ps.is_empty() {
        suite.default_ps()
    } else {
        ps.to_vec()
    };
    let pair = || (ps[0], *ps.get(1).unwrap_or(&ps[0]));
    let reports = match suite {
        Suite::Tails => {
            let mut out = Vec::new();
            for &p in &ps {
                out.extend(verify_tails(n, p)?);
            }
            out
        }
        Suite::Zones => {
            let (pt, pk) = pair();
            verify_zone_lemmas(n, pt, pk)?
        }
        Suite::Technical => {
            let (pt, pk) = pair();
            vec![verify_technical_lemma(n, pt, pk)?]
        }
        Suite::Section5 => verify_section5_lemmas(n)?,
        Suite::EventD => vec![verify_event_d(n)?],
        Suite::TwoNode => verify_two_node(&ps)?,
    };
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        config: json!({ "suite": suite.name(), "n": n, "p": ps }),
        reports,
    })
}

/// Impartial rules on two nodes reach at most `p`, while the expected
/// maximum is `2p - p²`.
fn verify_two_node(ps: &[f64]) -> Result<Vec<BoundReport>, BoundsError> {
    let grid = format!("p in {ps:?}, mechanisms AvdBeats(t = 0) and Constant(t = 0)");
    let mut winner = BoundReport::new(
        "two-node-winner",
        "E[d_w] <= p for impartial mechanisms (mechanism 0 = AvdBeats, 1 = Constant)",
        grid.clone(),
        &["p", "mechanism"],
    );
    let mut max = BoundReport::new(
        "two-node-max",
        "|E[max degree] - (2p - p^2)| <= 1e-15",
        grid,
        &["p", "mechanism"],
    );
    for &p in ps {
        for (i, kind) in [MechanismKind::AvdBeats, MechanismKind::Constant].into_iter().enumerate() {
            let a = two_node_analysis(p, &Mechanism::with_default(kind, NodeId(0)))?;
            winner.check_le_linear(&[p, i as f64], a.expected_winner_degree, p);
            max.check_le_linear(&[p, i as f64], (a.expected_max - (2.0 * p - p * p)).abs(), 1e-15);
        }
    }
    Ok(vec![winner, max])
}
