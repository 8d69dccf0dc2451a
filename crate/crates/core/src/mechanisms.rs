//! Deterministic selection mechanisms.
//!
//! `AvdBeats` is approval voting with default in its impartial form: the
//! winner is the node that beats every other node, or the default node if
//! there is none. `AvdTie` is the naive "unique maximum else default" rule and
//! `Approval` always picks a maximum-degree node; both are kept as
//! manipulable baselines.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::MechanismError;
use crate::priors::{LazySample, Prior};
use crate::profile::{NodeId, NominationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Constant,
    AvdBeats,
    AvdTie,
    Approval,
}

impl MechanismKind {
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Constant => "constant",
            MechanismKind::AvdBeats => "avd_beats",
            MechanismKind::AvdTie => "avd_tie",
            MechanismKind::Approval => "approval",
        }
    }

    pub fn needs_default(self) -> bool {
        self != MechanismKind::Approval
    }
}

/// JSON form of a mechanism. A missing default is filled in from the prior
/// by [`MechanismConfig::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<NodeId>,
}

impl MechanismConfig {
    pub fn resolve(&self, prior: &Prior) -> Mechanism {
        let t = self.default.unwrap_or_else(|| default_node(prior));
        Mechanism::with_default(self.kind, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MechanismConfig", into = "MechanismConfig")]
pub enum Mechanism {
    Constant { t: NodeId },
    AvdBeats { t: NodeId },
    AvdTie { t: NodeId },
    ApprovalVoting,
}

impl TryFrom<MechanismConfig> for Mechanism {
    type Error = MechanismError;

    fn try_from(cfg: MechanismConfig) -> Result<Self, Self::Error> {
        match (cfg.kind, cfg.default) {
            (MechanismKind::Approval, _) => Ok(Mechanism::ApprovalVoting),
            (kind, Some(t)) => Ok(Mechanism::with_default(kind, t)),
            (kind, None) => Err(MechanismError::MissingDefault(kind.name())),
        }
    }
}

impl From<Mechanism> for MechanismConfig {
    fn from(m: Mechanism) -> Self {
        MechanismConfig {
            kind: m.kind(),
            default: m.default_node(),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.default_node() {
            Some(t) => write!(f, "{}(t={})", self.kind().name(), t),
            None => f.write_str(self.kind().name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub winner: NodeId,
    pub winner_degree: usize,
    pub gap: usize,
    /// The winner is the default node reached by fallback rather than by
    /// winning the comparison outright.
    pub via_default: bool,
}

/// Node of maximum expected in-degree, ties to the lowest index.
pub fn default_node(prior: &Prior) -> NodeId {
    let e = prior.expected_in_degrees();
    let mut best = 0;
    for (j, &v) in e.iter().enumerate() {
        if v > e[best] {
            best = j;
        }
    }
    NodeId(best)
}

/// Every node that beats all other nodes, by direct enumeration of the
/// beats relation. At most one exists; this is used to check that.
pub fn universal_beaters(p: &NominationProfile, t: NodeId) -> Vec<NodeId> {
    let m = p.m();
    (0..m)
        .filter(|&k| (0..m).all(|j| j == k || p.beats_unchecked(k, j, t.0)))
        .map(NodeId)
        .collect()
}

impl Mechanism {
    pub fn with_default(kind: MechanismKind, t: NodeId) -> Self {
        match kind {
            MechanismKind::Constant => Mechanism::Constant { t },
            MechanismKind::AvdBeats => Mechanism::AvdBeats { t },
            MechanismKind::AvdTie => Mechanism::AvdTie { t },
            MechanismKind::Approval => Mechanism::ApprovalVoting,
        }
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::Constant { .. } => MechanismKind::Constant,
            Mechanism::AvdBeats { .. } => MechanismKind::AvdBeats,
            Mechanism::AvdTie { .. } => MechanismKind::AvdTie,
            Mechanism::ApprovalVoting => MechanismKind::Approval,
        }
    }

    pub fn default_node(&self) -> Option<NodeId> {
        match *self {
            Mechanism::Constant { t } | Mechanism::AvdBeats { t } | Mechanism::AvdTie { t } => {
                Some(t)
            }
            Mechanism::ApprovalVoting => None,
        }
    }

    pub fn validate_for(&self, m: usize) -> Result<(), MechanismError> {
        match self.default_node() {
            Some(t) if t.0 >= m => Err(MechanismError::InvalidDefault { default: t, m }),
            _ => Ok(()),
        }
    }

    pub fn select(&self, p: &NominationProfile) -> Result<SelectionOutcome, MechanismError> {
        self.validate_for(p.m())?;
        let delta = p.max_degree();
        let (winner, via_default) = match *self {
            Mechanism::Constant { t } => (t, true),
            Mechanism::AvdBeats { t } => match find_universal_beater(p, t.0, delta) {
                Some(w) => (NodeId(w), false),
                None => (t, true),
            },
            Mechanism::AvdTie { t } => {
                let mut top = (0..p.m()).filter(|&j| p.degree(NodeId(j)) == delta);
                let first = top.next().expect("nonempty profile");
                if top.next().is_none() {
                    (NodeId(first), false)
                } else {
                    (t, true)
                }
            }
            Mechanism::ApprovalVoting => {
                let first = (0..p.m())
                    .find(|&j| p.degree(NodeId(j)) == delta)
                    .expect("nonempty profile");
                (NodeId(first), false)
            }
        };
        let winner_degree = p.degree(winner);
        Ok(SelectionOutcome {
            winner,
            winner_degree,
            gap: delta - winner_degree,
            via_default,
        })
    }

    /// Selection on a lazily revealed sample; identical in law to sampling
    /// the whole profile and calling [`select`](Self::select).
    ///
    /// Only `AvdBeats` ever reveals edges. A node whose total is at most
    /// `Δ - 2` can beat nobody of degree `Δ`, so only nodes with total at
    /// least `Δ - 1` and the default are tried, and a comparison is decided
    /// from totals alone whenever the gap exceeds what excluding two voters
    /// can change.
    pub fn select_lazy<R: RngCore + ?Sized>(
        &self,
        s: &mut LazySample,
        rng: &mut R,
    ) -> Result<SelectionOutcome, MechanismError> {
        let m = s.m();
        self.validate_for(m)?;
        let delta = s.totals().iter().copied().max().unwrap_or(0) as usize;
        let (winner, via_default) = match *self {
            Mechanism::Constant { t } => (t, true),
            Mechanism::AvdBeats { t } => match lazy_universal_beater(s, t.0, delta, rng) {
                Some(w) => (NodeId(w), false),
                None => (t, true),
            },
            Mechanism::AvdTie { t } => {
                let count = s.totals().iter().filter(|&&d| d as usize == delta).count();
                if count == 1 {
                    let w = s.totals().iter().position(|&d| d as usize == delta).unwrap();
                    (NodeId(w), false)
                } else {
                    (t, true)
                }
            }
            Mechanism::ApprovalVoting => {
                let w = s.totals().iter().position(|&d| d as usize == delta).unwrap();
                (NodeId(w), false)
            }
        };
        let winner_degree = s.total(winner.0);
        Ok(SelectionOutcome {
            winner,
            winner_degree,
            gap: delta - winner_degree,
            via_default,
        })
    }
}

/// Exact search for the universal beater. Each candidate is first compared
/// with a maximum-degree node, which rejects most losers after one test.
fn find_universal_beater(p: &NominationProfile, t: usize, delta: usize) -> Option<usize> {
    let m = p.m();
    if m == 1 {
        return Some(0);
    }
    let top = (0..m).find(|&j| p.degree(NodeId(j)) == delta).unwrap();
    (0..m).find(|&k| {
        if k != top && !p.beats_unchecked(k, top, t) {
            return false;
        }
        (0..m).all(|j| j == k || j == top || p.beats_unchecked(k, j, t))
    })
}

fn reveal<R: RngCore + ?Sized>(s: &mut LazySample, i: usize, j: usize, rng: &mut R) -> usize {
    s.reveal_edge(NodeId(i), NodeId(j), rng)
        .expect("distinct in-range nodes") as usize
}

fn lazy_beats<R: RngCore + ?Sized>(
    s: &mut LazySample,
    k: usize,
    j: usize,
    t: usize,
    rng: &mut R,
) -> bool {
    let diff = s.total(k) as i64 - s.total(j) as i64;
    if k != t && j != t {
        // Each side loses at most two votes (from the other one and from t).
        if diff >= 3 {
            return true;
        }
        if diff <= -2 {
            return false;
        }
        let dk = s.total(k) - reveal(s, j, k, rng) - reveal(s, t, k, rng);
        let dj = s.total(j) - reveal(s, k, j, rng) - reveal(s, t, j, rng);
        dk > dj
    } else {
        // One side is the default: only the mutual votes are excluded.
        if diff >= 2 {
            return true;
        }
        if diff <= -1 {
            return false;
        }
        let dk = s.total(k) - reveal(s, j, k, rng);
        let dj = s.total(j) - reveal(s, k, j, rng);
        dk > dj
    }
}

fn lazy_universal_beater<R: RngCore + ?Sized>(
    s: &mut LazySample,
    t: usize,
    delta: usize,
    rng: &mut R,
) -> Option<usize> {
    let m = s.m();
    if m == 1 {
        return Some(0);
    }
    let candidates: Vec<usize> = (0..m)
        .filter(|&k| k == t || s.total(k) + 1 >= delta)
        .collect();
    candidates
        .into_iter()
        .find(|&k| (0..m).all(|j| j == k || lazy_beats(s, k, j, t, rng)))
}
