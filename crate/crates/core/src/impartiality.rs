//! Impartiality checking: exhaustive over every profile for small `m`,
//! randomized deviation search above that.
//!
//! A mechanism `f` is impartial when no voter can change whether it wins by
//! changing its own ballot: for every profile `x`, voter `i` and alternative
//! ballot `x'_i`, `f(x) = i` iff `f(x_{-i}, x'_i) = i`. Other nodes may
//! gain or lose the win freely.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CheckError, MechanismError};
use crate::mechanisms::{universal_beaters, Mechanism, MechanismKind};
use crate::priors::Prior;
use crate::profile::{NodeId, NominationProfile};

/// Largest `m` for exhaustive enumeration.
pub const MAX_EXHAUSTIVE_M: usize = 5;

/// Uniformly random alternative ballots tried per voter in random mode, on
/// top of the empty, full and single-flip ballots.
pub const RANDOM_DEVIATIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub profile: NominationProfile,
    pub deviator: NodeId,
    pub alternative_out_edges: Vec<NodeId>,
    pub winner_before: NodeId,
    pub winner_after: NodeId,
}

impl Counterexample {
    /// The profile after the deviation.
    pub fn deviated_profile(&self) -> NominationProfile {
        self.profile
            .with_out_edges(self.deviator, &self.alternative_out_edges)
            .expect("counterexample ballots are valid")
    }

    /// Re-runs the mechanism on both profiles and confirms the recorded
    /// winners and the deviator's change of status.
    pub fn reverify(&self, mech: &Mechanism) -> Result<bool, MechanismError> {
        let before = mech.select(&self.profile)?.winner;
        let after = mech.select(&self.deviated_profile())?.winner;
        Ok(before == self.winner_before
            && after == self.winner_after
            && (before == self.deviator) != (after == self.deviator))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub profiles_checked: u64,
    pub deviations_checked: u64,
    pub counterexample: Option<Counterexample>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Ballot masks in the order they are tried: empty, full, then ascending.
fn deviation_order(m: usize) -> Vec<u64> {
    let full = (1u64 << (m - 1)) - 1;
    let mut order = vec![0, full];
    order.extend(1..full);
    order.dedup();
    order
}

fn profile_masks(index: u64, m: usize) -> Vec<u64> {
    let width = m - 1;
    let low = (1u64 << width) - 1;
    (0..m).map(|i| (index >> (i * width)) & low).collect()
}

fn out_targets(p: &NominationProfile, i: usize) -> Vec<NodeId> {
    p.out_edges(NodeId(i))
}

/// First violation at this profile, trying voters in order and ballots in
/// [`deviation_order`].
fn violation_at(
    mech: &Mechanism,
    p: &mut NominationProfile,
    order: &[u64],
) -> Result<Option<Counterexample>, MechanismError> {
    let m = p.m();
    let before = mech.select(p)?.winner;
    for i in 0..m {
        let own = p.out_mask(i);
        for &dev in order {
            if dev == own {
                continue;
            }
            p.replace_out_mask(i, dev);
            let after = mech.select(p)?.winner;
            let alternative = out_targets(p, i);
            p.replace_out_mask(i, own);
            if (before.0 == i) != (after.0 == i) {
                return Ok(Some(Counterexample {
                    profile: p.clone(),
                    deviator: NodeId(i),
                    alternative_out_edges: alternative,
                    winner_before: before,
                    winner_after: after,
                }));
            }
        }
    }
    Ok(None)
}

/// Checks every profile on `m` nodes against every unilateral deviation.
/// The reported counterexample is the one with the lowest profile index.
pub fn check_exhaustive(mech: &Mechanism, m: usize) -> Result<CheckReport, CheckError> {
    if m == 0 || m > MAX_EXHAUSTIVE_M {
        return Err(CheckError::TooLarge {
            m,
            max: MAX_EXHAUSTIVE_M,
        });
    }
    mech.validate_for(m)?;
    let total = 1u64 << ((m - 1) * m);
    let ballots = 1u64 << (m - 1);
    let order = deviation_order(m);
    let found = (0..total as usize).into_par_iter().find_map_first(|idx| {
        let mut p = NominationProfile::from_out_masks(m, &profile_masks(idx as u64, m))
            .expect("masks below 2^(m-1) are valid ballots");
        violation_at(mech, &mut p, &order)
            .expect("default validated above")
            .map(|c| (idx as u64, c))
    });
    Ok(match found {
        None => CheckReport {
            verdict: Verdict::Pass,
            profiles_checked: total,
            deviations_checked: total * m as u64 * ballots,
            counterexample: None,
        },
        Some((idx, c)) => CheckReport {
            verdict: Verdict::Fail,
            profiles_checked: idx + 1,
            deviations_checked: (idx + 1) * m as u64 * ballots,
            counterexample: Some(c),
        },
    })
}

/// Samples profiles from `prior` and tries, for every voter, the empty and
/// full ballots, every single-edge flip and a few random ballots.
pub fn check_random<R: Rng + ?Sized>(
    mech: &Mechanism,
    prior: &Prior,
    trials: u64,
    rng: &mut R,
) -> Result<CheckReport, CheckError> {
    let m = prior.m();
    mech.validate_for(m)?;
    let mut deviations = 0u64;
    for trial in 0..trials {
        let p = prior.sample_profile(rng)?;
        let before = mech.select(&p)?.winner;
        for i in 0..m {
            let others: Vec<NodeId> = (0..m).filter(|&j| j != i).map(NodeId).collect();
            let own = p.out_edges(NodeId(i));
            let mut ballots: Vec<Vec<NodeId>> = vec![Vec::new(), others.clone()];
            for &j in &others {
                let mut b = own.clone();
                match b.iter().position(|&x| x == j) {
                    Some(pos) => {
                        b.remove(pos);
                    }
                    None => {
                        b.push(j);
                        b.sort_unstable();
                    }
                }
                ballots.push(b);
            }
            for _ in 0..RANDOM_DEVIATIONS {
                ballots.push(others.iter().copied().filter(|_| rng.random_bool(0.5)).collect());
            }
            for ballot in ballots {
                deviations += 1;
                let q = p
                    .with_out_edges(NodeId(i), &ballot)
                    .expect("ballots exclude the voter");
                let after = mech.select(&q)?.winner;
                if (before.0 == i) != (after.0 == i) {
                    return Ok(CheckReport {
                        verdict: Verdict::Fail,
                        profiles_checked: trial + 1,
                        deviations_checked: deviations,
                        counterexample: Some(Counterexample {
                            profile: p,
                            deviator: NodeId(i),
                            alternative_out_edges: ballot,
                            winner_before: before,
                            winner_after: after,
                        }),
                    });
                }
            }
        }
    }
    Ok(CheckReport {
        verdict: Verdict::Pass,
        profiles_checked: trials,
        deviations_checked: deviations,
        counterexample: None,
    })
}

/// Structural properties of the beats relation and of `AvdBeats`, checked on
/// every profile and every choice of default node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub m: usize,
    pub profiles_checked: u64,
    /// Violation count per property; every property appears, with zero when
    /// it held everywhere.
    pub violations: BTreeMap<String, u64>,
    /// Lowest-index failing profile per violated property, with its default.
    pub witnesses: BTreeMap<String, (NominationProfile, NodeId)>,
}

impl StructureReport {
    pub fn holds(&self) -> bool {
        self.violations.values().all(|&v| v == 0)
    }
}

pub const STRUCTURE_PROPERTIES: [&str; 7] = [
    "beats-antisymmetry",
    "winner-uniqueness",
    "select-agrees",
    "winner-degree-floor",
    "structural-a",
    "structural-b",
    "structural-c",
];

/// Names of the properties violated at one profile with default `t`.
fn structure_violations(p: &NominationProfile, t: usize) -> Vec<&'static str> {
    let m = p.m();
    let mut bad = Vec::new();
    let degree = |j: usize| p.degree(NodeId(j));
    let delta = p.max_degree();

    let antisymmetric = (0..m).all(|k| {
        (k + 1..m).all(|j| !(p.beats_unchecked(k, j, t) && p.beats_unchecked(j, k, t)))
    });
    if !antisymmetric {
        bad.push("beats-antisymmetry");
    }
    let beaters = universal_beaters(p, NodeId(t));
    if beaters.len() > 1 {
        bad.push("winner-uniqueness");
    }
    let out = Mechanism::AvdBeats { t: NodeId(t) }
        .select(p)
        .expect("t < m");
    let expected = beaters.first().copied().unwrap_or(NodeId(t));
    if out.winner != expected || out.via_default != beaters.is_empty() {
        bad.push("select-agrees");
    }
    if out.winner_degree < degree(t) {
        bad.push("winner-degree-floor");
    }
    if !beaters.is_empty() && out.winner_degree + 1 < delta {
        bad.push("structural-a");
    }
    if beaters.is_empty() {
        let top_beating_t: Vec<usize> = (0..m)
            .filter(|&i| i != t && degree(i) == delta && p.beats_unchecked(i, t, t))
            .collect();
        if top_beating_t.is_empty() && degree(t) + 1 < delta {
            bad.push("structural-b");
        }
        let c_holds = top_beating_t
            .iter()
            .all(|&i| (0..m).any(|j| j != i && j != t && degree(j) + 2 >= delta));
        if !c_holds {
            bad.push("structural-c");
        }
    }
    bad
}

/// Enumerates every profile on `m` nodes and every default node.
pub fn check_structure(m: usize) -> Result<StructureReport, CheckError> {
    if m == 0 || m > MAX_EXHAUSTIVE_M {
        return Err(CheckError::TooLarge {
            m,
            max: MAX_EXHAUSTIVE_M,
        });
    }
    let total = 1u64 << ((m - 1) * m);
    type Acc = (BTreeMap<String, u64>, BTreeMap<String, (u64, NominationProfile, NodeId)>);
    let empty = || -> Acc {
        (
            STRUCTURE_PROPERTIES.iter().map(|s| (s.to_string(), 0)).collect(),
            BTreeMap::new(),
        )
    };
    let (violations, witnesses) = (0..total as usize)
        .into_par_iter()
        .fold(empty, |mut acc, idx| {
            let p = NominationProfile::from_out_masks(m, &profile_masks(idx as u64, m))
                .expect("valid masks");
            for t in 0..m {
                for name in structure_violations(&p, t) {
                    *acc.0.get_mut(name).expect("known property") += 1;
                    acc.1
                        .entry(name.to_string())
                        .or_insert_with(|| (idx as u64, p.clone(), NodeId(t)));
                }
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (k, v) in b.0 {
                *a.0.get_mut(&k).expect("known property") += v;
            }
            for (k, w) in b.1 {
                match a.1.get(&k) {
                    Some(existing) if existing.0 <= w.0 => {}
                    _ => {
                        a.1.insert(k, w);
                    }
                }
            }
            a
        });
    Ok(StructureReport {
        m,
        profiles_checked: total,
        violations,
        witnesses: witnesses
            .into_iter()
            .map(|(k, (_, p, t))| (k, (p, t)))
            .collect(),
    })
}

/// One mechanism per possible default node (a single one for approval).
pub fn all_defaults(kind: MechanismKind, m: usize) -> Vec<Mechanism> {
    if kind.needs_default() {
        (0..m).map(|t| Mechanism::with_default(kind, NodeId(t))).collect()
    } else {
        vec![Mechanism::with_default(kind, NodeId(0))]
    }
}
