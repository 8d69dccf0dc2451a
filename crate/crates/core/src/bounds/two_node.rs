use serde::{Deserialize, Serialize};

use crate::error::BoundsError;
use crate::mechanisms::Mechanism;
use crate::profile::NominationProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoNodeAnalysis {
    pub p: f64,
    pub expected_max: f64,
    pub expected_winner_degree: f64,
    pub ratio: f64,
}

/// The four two-node profiles with their probabilities under edge
/// probability `p`: no edges, `0 → 1`, `1 → 0`, both.
pub fn two_node_profiles(p: f64) -> [(NominationProfile, f64); 4] {
    let q = 1.0 - p;
    let mk = |edges: &[(usize, usize)]| NominationProfile::new(2, edges).expect("valid two-node profile");
    [
        (mk(&[]), q * q),
        (mk(&[(0, 1)]), p * q),
        (mk(&[(1, 0)]), q * p),
        (mk(&[(0, 1), (1, 0)]), p * p),
    ]
}

/// Exact expectations over the two-node uniform prior.
pub fn two_node_analysis(p: f64, mech: &Mechanism) -> Result<TwoNodeAnalysis, BoundsError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BoundsError::TwoNodeP(p));
    }
    mech.validate_for(2)?;
    let mut expected_max = 0.0;
    let mut expected_winner_degree = 0.0;
    for (profile, prob) in two_node_profiles(p) {
        let out = mech.select(&profile)?;
        expected_max += prob * profile.max_degree() as f64;
        expected_winner_degree += prob * out.winner_degree as f64;
    }
    Ok(TwoNodeAnalysis {
        p,
        expected_max,
        expected_winner_degree,
        ratio: expected_max / expected_winner_degree,
    })
}
