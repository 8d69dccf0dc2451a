use proptest::prelude::*;

use impartial_core::bounds::{binom_cdf, binom_sf, BinomialSpec};
use impartial_core::impartiality::check_random;
use impartial_core::mechanisms::universal_beaters;
use impartial_core::rng::trial_rng;
use impartial_core::{Mechanism, NodeId, NominationProfile, Prior};

fn profile() -> impl Strategy<Value = NominationProfile> {
    (2usize..9).prop_flat_map(|m| {
        proptest::collection::vec(any::<u64>(), m).prop_map(move |raw| {
            let masks: Vec<u64> = raw.iter().map(|r| r & ((1 << (m - 1)) - 1)).collect();
            NominationProfile::from_out_masks(m, &masks).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn degrees_count_incoming_edges(p in profile()) {
        let edges = p.edges();
        for j in 0..p.m() {
            let count = edges.iter().filter(|&&(_, t)| t == j).count();
            prop_assert_eq!(p.degree(NodeId(j)), count);
        }
        prop_assert_eq!(NominationProfile::new(p.m(), &edges).unwrap(), p.clone());
    }

    #[test]
    fn avd_beats_picks_the_unique_beater_or_the_default(p in profile(), t in 0usize..8) {
        let t = NodeId(t % p.m());
        let out = Mechanism::AvdBeats { t }.select(&p).unwrap();
        let beaters = universal_beaters(&p, t);
        prop_assert!(beaters.len() <= 1);
        prop_assert_eq!(out.winner, beaters.first().copied().unwrap_or(t));
        prop_assert!(out.winner_degree >= p.degree(t));
        prop_assert_eq!(out.gap, p.max_degree() - out.winner_degree);
    }

    #[test]
    fn own_ballot_never_changes_own_selection(p in profile(), t in 0usize..8, i in 0usize..8, ballot in any::<u64>()) {
        let m = p.m();
        let (t, i) = (NodeId(t % m), i % m);
        let mech = Mechanism::AvdBeats { t };
        let targets: Vec<NodeId> = (0..m)
            .filter(|&j| j != i && (ballot >> j) & 1 == 1)
            .map(NodeId)
            .collect();
        let q = p.with_out_edges(NodeId(i), &targets).unwrap();
        let before = mech.select(&p).unwrap().winner.0 == i;
        let after = mech.select(&q).unwrap().winner.0 == i;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn tails_are_complementary(n in 1u64..3000, p in 0.001f64..0.999, frac in 0.0f64..1.0) {
        let b = BinomialSpec::new(n, p).unwrap();
        let x = (frac * n as f64).round() as i64;
        let total = binom_sf(&b, x) + binom_cdf(&b, x - 1);
        prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
    }

    #[test]
    fn sampling_is_a_function_of_seed_and_trial(seed in any::<u64>(), trial in any::<u64>()) {
        let prior = Prior::popularity(vec![0.1, 0.5, 0.9, 0.3, 0.7]).unwrap();
        let a = prior.sample_profile(&mut trial_rng(seed, trial)).unwrap();
        let b = prior.sample_profile(&mut trial_rng(seed, trial)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn random_check_finds_no_deviation_for_avd_beats() {
    let prior = Prior::uniform(9, 0.4).unwrap();
    let mech = Mechanism::AvdBeats { t: NodeId(3) };
    let r = check_random(&mech, &prior, 300, &mut trial_rng(21, 0)).unwrap();
    assert!(r.passed());
    assert_eq!(r.profiles_checked, 300);
}

#[test]
fn random_check_catches_approval() {
    let prior = Prior::uniform(5, 0.5).unwrap();
    let r = check_random(&Mechanism::ApprovalVoting, &prior, 200, &mut trial_rng(3, 0)).unwrap();
    let ce = r.counterexample.expect("approval is manipulable");
    assert!(ce.reverify(&Mechanism::ApprovalVoting).unwrap());
}
