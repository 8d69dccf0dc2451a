//! Deterministic impartial selection with prior information.
//!
//! Nomination profiles, prior families and their samplers, the constant and
//! approval-voting-with-default mechanisms, an impartiality checker, exact
//! binomial tail machinery with the inequalities the analysis relies on, and
//! a seeded Monte Carlo harness for additive approximation.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod impartiality;
pub mod mechanisms;
pub mod priors;
pub mod profile;
pub mod rng;

pub use error::{BoundsError, CheckError, ExperimentError, MechanismError, PriorError, ProfileError};
pub use mechanisms::{default_node, Mechanism, MechanismConfig, MechanismKind, SelectionOutcome};
pub use priors::{LazySample, Prior, SubsetEntry};
pub use profile::{NodeId, NominationProfile};
pub use experiments::{
    mc_additive, scenario_duplication, scenario_example1, sweep, write_sweep_csv, DefaultRule,
    DuplicationResult, Example1Result, MCEstimate, PriorFamily, RunConfig, SweepRow,
};
pub use impartiality::{
    check_exhaustive, check_random, check_structure, CheckReport, Counterexample, StructureReport,
    Verdict,
};
