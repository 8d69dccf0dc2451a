use thiserror::Error;

use crate::profile::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("a profile needs at least one node")]
    NoNodes,
    #[error("self-loop edge ({0}, {0}) is not allowed")]
    SelfLoop(NodeId),
    #[error("edge ({voter}, {candidate}) references a node outside [0, {m})")]
    EdgeOutOfRange { voter: NodeId, candidate: NodeId, m: usize },
    #[error("edge ({voter}, {candidate}) appears more than once")]
    DuplicateEdge { voter: NodeId, candidate: NodeId },
    #[error("node {node} is outside [0, {m})")]
    NodeOutOfRange { node: NodeId, m: usize },
    #[error("beats compares a node with itself ({0})")]
    SameNode(NodeId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("probability {value} at {context} is outside [0, 1]")]
    BadProbability { context: String, value: f64 },
    #[error("edge matrix must be square with a zero diagonal: {0}")]
    BadMatrix(String),
    #[error("subset table row for voter {voter} sums to {sum}, expected 1")]
    RowSum { voter: usize, sum: f64 },
    #[error("subset table row for voter {voter} is invalid: {reason}")]
    BadSubset { voter: usize, reason: String },
    #[error("subset table has {entries} entries, above the cap of {cap}")]
    TableTooLarge { entries: usize, cap: usize },
    #[error("duplication only supports uniform, popularity or edge-matrix bases")]
    UnsupportedBase,
    #[error("dense sampling of an edge matrix over {m} nodes exceeds the cap of {cap}")]
    TooLargeForDense { m: usize, cap: usize },
    #[error("prior has no nodes")]
    Empty,
    #[error("block scale k must be at least 1")]
    BadBlockScale,
    #[error("lazy sampling needs a uniform or popularity prior")]
    NotPopularity,
    #[error("reveal of self-loop ({0}, {0})")]
    SelfLoop(NodeId),
    #[error("node {node} is outside [0, {m})")]
    NodeOutOfRange { node: NodeId, m: usize },
    #[error("failed to read probabilities from {path}: {reason}")]
    Csv { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("default node {default} is invalid for a profile with {m} nodes")]
    InvalidDefault { default: NodeId, m: usize },
    #[error("mechanism {0} needs a default node")]
    MissingDefault(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("exhaustive enumeration supports m <= {max}, got {m}")]
    TooLarge { m: usize, max: usize },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Prior(#[from] PriorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("x = {x} is outside [0, {n}]")]
    OutOfRange { x: i64, n: u64 },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("delta {delta} is outside {range}")]
    BadDelta { delta: f64, range: &'static str },
    #[error("hoeffding needs nu >= 0 and b >= a for every range")]
    BadHoeffding,
    #[error("hazard ratio undefined: Pr[B >= {x}] = 0")]
    ZeroTail { x: u64 },
    #[error("precondition xi_t >= 8200 ln n fails at n = {n}: xi_t = {xi_t}, 8200 ln n = {required}")]
    XiTooSmall { n: u64, xi_t: f64, required: f64 },
    #[error("node k must not have larger expected degree than the default (p_k = {p_k} > p_t = {p_t})")]
    NotMaxExpected { p_t: f64, p_k: f64 },
    #[error("n = {n} is below the minimum {min}")]
    NTooSmall { n: u64, min: u64 },
    #[error("two-node analysis needs 0 < p <= 1, got {0}")]
    TwoNodeP(f64),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("sweep needs a nonempty ascending list of sizes")]
    BadSweep,
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("winner-degree floor violated in trial {trial}: winner degree {winner} < default degree {default}")]
    FloorViolated { trial: u64, winner: usize, default: usize },
}
