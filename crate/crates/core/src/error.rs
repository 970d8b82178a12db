use thiserror::Error;

use crate::cluster::ClusterId;

/// Parameter values outside their valid domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("lambda must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("Q must be positive and finite, got {0}")]
    QPenalty(f64),
    #[error("tau must be nonnegative and finite, got {0}")]
    Tau(f64),
    #[error("N_Q must be finite and greater than 1, got {0}")]
    NQ(f64),
    #[error("k_tau must be finite and at least 1, got {0}")]
    KTau(f64),
    #[error("restarts must be at least 1")]
    Restarts,
    #[error("max_iters must be at least 1")]
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("cluster {0} has no members")]
    EmptyCluster(ClusterId),
    #[error("label refers to unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("label count {labels} does not match batch size {points}")]
    LabelCount { labels: usize, points: usize },
    #[error("scan order is not a permutation of 0..{0}")]
    ScanOrder(usize),
    #[error("observation {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("observation {0} has a non-finite coordinate")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("batch {batch} point {point} has dimension {found}, expected {expected}")]
    Dimension {
        batch: usize,
        point: usize,
        expected: usize,
        found: usize,
    },
    #[error("batch {batch} point {point} has a non-finite coordinate")]
    NonFinite { batch: usize, point: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("timestep count differs: learned {learned}, truth {truth}")]
    StepCount { learned: usize, truth: usize },
    #[error("timestep {step}: learned has {learned} labels, truth has {truth}")]
    PointCount {
        step: usize,
        learned: usize,
        truth: usize,
    },
    #[error("weight {value} at index {index} is outside [0, 1]")]
    Weight { index: usize, value: f64 },
    #[error("matrix row {0} has a different length than row 0")]
    Ragged(usize),
    #[error("matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
}
