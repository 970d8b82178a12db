//! Dynamic Means: hard clustering of batch-sequential data.
//!
//! The number of clusters is unknown and changes over time. Clusters can
//! appear, move between batches, go unobserved for a while and be revived,
//! or disappear for good. Each batch is clustered by a k-means style
//! coordinate descent ([`cluster::cluster_timestep`]) that never increases
//! its cost; [`pipeline::run_sequence`] chains batches together and keeps
//! cluster ids stable across time.
//!
//! Also included: a DP-Means baseline, a moving-Gaussian benchmark
//! generator, tracking-aware accuracy metrics and the line-delimited file
//! formats used by the `dynmeans` command-line tool.

pub mod baselines;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod synth;

pub use baselines::{dp_means, DpMeansResult};
pub use cluster::{
    assign_labels, assign_params, cluster_timestep, compute_cost, gamma, label_cost, ActiveCluster,
    Candidate, ClusterId, ClusterState, DynMeansParams, IdSource, LabelAssignment, LabelKind,
    OldClusterRecord, TimestepOutcome,
};
pub use error::{ClusterError, EvalError, ParamError, PipelineError};
pub use eval::{
    accuracy_report, optimal_matching, tracked_accuracy, weighted_accuracy, AccuracyReport,
};
pub use pipeline::{
    reparameterize, run_sequence, update_c, DynamicMeans, ParamSpec, ReparamConfig, RunConfig,
    SequenceResult, TimestepRecord,
};
pub use synth::{generate, LabeledBatchSequence, SynthConfig};
