//! Sequential driver: clusters a sequence of batches, carrying dormant
//! clusters forward from one timestep to the next.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    check_batch, cluster_timestep, ActiveCluster, ClusterId, DynMeansParams, IdSource,
    LabelAssignment, OldClusterRecord, TimestepOutcome, DEFAULT_MAX_ITERS,
};
use crate::error::{ParamError, PipelineError};

/// Behavioral parameterization: `n_q` is the (fractional) number of steps a
/// cluster may stay unobserved and still be revived, and `k_tau * lambda` is
/// the largest squared distance at which a cluster unobserved for one step
/// is revived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparamConfig {
    pub lambda: f64,
    pub n_q: f64,
    pub k_tau: f64,
}

impl ReparamConfig {
    pub fn new(lambda: f64, n_q: f64, k_tau: f64) -> Result<Self, ParamError> {
        let cfg = Self { lambda, n_q, k_tau };
        reparameterize(&cfg)?;
        Ok(cfg)
    }
}

/// Map `(lambda, n_q, k_tau)` to `(lambda, Q, tau)`.
pub fn reparameterize(cfg: &ReparamConfig) -> Result<DynMeansParams, ParamError> {
    if !(cfg.lambda.is_finite() && cfg.lambda > 0.0) {
        return Err(ParamError::Lambda(cfg.lambda));
    }
    if !(cfg.n_q.is_finite() && cfg.n_q > 1.0) {
        return Err(ParamError::NQ(cfg.n_q));
    }
    if !(cfg.k_tau.is_finite() && cfg.k_tau >= 1.0) {
        return Err(ParamError::KTau(cfg.k_tau));
    }
    let q = cfg.lambda / cfg.n_q;
    let tau = (cfg.n_q * (cfg.k_tau - 1.0) + 1.0) / (cfg.n_q - 1.0);
    DynMeansParams::new(cfg.lambda, q, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ParamSpec {
    Direct(DynMeansParams),
    Reparam(ReparamConfig),
}

impl ParamSpec {
    pub fn resolve(&self) -> Result<DynMeansParams, ParamError> {
        match self {
            ParamSpec::Direct(p) => {
                p.validate()?;
                Ok(*p)
            }
            ParamSpec::Reparam(cfg) => reparameterize(cfg),
        }
    }
}

impl From<DynMeansParams> for ParamSpec {
    fn from(p: DynMeansParams) -> Self {
        ParamSpec::Direct(p)
    }
}

impl From<ReparamConfig> for ParamSpec {
    fn from(cfg: ReparamConfig) -> Self {
        ParamSpec::Reparam(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ParamSpec,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(params: impl Into<ParamSpec>) -> Self {
        Self {
            params: params.into(),
            restarts: 1,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<DynMeansParams, ParamError> {
        if self.restarts == 0 {
            return Err(ParamError::Restarts);
        }
        if self.max_iters == 0 {
            return Err(ParamError::MaxIters);
        }
        self.params.resolve()
    }
}

/// Scan permutation for restart `restart` at timestep `t`.
///
/// The ChaCha key is the run seed and the stream is `(t, restart)`, so every
/// (timestep, restart) pair draws from an independent, reproducible stream.
pub fn scan_order(seed: u64, t: usize, restart: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 32) ^ restart as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Dormant set for the next timestep: unrevived records age by one, and
/// every active cluster becomes a record of age 1. Sorted by id.
pub fn update_c(active: &[ActiveCluster], old: &[OldClusterRecord]) -> Vec<OldClusterRecord> {
    let mut next: Vec<OldClusterRecord> = old
        .iter()
        .map(|r| OldClusterRecord {
            age: r.age + 1,
            ..r.clone()
        })
        .chain(active.iter().map(|c| OldClusterRecord {
            id: c.id,
            age: 1,
            center: c.center.clone(),
            weight: c.weight,
        }))
        .collect();
    next.sort_by_key(|r| r.id);
    next
}

/// True when reviving `record` costs more than opening a new cluster for
/// every possible observation.
pub fn is_unrevivable(record: &OldClusterRecord, params: &DynMeansParams) -> bool {
    params.q_penalty() * f64::from(record.age) > params.lambda()
}

/// Everything recorded for one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct TimestepRecord {
    pub t: usize,
    pub labels: LabelAssignment,
    /// Active clusters after the final parameter update, in creation order.
    pub clusters: Vec<ActiveCluster>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    /// Final cost of every restart, in restart order.
    pub restart_costs: Vec<f64>,
    /// Index of the restart that was kept.
    pub chosen_restart: usize,
    /// Per-iteration cost of the kept restart.
    pub cost_history: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub birth: usize,
    pub observed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceResult {
    pub params: DynMeansParams,
    pub steps: Vec<TimestepRecord>,
    pub genealogy: BTreeMap<ClusterId, Lineage>,
}

impl SequenceResult {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    pub fn learned_labels(&self) -> Vec<Vec<ClusterId>> {
        self.steps.iter().map(|s| s.labels.labels.clone()).collect()
    }
}

/// Stateful Dynamic Means clusterer, fed one batch at a time.
#[derive(Clone, Debug)]
pub struct DynamicMeans {
    params: DynMeansParams,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    dim: Option<usize>,
    t: usize,
    ids: IdSource,
    dormant: Vec<OldClusterRecord>,
    genealogy: BTreeMap<ClusterId, Lineage>,
}

impl DynamicMeans {
    pub fn new(cfg: &RunConfig) -> Result<Self, ParamError> {
        let params = cfg.validate()?;
        Ok(Self {
            params,
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            seed: cfg.seed,
            dim: None,
            t: 0,
            ids: IdSource::default(),
            dormant: Vec::new(),
            genealogy: BTreeMap::new(),
        })
    }

    pub fn params(&self) -> &DynMeansParams {
        &self.params
    }

    /// Number of batches processed so far.
    pub fn timestep(&self) -> usize {
        self.t
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dim
    }

    /// Dormant clusters that the next batch may revive.
    pub fn dormant(&self) -> &[OldClusterRecord] {
        &self.dormant
    }

    pub fn genealogy(&self) -> &BTreeMap<ClusterId, Lineage> {
        &self.genealogy
    }

    pub fn into_genealogy(self) -> BTreeMap<ClusterId, Lineage> {
        self.genealogy
    }

    /// Cluster the next batch and advance to the following timestep.
    pub fn step(&mut self, batch: &[Vec<f64>]) -> Result<TimestepRecord, PipelineError> {
        check_batch(batch, self.dim).map_err(|e| locate(e, self.t))?;
        if self.dim.is_none() {
            self.dim = batch.first().map(Vec::len);
        }

        let start = Instant::now();
        let mut best: Option<(TimestepOutcome, IdSource, usize)> = None;
        let mut restart_costs = Vec::with_capacity(self.restarts);
        for r in 0..self.restarts {
            let order = scan_order(self.seed, self.t, r, batch.len());
            let mut ids = self.ids.clone();
            let outcome = cluster_timestep(
                batch,
                &self.dormant,
                &self.params,
                &order,
                self.max_iters,
                &mut ids,
            )?;
            restart_costs.push(outcome.cost);
            if best.as_ref().is_none_or(|(b, _, _)| outcome.cost < b.cost) {
                best = Some((outcome, ids, r));
            }
        }
        let wall_time = start.elapsed();
        let (outcome, ids, chosen_restart) = best.expect("restarts >= 1");
        self.ids = ids;

        for c in &outcome.active {
            let lineage = self.genealogy.entry(c.id).or_insert_with(|| Lineage {
                birth: self.t,
                observed: Vec::new(),
            });
            lineage.observed.push(self.t);
        }

        self.dormant = update_c(&outcome.active, &outcome.dormant)
            .into_iter()
            .filter(|r| !is_unrevivable(r, &self.params))
            .collect();

        let record = TimestepRecord {
            t: self.t,
            labels: outcome.labels,
            clusters: outcome.active,
            cost: outcome.cost,
            iterations: outcome.iterations,
            converged: outcome.converged,
            wall_time,
            restart_costs,
            chosen_restart,
            cost_history: outcome.cost_history,
        };
        self.t += 1;
        Ok(record)
    }
}

fn locate(err: crate::error::ClusterError, batch: usize) -> PipelineError {
    use crate::error::ClusterError;
    match err {
        ClusterError::Dimension {
            index,
            expected,
            found,
        } => PipelineError::Dimension {
            batch,
            point: index,
            expected,
            found,
        },
        ClusterError::NonFinite(point) => PipelineError::NonFinite { batch, point },
        other => other.into(),
    }
}

/// Validate every batch up front, then cluster them in order.
pub fn run_sequence(
    batches: &[Vec<Vec<f64>>],
    cfg: &RunConfig,
) -> Result<SequenceResult, PipelineError> {
    let mut dim = None;
    for (t, batch) in batches.iter().enumerate() {
        check_batch(batch, dim).map_err(|e| locate(e, t))?;
        dim = dim.or_else(|| batch.first().map(Vec::len));
    }

    let mut runner = DynamicMeans::new(cfg)?;
    let steps = batches
        .iter()
        .map(|b| runner.step(b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SequenceResult {
        params: runner.params,
        steps,
        genealogy: runner.into_genealogy(),
    })
}
