//! Single-timestep Dynamic Means coordinate descent.
//!
//! A timestep alternates two steps until the labels stop changing:
//!
//! * [`assign_labels`] visits every observation in a given scan order and
//!   moves it to the cheapest of: an instantiated cluster, a dormant cluster
//!   from earlier timesteps, or a brand-new cluster.
//! * [`assign_params`] re-estimates each active cluster from its members,
//!   blending in the dormant center for revived clusters, and returns the
//!   timestep cost.
//!
//! [`cluster_timestep`] drives the loop. The cost it reports never increases
//! from one iteration to the next.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ClusterError, ParamError};

/// Relative cost decrease below which the iteration is considered stalled.
pub const RELATIVE_COST_TOLERANCE: f64 = 1e-12;

/// Default iteration cap for [`cluster_timestep`].
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Persistent cluster identifier. Never reused within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u64);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Monotonic source of fresh cluster ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdSource {
    next: u64,
}

impl IdSource {
    pub fn starting_at(next: u64) -> Self {
        Self { next }
    }

    pub fn peek(&self) -> u64 {
        self.next
    }

    pub fn fresh(&mut self) -> ClusterId {
        let id = ClusterId(self.next);
        self.next += 1;
        id
    }
}

/// The three Dynamic Means parameters.
///
/// `lambda` is the cost of opening a new cluster, `q_penalty` the cost per
/// elapsed timestep of reviving a dormant one, and `tau` the per-step growth
/// of positional uncertainty for dormant clusters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynMeansParams {
    lambda: f64,
    q_penalty: f64,
    tau: f64,
}

impl DynMeansParams {
    pub fn new(lambda: f64, q_penalty: f64, tau: f64) -> Result<Self, ParamError> {
        let params = Self {
            lambda,
            q_penalty,
            tau,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ParamError::Lambda(self.lambda));
        }
        if !(self.q_penalty.is_finite() && self.q_penalty > 0.0) {
            return Err(ParamError::QPenalty(self.q_penalty));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(ParamError::Tau(self.tau));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q_penalty(&self) -> f64 {
        self.q_penalty
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// A cluster with members in the current timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveCluster {
    pub id: ClusterId,
    pub center: Vec<f64>,
    pub weight: f64,
    pub members: usize,
    /// Steps since the cluster was last observed; 0 when created this timestep.
    pub age: u32,
    /// Center at the last observation (equal to `center` when `age == 0`).
    pub origin_center: Vec<f64>,
    /// Weight at the last observation.
    pub origin_weight: f64,
}

impl ActiveCluster {
    fn created(id: ClusterId, y: &[f64]) -> Self {
        Self {
            id,
            center: y.to_vec(),
            weight: 1.0,
            members: 1,
            age: 0,
            origin_center: y.to_vec(),
            origin_weight: 1.0,
        }
    }

    fn revived(record: OldClusterRecord, y: &[f64], tau: f64) -> Self {
        let g = gamma(record.weight, record.age, tau);
        let center = record
            .center
            .iter()
            .zip(y)
            .map(|(c, v)| (c * g + v) / (g + 1.0))
            .collect();
        Self {
            id: record.id,
            center,
            weight: g + 1.0,
            members: 1,
            age: record.age,
            origin_center: record.center,
            origin_weight: record.weight,
        }
    }

    /// The dormant record this cluster was revived from, if any.
    pub fn origin_record(&self) -> Option<OldClusterRecord> {
        (self.age > 0).then(|| OldClusterRecord {
            id: self.id,
            age: self.age,
            center: self.origin_center.clone(),
            weight: self.origin_weight,
        })
    }
}

/// A dormant cluster: last seen `age` steps ago with the stored center and weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OldClusterRecord {
    pub id: ClusterId,
    pub age: u32,
    pub center: Vec<f64>,
    pub weight: f64,
}

/// One option an observation can be assigned to.
#[derive(Clone, Copy, Debug)]
pub enum Candidate<'a> {
    Instantiated(&'a [f64]),
    Old { center: &'a [f64], age: u32 },
    New,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Joined,
    Revived,
    Created,
}

/// Labels for one batch, aligned with the batch's point order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub labels: Vec<ClusterId>,
    /// What happened at the moment each observation was visited.
    pub kinds: Vec<LabelKind>,
}

impl LabelAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Active and still-dormant clusters during a timestep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClusterState {
    pub active: Vec<ActiveCluster>,
    pub dormant: Vec<OldClusterRecord>,
}

impl ClusterState {
    pub fn from_dormant(mut dormant: Vec<OldClusterRecord>) -> Self {
        dormant.sort_by_key(|r| r.id);
        Self {
            active: Vec::new(),
            dormant,
        }
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn label_cost(y: &[f64], candidate: Candidate<'_>, params: &DynMeansParams) -> f64 {
    match candidate {
        Candidate::Instantiated(center) => squared_distance(y, center),
        Candidate::Old { center, age } => {
            let dt = f64::from(age);
            params.q_penalty * dt + squared_distance(y, center) / (params.tau * dt + 1.0)
        }
        Candidate::New => params.lambda,
    }
}

/// Effective prior weight of a dormant center after `age` unobserved steps.
pub fn gamma(old_weight: f64, age: u32, tau: f64) -> f64 {
    if age == 0 {
        return old_weight;
    }
    1.0 / (1.0 / old_weight + f64::from(age) * tau)
}

#[derive(Clone, Copy)]
enum Choice {
    Active(usize),
    Dormant(usize),
    New,
}

fn check_permutation(scan_order: &[usize], n: usize) -> Result<(), ClusterError> {
    if scan_order.len() != n {
        return Err(ClusterError::ScanOrder(n));
    }
    let mut seen = vec![false; n];
    for &i in scan_order {
        if i >= n || seen[i] {
            return Err(ClusterError::ScanOrder(n));
        }
        seen[i] = true;
    }
    Ok(())
}

/// One label pass over `batch` in `scan_order`.
///
/// `previous` holds the labels from the prior iteration of the same timestep
/// (`None` on the first pass). Clusters created or revived during the pass
/// get single-observation parameters immediately and are visible to later
/// observations. Ties go to instantiated clusters, then dormant, then new,
/// then to the smaller id. Clusters left empty at the end of the pass are
/// dropped; revived ones return to the dormant set unchanged.
pub fn assign_labels(
    batch: &[Vec<f64>],
    previous: Option<&LabelAssignment>,
    state: &mut ClusterState,
    params: &DynMeansParams,
    scan_order: &[usize],
    ids: &mut IdSource,
) -> Result<LabelAssignment, ClusterError> {
    let n = batch.len();
    check_permutation(scan_order, n)?;
    if n == 0 {
        return Ok(LabelAssignment::default());
    }

    let mut slot: Vec<Option<usize>> = vec![None; n];
    let mut counts = vec![0usize; state.active.len()];
    if let Some(prev) = previous {
        if prev.labels.len() != n {
            return Err(ClusterError::LabelCount {
                labels: prev.labels.len(),
                points: n,
            });
        }
        let index: HashMap<ClusterId, usize> = state
            .active
            .iter()
            .enumerate()
            .map(|(k, c)| (c.id, k))
            .collect();
        for (i, id) in prev.labels.iter().enumerate() {
            let k = *index.get(id).ok_or(ClusterError::UnknownCluster(*id))?;
            slot[i] = Some(k);
            counts[k] += 1;
        }
    }

    let mut kinds = vec![LabelKind::Joined; n];
    for &i in scan_order {
        let y = batch[i].as_slice();
        if let Some(k) = slot[i] {
            counts[k] -= 1;
        }

        let mut best = Choice::New;
        let mut best_key = (params.lambda, 2u8, ClusterId(u64::MAX));
        for (k, c) in state.active.iter().enumerate() {
            let key = (
                label_cost(y, Candidate::Instantiated(&c.center), params),
                0u8,
                c.id,
            );
            if key < best_key {
                best_key = key;
                best = Choice::Active(k);
            }
        }
        for (j, r) in state.dormant.iter().enumerate() {
            let candidate = Candidate::Old {
                center: &r.center,
                age: r.age,
            };
            let key = (label_cost(y, candidate, params), 1u8, r.id);
            if key < best_key {
                best_key = key;
                best = Choice::Dormant(j);
            }
        }

        let k = match best {
            Choice::Active(k) => {
                kinds[i] = LabelKind::Joined;
                counts[k] += 1;
                k
            }
            Choice::Dormant(j) => {
                let record = state.dormant.remove(j);
                state
                    .active
                    .push(ActiveCluster::revived(record, y, params.tau));
                counts.push(1);
                kinds[i] = LabelKind::Revived;
                state.active.len() - 1
            }
            Choice::New => {
                state.active.push(ActiveCluster::created(ids.fresh(), y));
                counts.push(1);
                kinds[i] = LabelKind::Created;
                state.active.len() - 1
            }
        };
        slot[i] = Some(k);
    }

    // drop emptied clusters and renumber the survivors
    let mut remap = vec![usize::MAX; state.active.len()];
    let mut kept = Vec::with_capacity(state.active.len());
    let mut restored = false;
    for (k, mut c) in std::mem::take(&mut state.active).into_iter().enumerate() {
        if counts[k] == 0 {
            if let Some(record) = c.origin_record() {
                state.dormant.push(record);
                restored = true;
            }
            continue;
        }
        c.members = counts[k];
        remap[k] = kept.len();
        kept.push(c);
    }
    state.active = kept;
    if restored {
        state.dormant.sort_by_key(|r| r.id);
    }

    let labels = slot
        .into_iter()
        .map(|k| state.active[remap[k.expect("every observation visited")]].id)
        .collect();
    Ok(LabelAssignment { labels, kinds })
}

fn index_members(
    batch: &[Vec<f64>],
    labels: &LabelAssignment,
    active: &[ActiveCluster],
) -> Result<Vec<usize>, ClusterError> {
    if labels.labels.len() != batch.len() {
        return Err(ClusterError::LabelCount {
            labels: labels.labels.len(),
            points: batch.len(),
        });
    }
    let index: HashMap<ClusterId, usize> =
        active.iter().enumerate().map(|(k, c)| (c.id, k)).collect();
    labels
        .labels
        .iter()
        .map(|id| {
            index
                .get(id)
                .copied()
                .ok_or(ClusterError::UnknownCluster(*id))
        })
        .collect()
}

/// Re-estimate every active cluster from its members and return the cost.
///
/// New clusters take the member mean with weight `n`. Revived clusters take
/// the `gamma`-weighted blend of their dormant center and the member sum,
/// with weight `gamma + n`.
pub fn assign_params(
    batch: &[Vec<f64>],
    labels: &LabelAssignment,
    active: &mut [ActiveCluster],
    params: &DynMeansParams,
) -> Result<f64, ClusterError> {
    let slots = index_members(batch, labels, active)?;
    let dim = batch.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; active.len()];
    let mut counts = vec![0usize; active.len()];
    for (y, &k) in batch.iter().zip(&slots) {
        for (s, v) in sums[k].iter_mut().zip(y) {
            *s += v;
        }
        counts[k] += 1;
    }

    for ((c, sum), &count) in active.iter_mut().zip(&sums).zip(&counts) {
        if count == 0 {
            return Err(ClusterError::EmptyCluster(c.id));
        }
        let n = count as f64;
        c.members = count;
        if c.age == 0 {
            c.center = sum.iter().map(|s| s / n).collect();
            c.weight = n;
            c.origin_center.clone_from(&c.center);
            c.origin_weight = n;
        } else {
            let g = gamma(c.origin_weight, c.age, params.tau);
            c.center = c
                .origin_center
                .iter()
                .zip(sum)
                .map(|(o, s)| (o * g + s) / (g + n))
                .collect();
            c.weight = g + n;
        }
    }

    compute_cost(active, batch, labels, params)
}

/// Timestep cost: creation and revival penalties, the prior-weighted drift
/// of revived centers, and the within-cluster sum of squares.
pub fn compute_cost(
    active: &[ActiveCluster],
    batch: &[Vec<f64>],
    labels: &LabelAssignment,
    params: &DynMeansParams,
) -> Result<f64, ClusterError> {
    let slots = index_members(batch, labels, active)?;
    let mut sse = vec![0.0; active.len()];
    for (y, &k) in batch.iter().zip(&slots) {
        sse[k] += squared_distance(y, &active[k].center);
    }
    let total = active
        .iter()
        .zip(&sse)
        .map(|(c, s)| {
            let penalty = if c.age == 0 {
                params.lambda
            } else {
                let g = gamma(c.origin_weight, c.age, params.tau);
                params.q_penalty * f64::from(c.age)
                    + g * squared_distance(&c.center, &c.origin_center)
            };
            penalty + s
        })
        .sum();
    Ok(total)
}

/// Result of clustering one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct TimestepOutcome {
    pub active: Vec<ActiveCluster>,
    /// Dormant records that were not revived, sorted by id.
    pub dormant: Vec<OldClusterRecord>,
    pub labels: LabelAssignment,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after each iteration, in order.
    pub cost_history: Vec<f64>,
}

pub(crate) fn check_batch(batch: &[Vec<f64>], dim: Option<usize>) -> Result<(), ClusterError> {
    let expected = dim.or_else(|| batch.first().map(Vec::len));
    for (index, y) in batch.iter().enumerate() {
        let expected = expected.unwrap_or(y.len());
        if y.len() != expected || y.is_empty() {
            return Err(ClusterError::Dimension {
                index,
                expected,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite(index));
        }
    }
    Ok(())
}

/// Cluster one batch given the dormant clusters from earlier timesteps.
///
/// Iterates label and parameter passes with a fixed scan order until the
/// labels repeat, the relative cost decrease falls below
/// [`RELATIVE_COST_TOLERANCE`], or `max_iters` passes have run. In the last
/// case the final (lowest-cost) iterate is returned with `converged = false`.
pub fn cluster_timestep(
    batch: &[Vec<f64>],
    old: &[OldClusterRecord],
    params: &DynMeansParams,
    scan_order: &[usize],
    max_iters: usize,
    ids: &mut IdSource,
) -> Result<TimestepOutcome, ClusterError> {
    params.validate()?;
    if max_iters == 0 {
        return Err(ParamError::MaxIters.into());
    }
    check_batch(batch, old.first().map(|r| r.center.len()))?;
    check_permutation(scan_order, batch.len())?;

    let mut state = ClusterState::from_dormant(old.to_vec());
    if batch.is_empty() {
        return Ok(TimestepOutcome {
            active: Vec::new(),
            dormant: state.dormant,
            labels: LabelAssignment::default(),
            cost: 0.0,
            iterations: 1,
            converged: true,
            cost_history: vec![0.0],
        });
    }

    let mut previous: Option<LabelAssignment> = None;
    let mut prev_cost = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let labels = assign_labels(
            batch,
            previous.as_ref(),
            &mut state,
            params,
            scan_order,
            ids,
        )?;
        let cost = assign_params(batch, &labels, &mut state.active, params)?;
        history.push(cost);

        let same_labels = previous.as_ref().is_some_and(|p| p.labels == labels.labels);
        let stalled =
            prev_cost.is_finite() && prev_cost - cost <= RELATIVE_COST_TOLERANCE * prev_cost.abs();
        previous = Some(labels);
        prev_cost = cost;
        if same_labels || stalled {
            converged = true;
            break;
        }
    }

    Ok(TimestepOutcome {
        active: state.active,
        dormant: state.dormant,
        labels: previous.expect("max_iters >= 1"),
        cost: prev_cost,
        iterations: history.len(),
        converged,
        cost_history: history,
    })
}
