//! Clustering accuracy with and without cross-timestep tracking.
//!
//! Both metrics find the one-to-one correspondence between learned and true
//! cluster ids that agrees on the most points. The tracked metric uses a
//! single correspondence for the whole sequence, the untracked metric
//! re-matches every timestep independently. Learned clusters left unmatched
//! score zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::pipeline::SequenceResult;
use crate::synth::LabeledBatchSequence;

/// Minimum-cost one-to-one assignment between rows and columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row. Covers every row when rows <= cols,
    /// otherwise every column.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Rectangular Hungarian method (shortest augmenting paths with potentials).
pub fn optimal_matching(cost: &[Vec<f64>]) -> Result<Matching, EvalError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    for (i, row) in cost.iter().enumerate() {
        if row.len() != cols {
            return Err(EvalError::Ragged(i));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite(i, j));
        }
    }
    if rows == 0 || cols == 0 {
        return Ok(Matching::default());
    }

    let transposed = rows > cols;
    let (n, m) = if transposed {
        (cols, rows)
    } else {
        (rows, cols)
    };
    let at = |i: usize, j: usize| if transposed { cost[j][i] } else { cost[i][j] };

    // 1-based; column 0 is the virtual root of each augmenting search
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = at(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| {
            let (a, b) = (owner[j] - 1, j - 1);
            if transposed {
                (b, a)
            } else {
                (a, b)
            }
        })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Ok(Matching { pairs, cost: total })
}

/// Weighted contingency table between two labelings.
struct Contingency {
    learned: Vec<u64>,
    truth: Vec<u64>,
    table: Vec<Vec<f64>>,
}

impl Contingency {
    fn build(pairs: impl Iterator<Item = (u64, u64, f64)> + Clone) -> Self {
        let mut learned: Vec<u64> = pairs.clone().map(|(l, _, _)| l).collect();
        let mut truth: Vec<u64> = pairs.clone().map(|(_, t, _)| t).collect();
        learned.sort_unstable();
        learned.dedup();
        truth.sort_unstable();
        truth.dedup();
        let mut table = vec![vec![0.0; truth.len()]; learned.len()];
        for (l, t, w) in pairs {
            let r = learned.binary_search(&l).expect("collected above");
            let c = truth.binary_search(&t).expect("collected above");
            table[r][c] += w;
        }
        Self {
            learned,
            truth,
            table,
        }
    }

    /// Maximum total agreement and the matched `(learned, truth)` pairs.
    fn best_agreement(&self) -> (f64, Vec<(u64, u64)>) {
        let peak = self.table.iter().flatten().copied().fold(0.0, f64::max);
        let cost: Vec<Vec<f64>> = self
            .table
            .iter()
            .map(|row| row.iter().map(|w| peak - w).collect())
            .collect();
        let matching = optimal_matching(&cost).expect("finite rectangular table");
        let agreed = matching.pairs.iter().map(|&(r, c)| self.table[r][c]).sum();
        let pairs = matching
            .pairs
            .iter()
            .map(|&(r, c)| (self.learned[r], self.truth[c]))
            .collect();
        (agreed, pairs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepAccuracy {
    pub t: usize,
    pub points: usize,
    /// Points agreeing under the sequence-wide correspondence.
    pub tracked_agreed: usize,
    /// Points agreeing under this step's own best correspondence.
    pub untracked_agreed: usize,
    pub tracked: f64,
    pub untracked: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tracked_accuracy: f64,
    /// Per-step accuracies pooled by point count.
    pub untracked_accuracy: f64,
    /// Unweighted mean of the per-step untracked accuracies.
    pub untracked_step_mean: f64,
    pub total_points: usize,
    pub steps: Vec<StepAccuracy>,
    /// Sequence-wide learned id -> true id correspondence.
    pub matching: BTreeMap<u64, u64>,
}

fn ratio(agreed: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        agreed as f64 / total as f64
    }
}

/// Tracked and untracked accuracy of `learned` against `truth`.
///
/// An empty sequence (or empty timestep) scores 1.0.
pub fn accuracy_report(
    learned: &[Vec<u64>],
    truth: &[Vec<u64>],
) -> Result<AccuracyReport, EvalError> {
    if learned.len() != truth.len() {
        return Err(EvalError::StepCount {
            learned: learned.len(),
            truth: truth.len(),
        });
    }
    for (step, (l, t)) in learned.iter().zip(truth).enumerate() {
        if l.len() != t.len() {
            return Err(EvalError::PointCount {
                step,
                learned: l.len(),
                truth: t.len(),
            });
        }
    }

    let global = Contingency::build(
        learned
            .iter()
            .zip(truth)
            .flat_map(|(l, t)| l.iter().zip(t).map(|(&a, &b)| (a, b, 1.0))),
    );
    let (_, global_pairs) = global.best_agreement();
    let matching: BTreeMap<u64, u64> = global_pairs.into_iter().collect();

    let mut steps = Vec::with_capacity(learned.len());
    for (t, (l, tr)) in learned.iter().zip(truth).enumerate() {
        let tracked_agreed = l
            .iter()
            .zip(tr)
            .filter(|(a, b)| matching.get(a) == Some(b))
            .count();
        let local = Contingency::build(l.iter().zip(tr).map(|(&a, &b)| (a, b, 1.0)));
        let (agreed, _) = local.best_agreement();
        let untracked_agreed = agreed.round() as usize;
        steps.push(StepAccuracy {
            t,
            points: l.len(),
            tracked_agreed,
            untracked_agreed,
            tracked: ratio(tracked_agreed, l.len()),
            untracked: ratio(untracked_agreed, l.len()),
        });
    }

    let total_points: usize = steps.iter().map(|s| s.points).sum();
    let tracked_total: usize = steps.iter().map(|s| s.tracked_agreed).sum();
    let untracked_total: usize = steps.iter().map(|s| s.untracked_agreed).sum();
    let untracked_step_mean = if steps.is_empty() {
        1.0
    } else {
        steps.iter().map(|s| s.untracked).sum::<f64>() / steps.len() as f64
    };
    Ok(AccuracyReport {
        tracked_accuracy: ratio(tracked_total, total_points),
        untracked_accuracy: ratio(untracked_total, total_points),
        untracked_step_mean,
        total_points,
        steps,
        matching,
    })
}

pub fn tracked_accuracy(
    result: &SequenceResult,
    truth: &LabeledBatchSequence,
) -> Result<AccuracyReport, EvalError> {
    let learned: Vec<Vec<u64>> = result
        .steps
        .iter()
        .map(|s| s.labels.labels.iter().map(|id| id.0).collect())
        .collect();
    accuracy_report(&learned, &truth.labels)
}

/// Confidence-weighted accuracy under the weight-maximizing correspondence.
///
/// Returns `Ok(None)` when every weight is zero.
pub fn weighted_accuracy(
    labels: &[u64],
    truth: &[u64],
    weights: &[f64],
) -> Result<Option<f64>, EvalError> {
    if labels.len() != truth.len() || labels.len() != weights.len() {
        return Err(EvalError::PointCount {
            step: 0,
            learned: labels.len(),
            truth: truth.len().min(weights.len()),
        });
    }
    if let Some(index) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
        return Err(EvalError::Weight {
            index,
            value: weights[index],
        });
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Ok(None);
    }
    let table = Contingency::build(
        labels
            .iter()
            .zip(truth)
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|((&l, &t), &w)| (l, t, w)),
    );
    let (agreed, _) = table.best_agreement();
    Ok(Some(agreed / total))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
    pub total: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary::default();
    }
    let total: f64 = values.iter().sum();
    let mean = total / count as f64;
    let std = if count > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        count,
        mean,
        std,
        total,
    }
}

/// Per-timestep clustering wall time, in seconds.
pub fn timing_summary(result: &SequenceResult) -> Summary {
    let secs: Vec<f64> = result
        .steps
        .iter()
        .map(|s| s.wall_time.as_secs_f64())
        .collect();
    summarize(&secs)
}
