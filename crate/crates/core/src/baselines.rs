//! DP-Means baseline.
//!
//! Kept independent of [`crate::cluster`] so the two can check each other:
//! on a first batch with no dormant clusters Dynamic Means reduces to
//! DP-Means, and both use the same tie-breaking and stopping rules.

use crate::cluster::RELATIVE_COST_TOLERANCE;
use crate::error::{ClusterError, ParamError};

#[derive(Clone, Debug, PartialEq)]
pub struct DpMeansResult {
    /// Cluster index per point, indexing into `centers`.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// `lambda * K` plus the within-cluster sum of squares.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cost_history: Vec<f64>,
}

struct Center {
    // creation order, used for tie-breaking
    serial: u64,
    coords: Vec<f64>,
    count: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// DP-Means coordinate descent with a fixed scan order.
///
/// A point joins its nearest center unless that center is farther than
/// `lambda` in squared distance, in which case it seeds a new center.
pub fn dp_means(
    points: &[Vec<f64>],
    lambda: f64,
    scan_order: &[usize],
    max_iters: usize,
) -> Result<DpMeansResult, ClusterError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(ParamError::Lambda(lambda).into());
    }
    if max_iters == 0 {
        return Err(ParamError::MaxIters.into());
    }
    let n = points.len();
    let mut sorted = scan_order.to_vec();
    sorted.sort_unstable();
    if sorted.len() != n || sorted.iter().enumerate().any(|(i, &j)| i != j) {
        return Err(ClusterError::ScanOrder(n));
    }
    if n == 0 {
        return Ok(DpMeansResult {
            labels: Vec::new(),
            centers: Vec::new(),
            cost: 0.0,
            iterations: 1,
            converged: true,
            cost_history: vec![0.0],
        });
    }
    let dim = points[0].len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim || dim == 0 {
            return Err(ClusterError::Dimension {
                index,
                expected: dim,
                found: p.len(),
            });
        }
    }

    let mut centers: Vec<Center> = Vec::new();
    let mut serial = 0u64;
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut prev_assign: Option<Vec<u64>> = None;
    let mut prev_cost = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters {
        for &i in scan_order {
            if let Some(k) = assign[i] {
                centers[k].count -= 1;
            }
            let mut best: Option<(f64, u64, usize)> = None;
            for (k, c) in centers.iter().enumerate() {
                let d = sq_dist(&points[i], &c.coords);
                let better = match best {
                    None => true,
                    Some((bd, bs, _)) => d < bd || (d == bd && c.serial < bs),
                };
                if better {
                    best = Some((d, c.serial, k));
                }
            }
            let k = match best {
                Some((d, _, k)) if d <= lambda => k,
                _ => {
                    centers.push(Center {
                        serial,
                        coords: points[i].clone(),
                        count: 0,
                    });
                    serial += 1;
                    centers.len() - 1
                }
            };
            centers[k].count += 1;
            assign[i] = Some(k);
        }

        // drop empty centers, keeping creation order
        let mut new_index = vec![usize::MAX; centers.len()];
        let mut next = 0;
        for (k, c) in centers.iter().enumerate() {
            if c.count > 0 {
                new_index[k] = next;
                next += 1;
            }
        }
        centers.retain(|c| c.count > 0);
        for a in assign.iter_mut() {
            *a = a.map(|k| new_index[k]);
        }

        // recompute means
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        for (p, a) in points.iter().zip(&assign) {
            let s = &mut sums[a.expect("assigned")];
            for (acc, v) in s.iter_mut().zip(p) {
                *acc += v;
            }
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            let m = c.count as f64;
            c.coords = s.iter().map(|v| v / m).collect();
        }

        let mut sse = vec![0.0; centers.len()];
        for (p, a) in points.iter().zip(&assign) {
            let k = a.expect("assigned");
            sse[k] += sq_dist(p, &centers[k].coords);
        }
        let cost: f64 = sse.iter().map(|s| lambda + s).sum();
        history.push(cost);

        let serials: Vec<u64> = assign
            .iter()
            .map(|a| centers[a.expect("assigned")].serial)
            .collect();
        let repeated = prev_assign.as_ref() == Some(&serials);
        let stalled =
            prev_cost.is_finite() && prev_cost - cost <= RELATIVE_COST_TOLERANCE * prev_cost.abs();
        prev_assign = Some(serials);
        prev_cost = cost;
        if repeated || stalled {
            converged = true;
            break;
        }
    }

    Ok(DpMeansResult {
        labels: assign.into_iter().map(|a| a.expect("assigned")).collect(),
        centers: centers.into_iter().map(|c| c.coords).collect(),
        cost: prev_cost,
        iterations: history.len(),
        converged,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let r = dp_means(&[vec![0.3, 0.7]], 2.5, &[0], 10).unwrap();
        assert_eq!(r.labels, vec![0]);
        assert_eq!(r.centers, vec![vec![0.3, 0.7]]);
        assert_eq!(r.cost, 2.5);
    }

    #[test]
    fn far_points_stay_apart() {
        let r = dp_means(&[vec![0.0, 0.0], vec![10.0, 0.0]], 1.0, &[0, 1], 10).unwrap();
        assert_eq!(r.centers.len(), 2);
        assert_eq!(r.cost, 2.0);
    }

    #[test]
    fn empty_input() {
        let r = dp_means(&[], 1.0, &[], 10).unwrap();
        assert!(r.labels.is_empty() && r.centers.is_empty());
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn centers_are_member_means() {
        let pts: Vec<Vec<f64>> = [0.0, 0.2, 0.4, 5.0, 5.3]
            .iter()
            .map(|&x| vec![x, -x])
            .collect();
        let r = dp_means(&pts, 1.0, &[4, 2, 0, 3, 1], 50).unwrap();
        assert!(r.converged);
        for (k, c) in r.centers.iter().enumerate() {
            let members: Vec<&Vec<f64>> = pts
                .iter()
                .zip(&r.labels)
                .filter(|(_, &l)| l == k)
                .map(|(p, _)| p)
                .collect();
            let mean_x = members.iter().map(|p| p[0]).sum::<f64>() / members.len() as f64;
            assert!((c[0] - mean_x).abs() < 1e-12);
        }
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }
}
