//! Moving-Gaussian benchmark data on the unit square.
//!
//! Each live cluster emits `points_per_cluster` isotropic Gaussian samples
//! per timestep. Between timesteps every cluster either dies (and is
//! replaced by a fresh cluster at a uniform position) or takes a Gaussian
//! random-walk step. Nothing is clipped to the square.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{name} must be {requirement}, got {value}")]
    Invalid {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub point_std: f64,
    pub motion_std: f64,
    pub death_prob: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clusters: 5,
            points_per_cluster: 15,
            point_std: 0.05,
            motion_std: 0.05,
            death_prob: 0.05,
            n_steps: 100,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let nonneg = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(SynthError::Invalid {
                    name,
                    requirement: "finite and nonnegative",
                    value,
                })
            }
        };
        nonneg("point_std", self.point_std)?;
        nonneg("motion_std", self.motion_std)?;
        if !(0.0..=1.0).contains(&self.death_prob) {
            return Err(SynthError::Invalid {
                name: "death_prob",
                requirement: "in [0, 1]",
                value: self.death_prob,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub birth: usize,
    /// First timestep at which the cluster no longer exists.
    pub death: Option<usize>,
    /// Center at each timestep from `birth` onward.
    pub path: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBatchSequence {
    pub batches: Vec<Vec<Vec<f64>>>,
    /// True cluster id per observation, aligned with `batches`.
    pub labels: Vec<Vec<u64>>,
    pub trajectories: BTreeMap<u64, Trajectory>,
    /// Number of survival draws made (one per live cluster per transition).
    pub survival_trials: usize,
    pub deaths: usize,
}

impl LabeledBatchSequence {
    pub fn n_points(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }

    /// Centers of the clusters alive at `t`, sorted by id.
    pub fn centers_at(&self, t: usize) -> Vec<(u64, [f64; 2])> {
        self.trajectories
            .iter()
            .filter(|(_, tr)| tr.birth <= t && tr.death.is_none_or(|d| t < d))
            .map(|(&id, tr)| (id, tr.path[t - tr.birth]))
            .collect()
    }
}

struct Live {
    id: u64,
    center: [f64; 2],
}

pub fn generate(cfg: &SynthConfig) -> Result<LabeledBatchSequence, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let point_noise = Normal::new(0.0, cfg.point_std).expect("validated std");
    let motion = Normal::new(0.0, cfg.motion_std).expect("validated std");

    let mut trajectories = BTreeMap::new();
    let mut next_id = 0u64;
    let mut spawn =
        |rng: &mut ChaCha8Rng, t: usize, trajectories: &mut BTreeMap<u64, Trajectory>| {
            let center = [rng.random::<f64>(), rng.random::<f64>()];
            let id = next_id;
            next_id += 1;
            trajectories.insert(
                id,
                Trajectory {
                    birth: t,
                    death: None,
                    path: Vec::new(),
                },
            );
            Live { id, center }
        };

    let mut live: Vec<Live> = (0..cfg.n_clusters)
        .map(|_| spawn(&mut rng, 0, &mut trajectories))
        .collect();

    let mut batches = Vec::with_capacity(cfg.n_steps);
    let mut labels = Vec::with_capacity(cfg.n_steps);
    let mut survival_trials = 0;
    let mut deaths = 0;
    for t in 0..cfg.n_steps {
        if t > 0 {
            for slot in live.iter_mut() {
                survival_trials += 1;
                if rng.random::<f64>() < cfg.death_prob {
                    deaths += 1;
                    if let Some(tr) = trajectories.get_mut(&slot.id) {
                        tr.death = Some(t);
                    }
                    *slot = spawn(&mut rng, t, &mut trajectories);
                } else {
                    slot.center[0] += motion.sample(&mut rng);
                    slot.center[1] += motion.sample(&mut rng);
                }
            }
        }

        let mut points = Vec::with_capacity(live.len() * cfg.points_per_cluster);
        let mut truth = Vec::with_capacity(points.capacity());
        for c in &live {
            trajectories
                .get_mut(&c.id)
                .expect("spawned clusters are tracked")
                .path
                .push(c.center);
            for _ in 0..cfg.points_per_cluster {
                points.push(vec![
                    c.center[0] + point_noise.sample(&mut rng),
                    c.center[1] + point_noise.sample(&mut rng),
                ]);
                truth.push(c.id);
            }
        }
        batches.push(points);
        labels.push(truth);
    }

    Ok(LabeledBatchSequence {
        batches,
        labels,
        trajectories,
        survival_trials,
        deaths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.n_clusters, 5);
        assert_eq!(cfg.points_per_cluster, 15);
        assert_eq!(cfg.point_std, 0.05);
        assert_eq!(cfg.motion_std, 0.05);
        assert_eq!(cfg.death_prob, 0.05);
        assert_eq!(cfg.n_steps, 100);
    }

    #[test]
    fn noiseless_single_cluster_is_static() {
        let cfg = SynthConfig {
            n_clusters: 1,
            point_std: 0.0,
            motion_std: 0.0,
            death_prob: 0.0,
            n_steps: 20,
            seed: 3,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let first = data.batches[0][0].clone();
        assert!(data.batches.iter().flatten().all(|p| *p == first));
        assert!(first.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn live_count_is_constant() {
        let cfg = SynthConfig {
            death_prob: 0.3,
            seed: 9,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        for t in 0..cfg.n_steps {
            assert_eq!(data.centers_at(t).len(), cfg.n_clusters);
            assert_eq!(
                data.batches[t].len(),
                cfg.n_clusters * cfg.points_per_cluster
            );
        }
        assert!(data.deaths > 0);
    }

    #[test]
    fn labels_reference_live_clusters() {
        let data = generate(&SynthConfig {
            seed: 4,
            ..SynthConfig::default()
        })
        .unwrap();
        for (t, truth) in data.labels.iter().enumerate() {
            let alive: Vec<u64> = data.centers_at(t).iter().map(|(id, _)| *id).collect();
            assert!(truth.iter().all(|id| alive.contains(id)));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = SynthConfig {
            seed: 42,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn rejects_bad_probability() {
        let cfg = SynthConfig {
            death_prob: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
