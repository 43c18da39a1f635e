#![allow(dead_code)]

pub mod barrier;
pub mod exact_eps;
pub mod fit_oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachtube::{Trajectory, TrajectoryBatch};

pub fn batch_1d(points: &[f64]) -> TrajectoryBatch {
    TrajectoryBatch::new(
        points
            .iter()
            .map(|p| Trajectory::new(vec![vec![*p]]).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn batch_static(points: &[Vec<f64>]) -> TrajectoryBatch {
    TrajectoryBatch::new(
        points
            .iter()
            .map(|p| Trajectory::new(vec![p.clone()]).unwrap())
            .collect(),
    )
    .unwrap()
}

/// A random batch with `n` trajectories of `steps` states in `dim`
/// dimensions drawn from a random walk.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, steps: usize, dim: usize) -> TrajectoryBatch {
    let trajectories = (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut states = vec![x.clone()];
            for _ in 1..steps {
                x = x.iter().map(|v| 0.8 * v + rng.random_range(-0.5..0.5)).collect();
                states.push(x.clone());
            }
            Trajectory::new(states).unwrap()
        })
        .collect();
    TrajectoryBatch::new(trajectories).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
