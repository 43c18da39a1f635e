//! The nonlinear benchmark system, empirical exclusion estimators and the
//! Monte Carlo experiment drivers built on them.
//!
//! Randomness is counter-based: every draw is produced by a ChaCha8 stream
//! whose key is `(seed, stream, trajectory, step, channel)`, so a batch is the
//! same whichever order (or thread) generates its trajectories. Different
//! `stream` values give independent batches from one seed, which is how
//! training and test data of an experiment are kept apart.

mod estimate;
mod experiment;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::certify::GaussianParams;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::trajectory::{Trajectory, TrajectoryBatch};

pub use estimate::{
    empirical_adv_violation, empirical_adv_violation_with, empirical_violation,
    empirical_violation_with, BoundCheck, ValidationReport,
};
pub use experiment::{
    coverage_experiment, coverage_experiment_with, ood_experiment, ood_experiment_with, rho_sweep,
    rho_sweep_with, CoverageRow, CoverageTable, ExperimentSpec, OodReport, RunFailure, SweepRow,
    SweepTable,
};

/// Perturbation half-width of the benchmark experiments.
pub const PAPER_GAMMA: f64 = 0.03;
/// Wasserstein radius used for the shifted-distribution experiment.
pub const PAPER_MU_TILDE: f64 = 0.0243;

/// Distribution of the initial state or of each disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateDistribution {
    /// Independent uniform coordinates on `[lo_j, hi_j]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent normal coordinates; `std_dev` holds standard deviations.
    Gaussian { mean: Vec<f64>, std_dev: Vec<f64> },
}

impl StateDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::UniformBox { lo, .. } => lo.len(),
            Self::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Input(format!("{what}: {msg}")));
        match self {
            Self::UniformBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return bad(format!("{} lower and {} upper bounds", lo.len(), hi.len()));
                }
                for (l, h) in lo.iter().zip(hi) {
                    if !(l.is_finite() && h.is_finite() && l <= h) {
                        return bad(format!("box bounds [{l}, {h}] must be finite with lo <= hi"));
                    }
                }
            }
            Self::Gaussian { mean, std_dev } => {
                if mean.len() != std_dev.len() {
                    return bad(format!("{} means and {} deviations", mean.len(), std_dev.len()));
                }
                if let Some(m) = mean.iter().find(|m| !m.is_finite()) {
                    return bad(format!("mean {m} is not finite"));
                }
                if let Some(s) = std_dev.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                    return bad(format!("standard deviation {s} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Fills `out` with one draw. The distribution must be valid.
    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Self::UniformBox { lo, hi } => {
                for ((o, l), h) in out.iter_mut().zip(lo).zip(hi) {
                    *o = l + (h - l) * rng.random::<f64>();
                }
            }
            Self::Gaussian { mean, std_dev } => {
                for ((o, m), s) in out.iter_mut().zip(mean).zip(std_dev) {
                    *o = Normal::new(*m, *s).expect("validated deviation").sample(rng);
                }
            }
        }
    }

    /// The parameters needed by the Gaussian shift bound, if Gaussian.
    pub fn gaussian_params(&self) -> Option<GaussianParams> {
        match self {
            Self::Gaussian { mean, std_dev } => Some(GaussianParams {
                mean: mean.clone(),
                std_dev: std_dev.clone(),
            }),
            Self::UniformBox { .. } => None,
        }
    }
}

/// `x_{k+1} = A x_k + B·gain·tanh(C x_k) + w_k` on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Row-major state matrix.
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub gain: f64,
    /// `T`; trajectories hold `T + 1` states.
    pub horizon: usize,
    pub initial: StateDistribution,
    pub disturbance: StateDistribution,
    pub seed: u64,
}

const PAPER_A: [[f64; 2]; 2] = [[0.95, 0.10], [-0.20, 0.85]];
const PAPER_B: [f64; 2] = [0.18, 0.06];
const PAPER_C: [f64; 2] = [1.0, 0.0];
const PAPER_GAIN: f64 = -0.9;
const PAPER_HORIZON: usize = 25;

impl BenchmarkConfig {
    fn paper(initial: StateDistribution, disturbance: StateDistribution, seed: u64) -> Self {
        Self {
            a: PAPER_A,
            b: PAPER_B,
            c: PAPER_C,
            gain: PAPER_GAIN,
            horizon: PAPER_HORIZON,
            initial,
            disturbance,
            seed,
        }
    }

    /// Uniform initial box `[-0.6, 0.6]×[-0.45, 0.45]` and uniform
    /// disturbances on `[-0.05, 0.05]²`.
    pub fn paper_sec6a(seed: u64) -> Self {
        Self::paper(
            StateDistribution::UniformBox {
                lo: vec![-0.6, -0.45],
                hi: vec![0.6, 0.45],
            },
            StateDistribution::UniformBox {
                lo: vec![-0.05; 2],
                hi: vec![0.05; 2],
            },
            seed,
        )
    }

    /// Nominal Gaussian ingredients of the distribution-shift experiment.
    pub fn paper_sec6b(seed: u64) -> Self {
        Self::paper(
            StateDistribution::Gaussian {
                mean: vec![0.0, 0.0],
                std_dev: vec![0.3, 0.225],
            },
            StateDistribution::Gaussian {
                mean: vec![0.0, 0.0],
                std_dev: vec![0.0167; 2],
            },
            seed,
        )
    }

    /// The shifted test distribution paired with [`Self::paper_sec6b`].
    pub fn paper_sec6b_shifted(seed: u64) -> Self {
        Self::paper(
            StateDistribution::Gaussian {
                mean: vec![0.01, -0.01],
                std_dev: vec![0.315, 0.23625],
            },
            StateDistribution::Gaussian {
                mean: vec![0.002, -0.002],
                std_dev: vec![0.0175; 2],
            },
            seed,
        )
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Input("horizon T must be at least 1".into()));
        }
        let finite = self.a.iter().flatten().chain(&self.b).chain(&self.c).all(|v| v.is_finite());
        if !finite || !self.gain.is_finite() {
            return Err(Error::Input("system matrices and gain must be finite".into()));
        }
        for (d, what) in [(&self.initial, "initial distribution"), (&self.disturbance, "disturbance")] {
            d.validate(what)?;
            if d.dim() != 2 {
                return Err(Error::Input(format!("{what} has dimension {}, expected 2", d.dim())));
            }
        }
        Ok(())
    }

    /// One noise-free step.
    pub fn step(&self, x: [f64; 2]) -> [f64; 2] {
        let phi = self.gain * (self.c[0] * x[0] + self.c[1] * x[1]).tanh();
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0] * phi,
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1] * phi,
        ]
    }

    /// Whether both ingredient distributions are Gaussian, with their
    /// parameters.
    pub fn gaussian_params(&self) -> Option<(GaussianParams, GaussianParams)> {
        Some((self.initial.gaussian_params()?, self.disturbance.gaussian_params()?))
    }
}

const CHANNEL_INITIAL: u64 = 1;
const CHANNEL_DISTURBANCE: u64 = 2;

fn keyed_rng(seed: u64, stream: u64, i: u64, k: u64, channel: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    // The stream and channel share a word; streams stay far below 2^56.
    let words = [seed, i, k, (stream << 8) | channel];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn simulate_one(cfg: &BenchmarkConfig, stream: u64, i: usize) -> Trajectory {
    let mut states = Vec::with_capacity(2 * (cfg.horizon + 1));
    let mut x = [0.0; 2];
    let mut rng = keyed_rng(cfg.seed, stream, i as u64, 0, CHANNEL_INITIAL);
    cfg.initial.sample_into(&mut rng, &mut x);
    states.extend_from_slice(&x);
    let mut w = [0.0; 2];
    for k in 0..cfg.horizon {
        let mut rng = keyed_rng(cfg.seed, stream, i as u64, k as u64, CHANNEL_DISTURBANCE);
        cfg.disturbance.sample_into(&mut rng, &mut w);
        let next = cfg.step(x);
        x = [next[0] + w[0], next[1] + w[1]];
        states.extend_from_slice(&x);
    }
    Trajectory::from_flat(2, states).expect("finite benchmark states")
}

/// `n` trajectories of the benchmark system from stream 0.
pub fn simulate_benchmark(cfg: &BenchmarkConfig, n: usize) -> Result<TrajectoryBatch> {
    simulate_stream(cfg, n, 0, Execution::default())
}

pub fn simulate_benchmark_with(cfg: &BenchmarkConfig, n: usize, exec: Execution) -> Result<TrajectoryBatch> {
    simulate_stream(cfg, n, 0, exec)
}

/// `n` trajectories from an explicit stream. Trajectory `i` of a stream is a
/// function of `(cfg, stream, i)` alone.
pub fn simulate_stream(cfg: &BenchmarkConfig, n: usize, stream: u64, exec: Execution) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Input("number of trajectories must be at least 1".into()));
    }
    if stream >= 1 << 56 {
        return Err(Error::Input(format!("stream {stream} exceeds 2^56")));
    }
    let trajectories = par::map_indices(n, exec, |i| simulate_one(cfg, stream, i));
    let batch = TrajectoryBatch::new(trajectories)?;
    Ok(batch.with_metadata(format!("benchmark seed={} stream={stream}", cfg.seed)))
}
