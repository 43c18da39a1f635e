//! Reachable tube estimation from sampled trajectories.
//!
//! The crate fits one convex set per timestep (balls, ellipsoids or
//! zonotopes) to a batch of trajectories by solving a relaxed scenario
//! program in which every trajectory `i` owns a slack `ξ_i` priced at `ρ`.
//! Samples can be robustified against a polytopic perturbation set. The
//! fitted tube is then certified a posteriori: the number of trajectories
//! that are violated or active at the optimum determines an interval that
//! contains the probability of trajectory exclusion with confidence `1 − β`.
//!
//! Module map:
//! - [`trajectory`], [`perturbation`], [`tube`]: data, perturbation sets,
//!   per-step margins and size proxies.
//! - [`conic`], [`lp`]: solver plumbing.
//! - [`fit`]: the scenario programs per geometry.
//! - [`certify`]: complexity, violation levels, distribution-shift bounds.
//! - [`simulate`]: benchmark system, empirical estimators, experiment drivers.
//! - [`par`]: rayon-or-sequential execution of data-parallel loops.

pub mod certify;
pub mod conic;
mod error;
pub mod fit;
pub mod lp;
mod matrix_serde;
pub mod par;
pub mod perturbation;
pub mod simulate;
pub mod trajectory;
pub mod tube;

pub use error::{Error, Result};
pub use par::Execution;
pub use perturbation::{PerturbationKind, PerturbationModel};
pub use trajectory::{Trajectory, TrajectoryBatch};
pub use tube::{PNorm, SizeProxy, SizeReport, TubeParams};
