//! Empirical probability of trajectory exclusion.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::par::{self, Execution};
use crate::perturbation::PerturbationModel;
use crate::trajectory::TrajectoryBatch;
use crate::tube::TubeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub eps_hi: f64,
    /// `v_hat <= eps_hi`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_test: usize,
    pub violations: usize,
    /// `violations / n_test`.
    pub v_hat: f64,
    /// Number of test trajectories excluded at each step.
    pub profile: Vec<usize>,
    pub comparison: Option<BoundCheck>,
}

impl ValidationReport {
    pub fn with_bound(mut self, eps_hi: f64) -> Self {
        self.comparison = Some(BoundCheck {
            eps_hi,
            pass: self.v_hat <= eps_hi,
        });
        self
    }
}

/// Fraction of test trajectories that leave the tube at some step.
pub fn empirical_violation(tube: &TubeParams, test: &TrajectoryBatch) -> Result<ValidationReport> {
    empirical_violation_with(tube, test, Execution::default())
}

pub fn empirical_violation_with(
    tube: &TubeParams,
    test: &TrajectoryBatch,
    exec: Execution,
) -> Result<ValidationReport> {
    empirical_adv_violation_with(tube, test, &PerturbationModel::none(), exec)
}

/// Fraction of test trajectories for which some step and some perturbation
/// vertex at that step leave the tube. Vertices are enumerated per step.
pub fn empirical_adv_violation(
    tube: &TubeParams,
    test: &TrajectoryBatch,
    model: &PerturbationModel,
) -> Result<ValidationReport> {
    empirical_adv_violation_with(tube, test, model, Execution::default())
}

pub fn empirical_adv_violation_with(
    tube: &TubeParams,
    test: &TrajectoryBatch,
    model: &PerturbationModel,
    exec: Execution,
) -> Result<ValidationReport> {
    check_dim(tube.dim(), test.dim())?;
    check_dim(tube.steps(), test.horizon() + 1)?;
    let offsets = model.offsets(test.dim())?;
    let excluded = par::map_slice(test.trajectories(), exec, |x| {
        let mut v = vec![0.0; x.dim()];
        x.states()
            .enumerate()
            .map(|(k, xk)| {
                for off in &offsets {
                    for ((vl, xl), ol) in v.iter_mut().zip(xk).zip(off) {
                        *vl = xl + ol;
                    }
                    if tube.margin(k, &v)? > 0.0 {
                        return Ok(true);
                    }
                }
                Ok(false)
            })
            .collect::<Result<Vec<bool>>>()
    });
    let mut profile = vec![0; tube.steps()];
    let mut violations = 0;
    for steps in excluded {
        let steps = steps?;
        for (p, &e) in profile.iter_mut().zip(&steps) {
            *p += e as usize;
        }
        violations += steps.iter().any(|&e| e) as usize;
    }
    Ok(ValidationReport {
        n_test: test.len(),
        violations,
        v_hat: violations as f64 / test.len() as f64,
        profile,
        comparison: None,
    })
}
