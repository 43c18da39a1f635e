//! Data-driven default shape matrices for the fixed-shape geometries.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryBatch;

const REGULARIZATION: f64 = 1e-6;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    /// `H_k = (Σ_k + 10⁻⁶ I)^{-1/2}`.
    Ellipsoid,
    /// `G_k = [I | top principal directions]` with `order` columns.
    Zonotope { order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultShapes {
    pub matrices: Vec<DMatrix<f64>>,
    /// Timesteps whose sample covariance was rank deficient and that fell
    /// back to identity-based shapes.
    pub fallback_steps: Vec<usize>,
}

/// Sample covariance of the states at step `k`.
pub fn step_covariance(batch: &TrajectoryBatch, k: usize) -> DMatrix<f64> {
    let n = batch.dim();
    let count = batch.len() as f64;
    let mut mean = DVector::zeros(n);
    for x in batch {
        mean += DVector::from_column_slice(x.state(k));
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for x in batch {
        let d = DVector::from_column_slice(x.state(k)) - &mean;
        cov += &d * d.transpose();
    }
    cov / (count - 1.0).max(1.0)
}

/// Eigenpairs in descending eigenvalue order, each eigenvector signed so
/// its largest-magnitude entry is positive.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| {
            let v = eig.eigenvectors.column(j).into_owned();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect();
    (values, vectors)
}

fn rank_deficient(values: &[f64]) -> bool {
    let max = values.first().copied().unwrap_or(0.0);
    let min = values.last().copied().unwrap_or(0.0);
    max <= 0.0 || min <= RANK_TOL * max
}

pub fn default_shapes(batch: &TrajectoryBatch, kind: ShapeKind) -> Result<DefaultShapes> {
    if batch.len() < 2 {
        return Err(Error::Input("default shapes need at least two trajectories".into()));
    }
    let n = batch.dim();
    if let ShapeKind::Zonotope { order } = kind {
        if order < n || order > 2 * n {
            return Err(Error::Config(format!(
                "zonotope order {order} outside [{n}, {}]",
                2 * n
            )));
        }
    }
    let mut matrices = Vec::with_capacity(batch.horizon() + 1);
    let mut fallback_steps = Vec::new();
    for k in 0..=batch.horizon() {
        let cov = step_covariance(batch, k);
        let (values, vectors) = sorted_eigen(&cov);
        let fallback = rank_deficient(&values);
        if fallback {
            fallback_steps.push(k);
        }
        let m = match kind {
            ShapeKind::Ellipsoid if fallback => DMatrix::identity(n, n),
            ShapeKind::Ellipsoid => {
                let mut h = DMatrix::zeros(n, n);
                for (lambda, v) in values.iter().zip(&vectors) {
                    h += v * v.transpose() / (lambda + REGULARIZATION).sqrt();
                }
                // Symmetrize away rounding so downstream SPD checks see an
                // exactly symmetric matrix.
                (&h + h.transpose()) * 0.5
            }
            ShapeKind::Zonotope { order } => {
                let mut g = DMatrix::zeros(n, order);
                for j in 0..n {
                    g[(j, j)] = 1.0;
                }
                for extra in 0..order - n {
                    if fallback {
                        g[(extra, n + extra)] = 1.0;
                    } else {
                        g.column_mut(n + extra).copy_from(&vectors[extra]);
                    }
                }
                g
            }
        };
        matrices.push(m);
    }
    Ok(DefaultShapes {
        matrices,
        fallback_steps,
    })
}
