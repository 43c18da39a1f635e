//! Adversarial perturbation sets around sampled states.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lp::hull_contains_origin;

/// Largest state dimension for which box vertices are enumerated.
pub const MAX_BOX_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    /// Axis-aligned box with per-axis half-widths.
    Box { radii: Vec<f64> },
    /// Polytope given by its vertex offsets from the nominal state.
    VertexList { offsets: Vec<Vec<f64>> },
}

/// The perturbation set applied to every sampled state, together with the
/// radius `R` of that set under the chosen metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationModel {
    pub kind: PerturbationKind,
    pub radius: f64,
}

impl PerturbationModel {
    pub fn none() -> Self {
        Self {
            kind: PerturbationKind::None,
            radius: 0.0,
        }
    }

    /// Box model; its radius is the ∞-norm radius `max_j γ_j`.
    pub fn boxed(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Input("box perturbation needs at least one axis".into()));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Input(format!("box radius {r} must be finite and nonnegative")));
        }
        let radius = radii.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            kind: PerturbationKind::Box { radii },
            radius,
        })
    }

    /// Box with the same half-width `gamma` on each of `dim` axes.
    pub fn uniform_box(dim: usize, gamma: f64) -> Result<Self> {
        Self::boxed(vec![gamma; dim])
    }

    /// Explicit polytope. The offsets' convex hull must contain the origin so
    /// that the nominal sample itself belongs to its perturbation set.
    pub fn vertex_list(offsets: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        let dim = offsets
            .first()
            .ok_or_else(|| Error::Input("vertex list must not be empty".into()))?
            .len();
        for o in &offsets {
            check_dim(dim, o.len())?;
            if o.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("vertex offsets must be finite".into()));
            }
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::Input(format!("radius {radius} must be finite and nonnegative")));
        }
        let has_zero = offsets.iter().any(|o| o.iter().all(|v| *v == 0.0));
        if !has_zero && !hull_contains_origin(&offsets)? {
            return Err(Error::Input(
                "convex hull of the vertex offsets does not contain the origin".into(),
            ));
        }
        Ok(Self {
            kind: PerturbationKind::VertexList { offsets },
            radius,
        })
    }

    /// Checks the invariants of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = match &self.kind {
            PerturbationKind::None => Self::none(),
            PerturbationKind::Box { radii } => Self::boxed(radii.clone())?,
            PerturbationKind::VertexList { offsets } => {
                Self::vertex_list(offsets.clone(), self.radius)?
            }
        };
        if let PerturbationKind::Box { .. } = self.kind {
            if (rebuilt.radius - self.radius).abs() > 0.0 {
                return Err(Error::Input(format!(
                    "box radius R = {} must equal the largest half-width {}",
                    self.radius, rebuilt.radius
                )));
            }
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::Input("radius must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Offsets added to a nominal state, in deterministic order: sign patterns
    /// in lexicographic order (− before +, first axis most significant) for
    /// boxes, list order for vertex lists.
    pub fn offsets(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            PerturbationKind::None => Ok(vec![vec![0.0; dim]]),
            PerturbationKind::Box { radii } => {
                check_dim(dim, radii.len())?;
                if dim > MAX_BOX_DIM {
                    return Err(Error::Config(format!(
                        "box perturbation in {dim} dimensions would enumerate 2^{dim} vertices; \
                         supply an explicit vertex list instead"
                    )));
                }
                Ok((0..1usize << dim)
                    .map(|pattern| {
                        (0..dim)
                            .map(|j| {
                                let plus = pattern >> (dim - 1 - j) & 1 == 1;
                                if plus {
                                    radii[j]
                                } else {
                                    -radii[j]
                                }
                            })
                            .collect()
                    })
                    .collect())
            }
            PerturbationKind::VertexList { offsets } => {
                check_dim(dim, offsets[0].len())?;
                Ok(offsets.clone())
            }
        }
    }

    /// Number of perturbation vertices `|M|` per state.
    pub fn vertex_count(&self, dim: usize) -> Result<usize> {
        match &self.kind {
            PerturbationKind::None => Ok(1),
            PerturbationKind::Box { .. } => self.offsets(dim).map(|o| o.len()),
            PerturbationKind::VertexList { offsets } => Ok(offsets.len()),
        }
    }

    /// The perturbed copies of `x_k` that the robust program must cover.
    pub fn vertices(&self, x_k: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .offsets(x_k.len())?
            .into_iter()
            .map(|o| x_k.iter().zip(o).map(|(x, d)| x + d).collect())
            .collect())
    }
}
