//! Sampled state trajectories.

use crate::error::{check_dim, Error, Result};

/// One state trajectory `x_0, ..., x_T` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from its states. All states must share one
    /// nonzero dimension and be finite.
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self> {
        let dim = states
            .first()
            .ok_or_else(|| Error::Input("trajectory needs at least one state".into()))?
            .len();
        let mut data = Vec::with_capacity(dim * states.len());
        for s in &states {
            check_dim(dim, s.len())?;
            data.extend_from_slice(s);
        }
        Self::from_flat(dim, data)
    }

    /// Builds a trajectory from `(T+1)·dim` row-major values.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("state dimension must be at least 1".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Input(format!(
                "{} values do not form whole states of dimension {dim}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite state entry {v}")));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states, `T + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.len() - 1
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// `N ≥ 1` trajectories sharing horizon and state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    trajectories: Vec<Trajectory>,
    /// Free-form description of where the samples came from.
    pub metadata: Option<String>,
}

impl TrajectoryBatch {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Input("batch needs at least one trajectory".into()))?;
        let (dim, len) = (first.dim(), first.len());
        for (i, t) in trajectories.iter().enumerate() {
            check_dim(dim, t.dim())?;
            if t.len() != len {
                return Err(Error::Input(format!(
                    "trajectory {i} has {} states, expected {len}",
                    t.len()
                )));
            }
        }
        Ok(Self {
            trajectories,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = Some(metadata.into());
        self
    }

    /// Number of trajectories `N`.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].horizon()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn get(&self, i: usize) -> &Trajectory {
        &self.trajectories[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }
}

impl<'a> IntoIterator for &'a TrajectoryBatch {
    type Item = &'a Trajectory;
    type IntoIter = std::slice::Iter<'a, Trajectory>;

    fn into_iter(self) -> Self::IntoIter {
        self.trajectories.iter()
    }
}
