use reachtube::certify::{Certificate, ComplexityReport};
use reachtube::fit::{FitConfig, FitResult};
use reachtube::simulate::ValidationReport;
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// The training data a fit was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySource {
    /// As given on the command line.
    pub path: String,
    pub sha256: String,
    pub n: usize,
    pub horizon: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of the resolved fit settings and the training data hash.
    pub config_hash: String,
    pub trajectories: TrajectorySource,
    /// SHA-256 of the resolved certification settings, once certified.
    pub certify_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub provenance: Provenance,
    pub fit_config: FitConfig,
    /// Absent when the solver failed; `error` then says why.
    pub fit: Option<FitResult>,
    pub size_total: Option<f64>,
    pub slack_total: Option<f64>,
    pub error: Option<String>,
    pub complexity: Option<ComplexityReport>,
    pub certificate: Option<Certificate>,
    pub validation: Vec<ValidationReport>,
}
