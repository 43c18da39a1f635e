//! A-posteriori certificates: adversarial complexity, violation levels and
//! distribution-shift bounds.

mod epsilon;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fit::{worst_vertex_margins, FitResult};
use crate::par::Execution;
use crate::perturbation::PerturbationModel;
use crate::trajectory::TrajectoryBatch;

pub use epsilon::{epsilon_roots, violation_polynomial, EpsilonRoots, RootFlag, MAX_BISECTIONS};

pub const DEFAULT_TOL_ACTIVE: f64 = 1e-6;

const MERGED_CONDITIONS: &str = "the approximate and true perturbation sets coincide for box and \
vertex-list models, so the 'violated on the approximation' and 'violated on the true set' \
conditions are the same test";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Some perturbation vertex has margin `> tol_active`.
    Violated,
    /// The worst vertex margin is within `tol_active` of zero.
    Active,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedIndex {
    pub index: usize,
    pub condition: Condition,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub s_star: usize,
    pub flagged_indices: Vec<FlaggedIndex>,
    pub tol_active: f64,
    pub note: String,
}

impl ComplexityReport {
    /// Builds the report from each trajectory's worst vertex margin.
    pub fn from_margins(margins: &[f64], tol_active: f64) -> Result<Self> {
        if !(tol_active >= 0.0 && tol_active.is_finite()) {
            return Err(Error::Input(format!(
                "tol_active = {tol_active} must be finite and nonnegative"
            )));
        }
        let flagged_indices: Vec<FlaggedIndex> = margins
            .iter()
            .enumerate()
            .filter_map(|(index, &m)| {
                let condition = if m > tol_active {
                    Condition::Violated
                } else if m.abs() <= tol_active {
                    Condition::Active
                } else {
                    return None;
                };
                Some(FlaggedIndex {
                    index,
                    condition,
                    worst_margin: m,
                })
            })
            .collect();
        Ok(Self {
            s_star: flagged_indices.len(),
            flagged_indices,
            tol_active,
            note: MERGED_CONDITIONS.into(),
        })
    }
}

pub fn adversarial_complexity(
    fit: &FitResult,
    batch: &TrajectoryBatch,
    model: &PerturbationModel,
    tol_active: f64,
) -> Result<ComplexityReport> {
    adversarial_complexity_with(fit, batch, model, tol_active, Execution::default())
}

pub fn adversarial_complexity_with(
    fit: &FitResult,
    batch: &TrajectoryBatch,
    model: &PerturbationModel,
    tol_active: f64,
    exec: Execution,
) -> Result<ComplexityReport> {
    check_dim(fit.slacks.len(), batch.len())?;
    let margins = worst_vertex_margins(&fit.tube, batch, model, exec)?;
    ComplexityReport::from_margins(&margins, tol_active)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodBound {
    pub mu_tilde: f64,
    pub radius: f64,
    /// `min(1, eps_hi + mu_tilde / radius)`.
    pub bound: f64,
    pub unclamped: f64,
    /// The unclamped bound exceeded 1.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub beta: f64,
    pub s_star: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub flags: Vec<RootFlag>,
    pub interpretation: String,
    pub ood: Option<OodBound>,
}

pub fn certificate(n: usize, beta: f64, report: &ComplexityReport) -> Result<Certificate> {
    let roots = epsilon_roots(n, report.s_star, beta)?;
    let mut interpretation = format!(
        "with confidence at least 1 - {beta} over the draw of the {n} training trajectories, \
         the probability that a perturbed fresh trajectory leaves the tube lies in [{}, {}]",
        roots.eps_lo, roots.eps_hi
    );
    if roots.flags.contains(&RootFlag::AllSupport) {
        interpretation.push_str("; every trajectory is in the support, so the upper level is vacuous");
    }
    if roots.flags.contains(&RootFlag::NoRoot) {
        interpretation.push_str("; the level equation has no root, so the upper level is reported as 1");
    }
    Ok(Certificate {
        n,
        beta,
        s_star: report.s_star,
        eps_lo: roots.eps_lo,
        eps_hi: roots.eps_hi,
        flags: roots.flags,
        interpretation,
        ood: None,
    })
}

/// Adds the out-of-distribution bound `eps_hi + mu_tilde / radius`.
pub fn ood_bound(cert: &Certificate, mu_tilde: f64, radius: f64) -> Result<Certificate> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Input(format!("perturbation radius R = {radius} must be positive")));
    }
    if !(mu_tilde >= 0.0 && mu_tilde.is_finite()) {
        return Err(Error::Input(format!("mu_tilde = {mu_tilde} must be nonnegative")));
    }
    let unclamped = cert.eps_hi + mu_tilde / radius;
    let mut out = cert.clone();
    out.ood = Some(OodBound {
        mu_tilde,
        radius,
        bound: unclamped.min(1.0),
        unclamped,
        vacuous: unclamped > 1.0,
    });
    Ok(out)
}

/// Independent Gaussian ingredients with per-axis standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

/// Closed-form 2-Wasserstein distance between two diagonal Gaussians,
/// `sqrt(‖Δμ‖² + Σ_j (σ_j − σ̂_j)²)`. It upper-bounds the 1-Wasserstein
/// distance and so serves as a shift radius `μ̃` for Gaussian ingredients.
pub fn gaussian_w2_bound(nominal: &GaussianParams, shifted: &GaussianParams) -> Result<f64> {
    let n = nominal.mean.len();
    check_dim(n, nominal.std_dev.len())?;
    check_dim(n, shifted.mean.len())?;
    check_dim(n, shifted.std_dev.len())?;
    for s in nominal.std_dev.iter().chain(&shifted.std_dev) {
        if !(*s > 0.0 && s.is_finite()) {
            return Err(Error::Input(format!("standard deviation {s} must be positive")));
        }
    }
    let mean: f64 = nominal
        .mean
        .iter()
        .zip(&shifted.mean)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let spread: f64 = nominal
        .std_dev
        .iter()
        .zip(&shifted.std_dev)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((mean + spread).sqrt())
}
