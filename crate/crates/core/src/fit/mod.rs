//! Relaxed, adversarially robust scenario programs.
//!
//! Every geometry solves
//!
//! ```text
//! min  Σ_k S(R_k) + w·Σ_i ξ_i
//! s.t. g_k(x_k^{(i,j)}, θ_k) ≤ ξ_i   for every trajectory i, step k and
//!                                    perturbation vertex j,   ξ ≥ 0
//! ```
//!
//! with `w = ρ(T+1)` for balls and ellipsoids and `w = ρ` for zonotopes,
//! matching how each program is usually stated. One slack is shared by all
//! steps and vertices of a trajectory.
//!
//! After the solve (and the optional minimum-norm tie-break) the slacks are
//! recomputed exactly as `ξ_i = max(0, worst vertex margin)` from the
//! extracted tube, so the returned point is feasible by construction and the
//! reported objective is evaluated at that point.

mod program;
mod shapes;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicSolution, SolveStatus};
use crate::error::{check_dim, Error, Result};
use crate::matrix_serde;
use crate::par::{self, Execution};
use crate::perturbation::PerturbationModel;
use crate::trajectory::TrajectoryBatch;
use crate::tube::{check_generators, check_spd, PNorm, SizeProxy, TubeParams};

use program::{Encoded, NormShape, Samples};
pub use shapes::{default_shapes, step_covariance, DefaultShapes, ShapeKind};

/// Largest vertex-expanded sample count `|K| = N·(T+1)·|M|` a fit accepts.
pub const MAX_SAMPLES: usize = 10_000_000;

pub const DEFAULT_TOL: f64 = conic::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogdetMode {
    #[default]
    Diagonal,
    /// Full symmetric `C_k`. Needs semidefinite cones and is refused.
    Full,
}

/// Set family plus its fixed shape data. Empty shape lists are filled in
/// from the data by [`default_shapes`]; a single matrix is reused at every
/// step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum Geometry {
    Ball {
        p: PNorm,
    },
    EllipsoidFixed {
        #[serde(with = "matrix_serde", default)]
        shapes: Vec<DMatrix<f64>>,
    },
    EllipsoidLogdet {
        #[serde(default)]
        mode: LogdetMode,
    },
    Zonotope {
        #[serde(with = "matrix_serde", default)]
        generators: Vec<DMatrix<f64>>,
        /// Generator count for default shapes; `2·n_x` when absent.
        #[serde(default)]
        order: Option<usize>,
    },
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Ball { .. } => "ball",
            Geometry::EllipsoidFixed { .. } => "ellipsoid_fixed",
            Geometry::EllipsoidLogdet { .. } => "ellipsoid_logdet",
            Geometry::Zonotope { .. } => "zonotope",
        }
    }

    pub fn default_proxy(&self) -> SizeProxy {
        match self {
            Geometry::Ball { .. } => SizeProxy::Radius,
            Geometry::EllipsoidFixed { .. } => SizeProxy::Scale,
            Geometry::EllipsoidLogdet { .. } => SizeProxy::NegLogdet,
            Geometry::Zonotope { .. } => SizeProxy::HalfwidthSum,
        }
    }

    fn accepts(&self, proxy: SizeProxy) -> bool {
        matches!(
            (self, proxy),
            (Geometry::Ball { .. }, SizeProxy::Radius | SizeProxy::BallVolume)
                | (Geometry::EllipsoidFixed { .. }, SizeProxy::Scale)
                | (Geometry::EllipsoidLogdet { .. }, SizeProxy::NegLogdet)
                | (Geometry::Zonotope { .. }, SizeProxy::HalfwidthSum)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(flatten)]
    pub geometry: Geometry,
    pub rho: f64,
    pub perturbation: PerturbationModel,
    pub proxy: SizeProxy,
    pub tie_break: bool,
    /// Solver tolerance; also scales the tie-break objective budget.
    pub tol: f64,
}

impl FitConfig {
    pub fn new(geometry: Geometry, rho: f64) -> Self {
        Self {
            proxy: geometry.default_proxy(),
            geometry,
            rho,
            perturbation: PerturbationModel::none(),
            tie_break: true,
            tol: DEFAULT_TOL,
        }
    }

    pub fn ball(p: PNorm, rho: f64) -> Self {
        Self::new(Geometry::Ball { p }, rho)
    }

    pub fn ball_volume(p: PNorm, rho: f64) -> Self {
        Self::ball(p, rho).with_proxy(SizeProxy::BallVolume)
    }

    pub fn ellipsoid_fixed(shapes: Vec<DMatrix<f64>>, rho: f64) -> Self {
        Self::new(Geometry::EllipsoidFixed { shapes }, rho)
    }

    pub fn ellipsoid_logdet(rho: f64) -> Self {
        Self::new(
            Geometry::EllipsoidLogdet {
                mode: LogdetMode::Diagonal,
            },
            rho,
        )
    }

    pub fn zonotope(generators: Vec<DMatrix<f64>>, rho: f64) -> Self {
        Self::new(
            Geometry::Zonotope {
                generators,
                order: None,
            },
            rho,
        )
    }

    pub fn with_perturbation(mut self, model: PerturbationModel) -> Self {
        self.perturbation = model;
        self
    }

    pub fn with_proxy(mut self, proxy: SizeProxy) -> Self {
        self.proxy = proxy;
        self
    }

    pub fn with_tie_break(mut self, on: bool) -> Self {
        self.tie_break = on;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Input(format!("rho = {} must be positive and finite", self.rho)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Input(format!("tolerance {} must lie in (0, 1)", self.tol)));
        }
        if !self.geometry.accepts(self.proxy) {
            return Err(Error::Config(format!(
                "size proxy {:?} does not apply to {} tubes",
                self.proxy,
                self.geometry.name()
            )));
        }
        if let Geometry::EllipsoidLogdet {
            mode: LogdetMode::Full,
        } = self.geometry
        {
            return Err(Error::Config(
                "full-matrix log-det ellipsoids need semidefinite cones and are disabled; \
                 use the diagonal mode"
                    .into(),
            ));
        }
        self.perturbation.validate()
    }

    /// Weight of `Σ ξ_i` in the objective.
    pub fn slack_weight(&self, steps: usize) -> f64 {
        match self.geometry {
            Geometry::Zonotope { .. } => self.rho,
            _ => self.rho * steps as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TieBreak {
    Disabled,
    Applied { iterations: u32 },
    /// The second solve failed; the first solution was kept.
    Fallback { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: u32,
    pub gap: f64,
    pub reduced_accuracy: bool,
    /// Optimal value reported by the primary solve, before slack recomputation.
    pub solver_objective: f64,
    /// `|K|`, the number of vertex-expanded samples.
    pub samples: usize,
    pub variables: usize,
    pub rows: usize,
    pub tie_break: TieBreak,
    /// Shape defaults and other non-fatal events.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub tube: TubeParams,
    pub slacks: Vec<f64>,
    pub objective_value: f64,
    /// `max_{k,j}` margin of each trajectory's perturbation vertices.
    pub per_trajectory_worst_margin: Vec<f64>,
    pub rho: f64,
    pub proxy: SizeProxy,
    pub diagnostics: SolverDiagnostics,
}

impl FitResult {
    pub fn size_total(&self) -> f64 {
        // The proxy was validated against the geometry before solving.
        self.tube
            .size_report(self.proxy)
            .map(|r| r.total)
            .unwrap_or(f64::NAN)
    }

    pub fn slack_total(&self) -> f64 {
        self.slacks.iter().sum()
    }
}

/// Worst margin over all steps and perturbation vertices of each trajectory.
pub fn worst_vertex_margins(
    tube: &TubeParams,
    batch: &TrajectoryBatch,
    model: &PerturbationModel,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_dim(tube.dim(), batch.dim())?;
    check_dim(tube.steps(), batch.horizon() + 1)?;
    let offsets = model.offsets(batch.dim())?;
    let margins = par::map_slice(batch.trajectories(), exec, |x| {
        let mut worst = f64::NEG_INFINITY;
        let mut v = vec![0.0; x.dim()];
        for (k, xk) in x.states().enumerate() {
            for off in &offsets {
                for ((vl, xl), ol) in v.iter_mut().zip(xk).zip(off) {
                    *vl = xl + ol;
                }
                worst = worst.max(tube.margin(k, &v)?);
            }
        }
        Ok(worst)
    });
    margins.into_iter().collect()
}

fn resolve_shapes(
    given: &[DMatrix<f64>],
    batch: &TrajectoryBatch,
    kind: ShapeKind,
    notes: &mut Vec<String>,
) -> Result<Vec<DMatrix<f64>>> {
    let steps = batch.horizon() + 1;
    match given.len() {
        0 => {
            let d = default_shapes(batch, kind)?;
            if !d.fallback_steps.is_empty() {
                notes.push(format!(
                    "rank-deficient sample covariance at steps {:?}; identity-based shapes used",
                    d.fallback_steps
                ));
            }
            Ok(d.matrices)
        }
        1 => Ok(vec![given[0].clone(); steps]),
        len if len == steps => Ok(given.to_vec()),
        len => Err(Error::Input(format!(
            "expected 1 or {steps} shape matrices, found {len}"
        ))),
    }
}

fn solver_error(sol: &ConicSolution) -> Error {
    Error::Solver {
        status: format!("{:?}", sol.status),
        detail: format!("after {} iterations, gap {:e}", sol.iterations, sol.gap),
    }
}

/// Fits the configured geometry, evaluating margins on the default pool.
pub fn fit(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    fit_with(batch, cfg, Execution::default())
}

pub fn fit_with(batch: &TrajectoryBatch, cfg: &FitConfig, exec: Execution) -> Result<FitResult> {
    cfg.validate()?;
    let n = batch.dim();
    let steps = batch.horizon() + 1;
    let offsets = cfg.perturbation.offsets(n)?;
    let samples = batch
        .len()
        .checked_mul(steps)
        .and_then(|v| v.checked_mul(offsets.len()))
        .filter(|&v| v <= MAX_SAMPLES)
        .ok_or_else(|| {
            Error::Config(format!(
                "N·(T+1)·|M| = {}·{}·{} exceeds the limit of {MAX_SAMPLES} samples",
                batch.len(),
                steps,
                offsets.len()
            ))
        })?;
    let s = Samples {
        batch,
        offsets: &offsets,
    };
    let weight = cfg.slack_weight(steps);
    let mut notes = Vec::new();

    let encoded: Encoded = match &cfg.geometry {
        Geometry::Ball { p } => program::encode_norm(
            &s,
            NormShape::Ball {
                p: *p,
                volume: cfg.proxy == SizeProxy::BallVolume,
            },
            weight,
        ),
        Geometry::EllipsoidFixed { shapes } => {
            let h = resolve_shapes(shapes, batch, ShapeKind::Ellipsoid, &mut notes)?;
            for (k, hk) in h.iter().enumerate() {
                check_dim(n, hk.nrows())?;
                check_spd(hk, &format!("H_{k}"))?;
            }
            program::encode_norm(&s, NormShape::Ellipsoid(&h), weight)
        }
        Geometry::EllipsoidLogdet { .. } => program::encode_logdet(&s, weight)?,
        Geometry::Zonotope { generators, order } => {
            let kind = ShapeKind::Zonotope {
                order: order.unwrap_or(2 * n),
            };
            let g = resolve_shapes(generators, batch, kind, &mut notes)?;
            for gk in &g {
                check_generators(gk, n)?;
                if gk.ncols() != g[0].ncols() {
                    return Err(Error::Input("all G_k must have the same number of columns".into()));
                }
            }
            program::encode_zonotope(&s, &g, weight)
        }
    };

    let prog = &encoded.program;
    let first = conic::solve(prog, cfg.tol)?;
    if !first.is_optimal() {
        return Err(solver_error(&first));
    }
    let (primal, tie_break) = if cfg.tie_break {
        match conic::tie_break(prog, first.objective_value, cfg.tol) {
            Ok(t) if t.is_optimal() => (
                t.primal,
                TieBreak::Applied {
                    iterations: t.iterations,
                },
            ),
            Ok(t) => (
                first.primal.clone(),
                TieBreak::Fallback {
                    reason: format!("{:?}", t.status),
                },
            ),
            Err(e) => (first.primal.clone(), TieBreak::Fallback { reason: e.to_string() }),
        }
    } else {
        (first.primal.clone(), TieBreak::Disabled)
    };

    let tube = encoded.tube(&primal, n, steps)?;
    let margins = worst_vertex_margins(&tube, batch, &cfg.perturbation, exec)?;
    if let Some(m) = margins.iter().find(|m| !m.is_finite()) {
        return Err(Error::Numerical(format!("fitted tube yields margin {m}")));
    }
    let slacks: Vec<f64> = margins.iter().map(|m| m.max(0.0)).collect();
    let size = tube.size_report(cfg.proxy)?.total;
    let objective_value = size + weight * slacks.iter().sum::<f64>();

    Ok(FitResult {
        tube,
        slacks,
        objective_value,
        per_trajectory_worst_margin: margins,
        rho: cfg.rho,
        proxy: cfg.proxy,
        diagnostics: SolverDiagnostics {
            status: first.status,
            iterations: first.iterations,
            gap: first.gap,
            reduced_accuracy: first.reduced_accuracy,
            solver_objective: first.objective_value,
            samples,
            variables: prog.num_vars,
            rows: prog.num_rows(),
            tie_break,
            notes,
        },
    })
}

fn expect_geometry(cfg: &FitConfig, name: &str, proxies: &[SizeProxy]) -> Result<()> {
    if cfg.geometry.name() != name || !proxies.contains(&cfg.proxy) {
        return Err(Error::Config(format!(
            "expected a {name} configuration with proxy in {proxies:?}, got {} with {:?}",
            cfg.geometry.name(),
            cfg.proxy
        )));
    }
    Ok(())
}

/// Ball tube with the radius proxy `Σ_k r_k`.
pub fn fit_ball_radius(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    expect_geometry(cfg, "ball", &[SizeProxy::Radius])?;
    fit(batch, cfg)
}

/// Ball tube with the volume objective `Σ_k Vol(B_p) r_k^{n_x}`.
pub fn fit_ball_volume(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    expect_geometry(cfg, "ball", &[SizeProxy::BallVolume])?;
    fit(batch, cfg)
}

pub fn fit_ellipsoid_fixed(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    expect_geometry(cfg, "ellipsoid_fixed", &[SizeProxy::Scale])?;
    fit(batch, cfg)
}

pub fn fit_ellipsoid_logdet(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    expect_geometry(cfg, "ellipsoid_logdet", &[SizeProxy::NegLogdet])?;
    fit(batch, cfg)
}

pub fn fit_zonotope(batch: &TrajectoryBatch, cfg: &FitConfig) -> Result<FitResult> {
    expect_geometry(cfg, "zonotope", &[SizeProxy::HalfwidthSum])?;
    fit(batch, cfg)
}
