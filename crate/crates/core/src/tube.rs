//! Reachable tubes: one convex set per timestep, constraint margins and size
//! proxies.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lp::{GeneralLp, LpOutcome};
use crate::matrix_serde;
use crate::trajectory::Trajectory;

/// Supported ball norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PNorm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    Inf,
}

impl PNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            PNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            PNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PNorm::L1 => "1",
            PNorm::L2 => "2",
            PNorm::Inf => "inf",
        })
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(PNorm::L1),
            "2" => Ok(PNorm::L2),
            "inf" | "Inf" | "infinity" => Ok(PNorm::Inf),
            other => Err(Error::Input(format!("unsupported norm p = {other}; use 1, 2 or inf"))),
        }
    }
}

/// Volume of the unit `p`-ball in `n` dimensions.
pub fn unit_ball_volume(p: PNorm, n: usize) -> f64 {
    match p {
        PNorm::L1 => (1..=n).fold(1.0, |v, i| v * 2.0 / i as f64),
        PNorm::Inf => 2f64.powi(n as i32),
        PNorm::L2 => PI.powf(n as f64 / 2.0) / gamma_half_integer(n + 2),
    }
}

/// `Γ(m / 2)` for integer `m ≥ 1`.
fn gamma_half_integer(m: usize) -> f64 {
    let (mut g, mut x) = if m % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x + 1e-9 < m as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Size proxies for a single set of the tube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeProxy {
    Radius,
    Scale,
    HalfwidthSum,
    BallVolume,
    NegLogdet,
}

impl std::str::FromStr for SizeProxy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "radius" => Ok(SizeProxy::Radius),
            "scale" => Ok(SizeProxy::Scale),
            "halfwidth_sum" => Ok(SizeProxy::HalfwidthSum),
            "ball_volume" | "volume" => Ok(SizeProxy::BallVolume),
            "neg_logdet" | "logdet" => Ok(SizeProxy::NegLogdet),
            other => Err(Error::Input(format!("unknown size proxy {other}"))),
        }
    }
}

/// Per-timestep parameters of a fitted tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum TubeParams {
    /// `{x : ‖x − c_k‖_p ≤ r_k}`
    Ball {
        p: PNorm,
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
    },
    /// `{x : ‖H_k (x − c_k)‖₂ ≤ s_k}` with fixed shape `H_k`.
    EllipsoidFixed {
        #[serde(with = "matrix_serde")]
        shapes: Vec<DMatrix<f64>>,
        centers: Vec<Vec<f64>>,
        scales: Vec<f64>,
    },
    /// `{x : ‖C_k x + b_k‖₂ ≤ 1}`
    EllipsoidLogdet {
        #[serde(with = "matrix_serde")]
        matrices: Vec<DMatrix<f64>>,
        offsets: Vec<Vec<f64>>,
    },
    /// `{c_k + G_k ζ : |ζ| ≤ a_k}`
    Zonotope {
        #[serde(with = "matrix_serde")]
        generators: Vec<DMatrix<f64>>,
        centers: Vec<Vec<f64>>,
        half_widths: Vec<Vec<f64>>,
    },
}

fn check_vectors(vs: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    for v in vs {
        check_dim(dim, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input(format!("{what} must be finite")));
        }
    }
    Ok(())
}

fn check_nonnegative(vs: &[f64], what: &str) -> Result<()> {
    match vs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(Error::Input(format!("{what} {v} must be finite and nonnegative"))),
        None => Ok(()),
    }
}

fn check_count(expected: usize, found: usize, what: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "{what}: expected {expected} timesteps, found {found}"
        )))
    }
}

/// Symmetric positive definite up to a small relative tolerance.
pub(crate) fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Input(format!("{what} must be square")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::Input(format!("{what} must be symmetric")));
    }
    if m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
        return Err(Error::Input(format!("{what} must be positive definite")));
    }
    Ok(())
}

/// Full row rank with at least as many generators as dimensions.
pub(crate) fn check_generators(g: &DMatrix<f64>, dim: usize) -> Result<()> {
    check_dim(dim, g.nrows())?;
    if g.ncols() < dim {
        return Err(Error::Input(format!(
            "zonotope needs m ≥ n_x generators, got {} < {dim}",
            g.ncols()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("generator entries must be finite".into()));
    }
    let sv = g.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 || sv.min() <= 1e-10 * max {
        return Err(Error::Input("generator matrix must have full row rank".into()));
    }
    Ok(())
}

impl TubeParams {
    pub fn ball(p: PNorm, centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        let t = TubeParams::Ball { p, centers, radii };
        t.validate()?;
        Ok(t)
    }

    pub fn ellipsoid_fixed(
        shapes: Vec<DMatrix<f64>>,
        centers: Vec<Vec<f64>>,
        scales: Vec<f64>,
    ) -> Result<Self> {
        let t = TubeParams::EllipsoidFixed {
            shapes,
            centers,
            scales,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn ellipsoid_logdet(matrices: Vec<DMatrix<f64>>, offsets: Vec<Vec<f64>>) -> Result<Self> {
        let t = TubeParams::EllipsoidLogdet { matrices, offsets };
        t.validate()?;
        Ok(t)
    }

    pub fn zonotope(
        generators: Vec<DMatrix<f64>>,
        centers: Vec<Vec<f64>>,
        half_widths: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let t = TubeParams::Zonotope {
            generators,
            centers,
            half_widths,
        };
        t.validate()?;
        Ok(t)
    }

    /// Checks every structural invariant; constructors call this.
    pub fn validate(&self) -> Result<()> {
        let steps = self.steps();
        if steps == 0 {
            return Err(Error::Input("tube needs at least one timestep".into()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Input("tube state dimension must be at least 1".into()));
        }
        match self {
            TubeParams::Ball { centers, radii, .. } => {
                check_count(steps, radii.len(), "radii")?;
                check_vectors(centers, dim, "centers")?;
                check_nonnegative(radii, "radius")
            }
            TubeParams::EllipsoidFixed {
                shapes,
                centers,
                scales,
            } => {
                check_count(steps, shapes.len(), "shapes")?;
                check_count(steps, scales.len(), "scales")?;
                check_vectors(centers, dim, "centers")?;
                check_nonnegative(scales, "scale")?;
                for h in shapes {
                    check_dim(dim, h.nrows())?;
                    check_spd(h, "shape matrix H_k")?;
                }
                Ok(())
            }
            TubeParams::EllipsoidLogdet { matrices, offsets } => {
                check_count(steps, matrices.len(), "matrices")?;
                check_vectors(offsets, dim, "offsets")?;
                for c in matrices {
                    check_dim(dim, c.nrows())?;
                    check_spd(c, "ellipsoid matrix C_k")?;
                }
                Ok(())
            }
            TubeParams::Zonotope {
                generators,
                centers,
                half_widths,
            } => {
                check_count(steps, generators.len(), "generators")?;
                check_count(steps, half_widths.len(), "half-widths")?;
                check_vectors(centers, dim, "centers")?;
                for (g, a) in generators.iter().zip(half_widths) {
                    check_generators(g, dim)?;
                    check_dim(g.ncols(), a.len())?;
                    check_nonnegative(a, "half-width")?;
                }
                Ok(())
            }
        }
    }

    /// Number of sets, `T + 1`.
    pub fn steps(&self) -> usize {
        match self {
            TubeParams::Ball { centers, .. }
            | TubeParams::EllipsoidFixed { centers, .. }
            | TubeParams::Zonotope { centers, .. } => centers.len(),
            TubeParams::EllipsoidLogdet { offsets, .. } => offsets.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TubeParams::Ball { centers, .. }
            | TubeParams::EllipsoidFixed { centers, .. }
            | TubeParams::Zonotope { centers, .. } => centers.first().map_or(0, Vec::len),
            TubeParams::EllipsoidLogdet { offsets, .. } => offsets.first().map_or(0, Vec::len),
        }
    }

    pub fn geometry_name(&self) -> &'static str {
        match self {
            TubeParams::Ball { .. } => "ball",
            TubeParams::EllipsoidFixed { .. } => "ellipsoid_fixed",
            TubeParams::EllipsoidLogdet { .. } => "ellipsoid_logdet",
            TubeParams::Zonotope { .. } => "zonotope",
        }
    }

    /// The proxy the corresponding fit minimizes by default.
    pub fn natural_proxy(&self) -> SizeProxy {
        match self {
            TubeParams::Ball { .. } => SizeProxy::Radius,
            TubeParams::EllipsoidFixed { .. } => SizeProxy::Scale,
            TubeParams::EllipsoidLogdet { .. } => SizeProxy::NegLogdet,
            TubeParams::Zonotope { .. } => SizeProxy::HalfwidthSum,
        }
    }

    /// Smallest relaxation `ξ` for which `x_k` satisfies the k-th set
    /// constraint; `x_k` lies in the set iff the margin is `≤ 0`.
    pub fn margin(&self, k: usize, x_k: &[f64]) -> Result<f64> {
        let steps = self.steps();
        if k >= steps {
            return Err(Error::Input(format!("timestep {k} outside tube of {steps} sets")));
        }
        check_dim(self.dim(), x_k.len())?;
        Ok(match self {
            TubeParams::Ball { p, centers, radii } => {
                let d: Vec<f64> = x_k.iter().zip(&centers[k]).map(|(x, c)| x - c).collect();
                p.norm(&d) - radii[k]
            }
            TubeParams::EllipsoidFixed {
                shapes,
                centers,
                scales,
            } => {
                let d = DVector::from_iterator(
                    x_k.len(),
                    x_k.iter().zip(&centers[k]).map(|(x, c)| x - c),
                );
                (&shapes[k] * d).norm() - scales[k]
            }
            TubeParams::EllipsoidLogdet { matrices, offsets } => {
                let x = DVector::from_column_slice(x_k);
                (&matrices[k] * x + DVector::from_column_slice(&offsets[k])).norm() - 1.0
            }
            TubeParams::Zonotope {
                generators,
                centers,
                half_widths,
            } => zonotope_margin(&generators[k], &centers[k], &half_widths[k], x_k)?,
        })
    }

    /// `max_k margin(k, x_k)`; the trajectory lies in the tube iff this is `≤ 0`.
    pub fn trajectory_margin(&self, x: &Trajectory) -> Result<f64> {
        check_dim(self.steps(), x.len())?;
        let mut worst = f64::NEG_INFINITY;
        for (k, s) in x.states().enumerate() {
            worst = worst.max(self.margin(k, s)?);
        }
        Ok(worst)
    }

    pub fn size_proxy(&self, k: usize, proxy: SizeProxy) -> Result<f64> {
        if k >= self.steps() {
            return Err(Error::Input(format!("timestep {k} outside tube")));
        }
        let incompatible = || {
            Err(Error::Input(format!(
                "size proxy {proxy:?} does not apply to {} tubes",
                self.geometry_name()
            )))
        };
        match (self, proxy) {
            (TubeParams::Ball { radii, .. }, SizeProxy::Radius) => Ok(radii[k]),
            (TubeParams::Ball { p, radii, centers }, SizeProxy::BallVolume) => {
                let n = centers[k].len();
                Ok(unit_ball_volume(*p, n) * radii[k].powi(n as i32))
            }
            (TubeParams::EllipsoidFixed { scales, .. }, SizeProxy::Scale) => Ok(scales[k]),
            (TubeParams::Zonotope { half_widths, .. }, SizeProxy::HalfwidthSum) => {
                Ok(half_widths[k].iter().sum())
            }
            (TubeParams::EllipsoidLogdet { matrices, .. }, SizeProxy::NegLogdet) => {
                let chol = matrices[k].clone().cholesky().ok_or_else(|| {
                    Error::Numerical(format!("C_{k} lost positive definiteness"))
                })?;
                Ok(-2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
            }
            _ => incompatible(),
        }
    }

    pub fn size_report(&self, proxy: SizeProxy) -> Result<SizeReport> {
        let per_k = (0..self.steps())
            .map(|k| self.size_proxy(k, proxy))
            .collect::<Result<Vec<_>>>()?;
        Ok(SizeReport::new(per_k))
    }
}

/// Size proxy values per timestep and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub per_k: Vec<f64>,
    pub total: f64,
}

impl SizeReport {
    pub fn new(per_k: Vec<f64>) -> Self {
        let total = per_k.iter().sum();
        Self { per_k, total }
    }
}

/// `min{ξ : ∃ζ, c + Gζ = x, |ζ| ≤ a + ξ·1}`, or `+∞` when `x − c` is not in
/// the range of `G`.
pub fn zonotope_margin(g: &DMatrix<f64>, c: &[f64], a: &[f64], x: &[f64]) -> Result<f64> {
    let (n, m) = g.shape();
    check_dim(n, x.len())?;
    check_dim(n, c.len())?;
    check_dim(m, a.len())?;
    let vars = m + 1;
    let mut objective = vec![0.0; vars];
    objective[m] = 1.0;
    let mut lp = GeneralLp::new(objective);
    for j in 0..m {
        let mut lower = vec![0.0; vars];
        lower[m] = 1.0;
        lower[j] = -1.0;
        lp.ge(lower, -a[j]);
        let mut upper = vec![0.0; vars];
        upper[m] = 1.0;
        upper[j] = 1.0;
        lp.ge(upper, -a[j]);
    }
    for r in 0..n {
        let mut row = vec![0.0; vars];
        for j in 0..m {
            row[j] = g[(r, j)];
        }
        lp.eq(row, x[r] - c[r]);
    }
    match lp.solve()? {
        LpOutcome::Optimal(sol) => Ok(sol.x[m]),
        LpOutcome::Infeasible => Ok(f64::INFINITY),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "zonotope margin program reported unbounded".into(),
        )),
    }
}
