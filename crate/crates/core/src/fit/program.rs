//! Conic encodings of the robust scenario programs, one per geometry.
//!
//! Variable layout is `θ` first (centers, then sizes, or `d`, `b` for the
//! log-det ellipsoid), then the slacks `ξ`, then auxiliaries. Constraints
//! are emitted equality block first, then one merged orthant block, then
//! the curved cones.

use nalgebra::DMatrix;

use crate::conic::{AffineExpr, Cone, ConicProgram};
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryBatch;
use crate::tube::{unit_ball_volume, PNorm, TubeParams};

/// A batch expanded by perturbation offsets.
pub(crate) struct Samples<'a> {
    pub batch: &'a TrajectoryBatch,
    pub offsets: &'a [Vec<f64>],
}

impl Samples<'_> {
    pub fn dim(&self) -> usize {
        self.batch.dim()
    }

    pub fn steps(&self) -> usize {
        self.batch.horizon() + 1
    }

    pub fn len(&self) -> usize {
        self.batch.len()
    }

    /// Calls `f(i, k, vertex)` for every `(j, k, i) ∈ K`.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, &[f64])) {
        let mut v = vec![0.0; self.dim()];
        for (i, x) in self.batch.iter().enumerate() {
            for (k, xk) in x.states().enumerate() {
                for off in self.offsets {
                    for ((vl, xl), ol) in v.iter_mut().zip(xk).zip(off) {
                        *vl = xl + ol;
                    }
                    f(i, k, &v);
                }
            }
        }
    }
}

#[derive(Default)]
struct Rows {
    zero: Vec<AffineExpr>,
    nonneg: Vec<AffineExpr>,
    cones: Vec<(Cone, Vec<AffineExpr>)>,
}

impl Rows {
    fn into_program(self, p: &mut ConicProgram) {
        for e in self.zero {
            p.equal_zero(e);
        }
        for e in self.nonneg {
            p.nonnegative(e);
        }
        for (cone, rows) in self.cones {
            p.add_constraint(cone, rows);
        }
    }
}

pub(crate) struct Encoded {
    pub program: ConicProgram,
    decode: Decode,
}

enum Decode {
    Ball(PNorm),
    Ellipsoid(Vec<DMatrix<f64>>),
    Logdet,
    Zonotope(Vec<DMatrix<f64>>),
}

/// Norm cells `‖H_k (x − c_k)‖ ≤ s_k + ξ_i`.
pub(crate) enum NormShape<'a> {
    Ball { p: PNorm, volume: bool },
    Ellipsoid(&'a [DMatrix<f64>]),
}

pub(crate) fn encode_norm(s: &Samples, shape: NormShape, xi_weight: f64) -> Encoded {
    let (n, steps, count) = (s.dim(), s.steps(), s.len());
    let mut p = ConicProgram::new();
    let c = p.add_vars(steps * n);
    let size = p.add_vars(steps);
    let xi = p.add_vars(count);
    p.decision_vars = (0..xi).collect();
    for i in 0..count {
        p.set_cost(xi + i, xi_weight);
    }
    let mut rows = Rows::default();
    for k in 0..steps {
        rows.nonneg.push(AffineExpr::var(size + k));
    }
    for i in 0..count {
        rows.nonneg.push(AffineExpr::var(xi + i));
    }

    match shape {
        NormShape::Ball { p: norm, volume } if volume && n > 1 => {
            let u = p.add_vars(steps);
            let vol = unit_ball_volume(norm, n);
            for k in 0..steps {
                p.set_cost(u + k, vol);
                rows.cones.push((
                    Cone::Power { alpha: 1.0 / n as f64 },
                    vec![
                        AffineExpr::var(u + k),
                        AffineExpr::constant(1.0),
                        AffineExpr::var(size + k),
                    ],
                ));
            }
        }
        NormShape::Ball { p: norm, volume } => {
            let w = if volume { unit_ball_volume(norm, n) } else { 1.0 };
            for k in 0..steps {
                p.set_cost(size + k, w);
            }
        }
        NormShape::Ellipsoid(_) => {
            for k in 0..steps {
                p.set_cost(size + k, 1.0);
            }
        }
    }

    let bound = |i: usize, k: usize| AffineExpr::var(size + k).plus(xi + i, 1.0);
    let diff = |k: usize, l: usize, v: &[f64]| AffineExpr::term(c + k * n + l, -1.0).offset(v[l]);
    match shape {
        NormShape::Ball { p: PNorm::Inf, .. } => s.for_each(|i, k, v| {
            for l in 0..n {
                rows.nonneg.push(bound(i, k).plus(c + k * n + l, 1.0).offset(-v[l]));
                rows.nonneg.push(bound(i, k).plus(c + k * n + l, -1.0).offset(v[l]));
            }
        }),
        NormShape::Ball { p: PNorm::L1, .. } => {
            let mut aux = Vec::new();
            s.for_each(|i, k, v| aux.push((i, k, v.to_vec())));
            let u0 = p.add_vars(aux.len() * n);
            for (idx, (i, k, v)) in aux.iter().enumerate() {
                let u = u0 + idx * n;
                let mut total = bound(*i, *k);
                for l in 0..n {
                    let cl = c + k * n + l;
                    rows.nonneg.push(AffineExpr::var(u + l).plus(cl, 1.0).offset(-v[l]));
                    rows.nonneg.push(AffineExpr::var(u + l).plus(cl, -1.0).offset(v[l]));
                    total = total.plus(u + l, -1.0);
                }
                rows.nonneg.push(total);
            }
        }
        NormShape::Ball { p: PNorm::L2, .. } => s.for_each(|i, k, v| {
            let mut cone = vec![bound(i, k)];
            cone.extend((0..n).map(|l| diff(k, l, v)));
            rows.cones.push((Cone::SecondOrder, cone));
        }),
        NormShape::Ellipsoid(h) => s.for_each(|i, k, v| {
            let hk = &h[k];
            let mut cone = vec![bound(i, k)];
            for r in 0..n {
                let mut e = AffineExpr::constant(0.0);
                for l in 0..n {
                    let coef = hk[(r, l)];
                    if coef != 0.0 {
                        e = e.plus(c + k * n + l, -coef);
                    }
                    e.constant += coef * v[l];
                }
                cone.push(e);
            }
            rows.cones.push((Cone::SecondOrder, cone));
        }),
    }
    rows.into_program(&mut p);
    let decode = match shape {
        NormShape::Ball { p, .. } => Decode::Ball(p),
        NormShape::Ellipsoid(h) => Decode::Ellipsoid(h.to_vec()),
    };
    Encoded {
        program: p,
        decode,
    }
}

/// Returns `(k, axis)` of a step along which every vertex coincides, which
/// would let `c_{k,axis}` grow without bound.
pub(crate) fn degenerate_axis(s: &Samples) -> Option<(usize, usize)> {
    let (n, steps) = (s.dim(), s.steps());
    let mut lo = vec![f64::INFINITY; steps * n];
    let mut hi = vec![f64::NEG_INFINITY; steps * n];
    s.for_each(|_, k, v| {
        for l in 0..n {
            lo[k * n + l] = lo[k * n + l].min(v[l]);
            hi[k * n + l] = hi[k * n + l].max(v[l]);
        }
    });
    (0..steps * n)
        .find(|&j| hi[j] - lo[j] <= 1e-12 * hi[j].abs().max(lo[j].abs()).max(1.0))
        .map(|j| (j / n, j % n))
}

/// Diagonal log-det ellipsoid `‖diag(d_k) x + b_k‖₂ ≤ 1 + ξ_i`.
pub(crate) fn encode_logdet(s: &Samples, xi_weight: f64) -> Result<Encoded> {
    if let Some((k, axis)) = degenerate_axis(s) {
        return Err(Error::Unbounded { k, axis });
    }
    let (n, steps, count) = (s.dim(), s.steps(), s.len());
    let mut p = ConicProgram::new();
    let d = p.add_vars(steps * n);
    let b = p.add_vars(steps * n);
    let xi = p.add_vars(count);
    let t = p.add_vars(steps * n);
    p.decision_vars = (0..xi).collect();
    for i in 0..count {
        p.set_cost(xi + i, xi_weight);
    }
    let mut rows = Rows::default();
    for i in 0..count {
        rows.nonneg.push(AffineExpr::var(xi + i));
    }
    for j in 0..steps * n {
        p.set_cost(t + j, 1.0);
        rows.cones.push((
            Cone::Exponential,
            vec![
                AffineExpr::term(t + j, -1.0),
                AffineExpr::constant(1.0),
                AffineExpr::var(d + j),
            ],
        ));
    }
    s.for_each(|i, k, v| {
        let mut cone = vec![AffineExpr::var(xi + i).offset(1.0)];
        cone.extend((0..n).map(|l| AffineExpr::term(d + k * n + l, v[l]).plus(b + k * n + l, 1.0)));
        rows.cones.push((Cone::SecondOrder, cone));
    });
    rows.into_program(&mut p);
    Ok(Encoded {
        program: p,
        decode: Decode::Logdet,
    })
}

/// Zonotope LP with one `ζ ∈ ℝ^m` per vertex sample.
pub(crate) fn encode_zonotope(s: &Samples, g: &[DMatrix<f64>], xi_weight: f64) -> Encoded {
    let (n, steps, count) = (s.dim(), s.steps(), s.len());
    let m = g[0].ncols();
    let mut p = ConicProgram::new();
    let c = p.add_vars(steps * n);
    let a = p.add_vars(steps * m);
    let xi = p.add_vars(count);
    p.decision_vars = (0..xi).collect();
    for j in 0..steps * m {
        p.set_cost(a + j, 1.0);
    }
    for i in 0..count {
        p.set_cost(xi + i, xi_weight);
    }
    let mut rows = Rows::default();
    for j in 0..steps * m {
        rows.nonneg.push(AffineExpr::var(a + j));
    }
    for i in 0..count {
        rows.nonneg.push(AffineExpr::var(xi + i));
    }
    let mut next_zeta = p.num_vars;
    s.for_each(|i, k, v| {
        let z = next_zeta;
        next_zeta += m;
        let gk = &g[k];
        for l in 0..n {
            let mut e = AffineExpr::var(c + k * n + l).offset(-v[l]);
            for q in 0..m {
                if gk[(l, q)] != 0.0 {
                    e = e.plus(z + q, gk[(l, q)]);
                }
            }
            rows.zero.push(e);
        }
        for q in 0..m {
            let base = AffineExpr::var(a + k * m + q).plus(xi + i, 1.0);
            rows.nonneg.push(base.clone().plus(z + q, -1.0));
            rows.nonneg.push(base.plus(z + q, 1.0));
        }
    });
    p.add_vars(next_zeta - p.num_vars);
    rows.into_program(&mut p);
    Encoded {
        program: p,
        decode: Decode::Zonotope(g.to_vec()),
    }
}

impl Encoded {
    /// Reads the tube parameters off a primal vector.
    pub fn tube(&self, x: &[f64], n: usize, steps: usize) -> Result<TubeParams> {
        let block = |first: usize, width: usize| -> Vec<Vec<f64>> {
            (0..steps)
                .map(|k| x[first + k * width..first + (k + 1) * width].to_vec())
                .collect()
        };
        // Interior-point iterates can sit a hair below zero on bound rows.
        let clamp = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.into_iter()
                .map(|r| r.into_iter().map(|y| y.max(0.0)).collect())
                .collect()
        };
        let sizes = |first: usize| (0..steps).map(|k| x[first + k].max(0.0)).collect();
        match &self.decode {
            Decode::Ball(p) => TubeParams::ball(*p, block(0, n), sizes(steps * n)),
            Decode::Ellipsoid(h) => {
                TubeParams::ellipsoid_fixed(h.clone(), block(0, n), sizes(steps * n))
            }
            Decode::Logdet => {
                let d = block(0, n);
                let matrices = d
                    .iter()
                    .map(|dk| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(dk)))
                    .collect();
                TubeParams::ellipsoid_logdet(matrices, block(steps * n, n))
            }
            Decode::Zonotope(g) => {
                let m = g[0].ncols();
                TubeParams::zonotope(g.clone(), block(0, n), clamp(block(steps * n, m)))
            }
        }
    }
}
