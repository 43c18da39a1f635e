//! Dense primal log-barrier method used as an independent optimality oracle.
//!
//! Solves `min cᵀx` subject to equalities `A x = b` and smooth convex
//! inequalities, following the central path with damped Newton steps.
//! Nothing here shares code with the library's solvers.

use nalgebra::{DMatrix, DVector};

/// `aᵀx + b`
#[derive(Clone, Debug)]
pub struct Lin {
    pub a: Vec<(usize, f64)>,
    pub b: f64,
}

impl Lin {
    pub fn new(a: Vec<(usize, f64)>, b: f64) -> Self {
        Self { a, b }
    }

    pub fn var(v: usize) -> Self {
        Self::new(vec![(v, 1.0)], 0.0)
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.a.iter().map(|(i, c)| c * x[*i]).sum::<f64>() + self.b
    }

    fn dense(&self, n: usize) -> DVector<f64> {
        let mut g = DVector::zeros(n);
        for (i, c) in &self.a {
            g[*i] += c;
        }
        g
    }
}

#[derive(Clone, Debug)]
pub enum Con {
    /// `f(x) ≥ 0`
    Pos(Lin),
    /// `‖rows(x)‖₂ ≤ t(x)`
    Soc { t: Lin, rows: Vec<Lin> },
    /// `t ≥ −log d`
    NegLog { t: usize, d: usize },
    /// `u ≥ r²`
    Square { u: usize, r: usize },
}

pub struct Problem {
    pub n: usize,
    pub c: Vec<f64>,
    pub cons: Vec<Con>,
    pub eqs: Vec<Lin>,
}

/// Barrier value, gradient and Hessian of a single constraint, or `None`
/// outside the interior.
fn barrier(con: &Con, x: &DVector<f64>, n: usize) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    // −log s with s, ∇s, ∇²s given.
    let term = |s: f64, gs: DVector<f64>, hs: DMatrix<f64>| {
        if s <= 0.0 || !s.is_finite() {
            return None;
        }
        let g = -&gs / s;
        let h = &gs * gs.transpose() / (s * s) - hs / s;
        Some((-s.ln(), g, h))
    };
    match con {
        Con::Pos(f) => term(f.eval(x), f.dense(n), DMatrix::zeros(n, n)),
        Con::Soc { t, rows } => {
            let tv = t.eval(x);
            if tv <= 0.0 {
                return None;
            }
            let tg = t.dense(n);
            let mut s = tv * tv;
            let mut gs = 2.0 * tv * &tg;
            let mut hs = 2.0 * &tg * tg.transpose();
            for r in rows {
                let rv = r.eval(x);
                let rg = r.dense(n);
                s -= rv * rv;
                gs -= 2.0 * rv * &rg;
                hs -= 2.0 * &rg * rg.transpose();
            }
            term(s, gs, hs)
        }
        Con::NegLog { t, d } => {
            let dv = x[*d];
            if dv <= 0.0 {
                return None;
            }
            let s = x[*t] + dv.ln();
            let mut gs = DVector::zeros(n);
            gs[*t] = 1.0;
            gs[*d] = 1.0 / dv;
            let mut hs = DMatrix::zeros(n, n);
            hs[(*d, *d)] = -1.0 / (dv * dv);
            let (v1, g1, h1) = term(s, gs, hs)?;
            // Plus −log d for the domain.
            let mut g2 = DVector::zeros(n);
            g2[*d] = -1.0 / dv;
            let mut h2 = DMatrix::zeros(n, n);
            h2[(*d, *d)] = 1.0 / (dv * dv);
            Some((v1 - dv.ln(), g1 + g2, h1 + h2))
        }
        Con::Square { u, r } => {
            let rv = x[*r];
            let s = x[*u] - rv * rv;
            let mut gs = DVector::zeros(n);
            gs[*u] = 1.0;
            gs[*r] = -2.0 * rv;
            let mut hs = DMatrix::zeros(n, n);
            hs[(*r, *r)] = -2.0;
            term(s, gs, hs)
        }
    }
}

fn phi(p: &Problem, x: &DVector<f64>, t: f64, c: &DVector<f64>) -> Option<f64> {
    let mut v = t * c.dot(x);
    for con in &p.cons {
        v += barrier(con, x, p.n)?.0;
    }
    Some(v)
}

/// Minimizes from a strictly feasible `x0` that satisfies the equalities.
/// Returns the final iterate and its objective.
pub fn solve(p: &Problem, x0: Vec<f64>) -> (Vec<f64>, f64) {
    let n = p.n;
    let c = DVector::from_vec(p.c.clone());
    let mut x = DVector::from_vec(x0);
    assert!(phi(p, &x, 1.0, &c).is_some(), "oracle start is not strictly feasible");
    let neq = p.eqs.len();
    let a = DMatrix::from_fn(neq, n, |r, j| p.eqs[r].dense(n)[j]);
    let m = p.cons.len() as f64 + 1.0;
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let mut g = t * &c;
            let mut h = DMatrix::zeros(n, n);
            for con in &p.cons {
                let (_, gi, hi) = barrier(con, &x, n).unwrap();
                g += gi;
                h += hi;
            }
            let mut kkt = DMatrix::zeros(n + neq, n + neq);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            kkt.view_mut((n, 0), (neq, n)).copy_from(&a);
            kkt.view_mut((0, n), (n, neq)).copy_from(&a.transpose());
            let mut rhs = DVector::zeros(n + neq);
            rhs.rows_mut(0, n).copy_from(&(-&g));
            let Some(sol) = kkt.lu().solve(&rhs) else {
                break;
            };
            let dx = sol.rows(0, n).into_owned();
            let dec = -g.dot(&dx);
            if dec / 2.0 <= 1e-12 {
                break;
            }
            let f0 = phi(p, &x, t, &c).unwrap();
            let mut step = 1.0;
            loop {
                let cand = &x + step * &dx;
                if let Some(f1) = phi(p, &cand, t, &c) {
                    if f1 <= f0 - 0.25 * step * dec {
                        x = cand;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
            if step < 1e-14 {
                break;
            }
        }
        if m / t < 1e-10 {
            break;
        }
        t *= 20.0;
    }
    let value = c.dot(&x);
    (x.iter().copied().collect(), value)
}
