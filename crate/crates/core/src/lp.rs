//! Dense two-phase simplex for small linear programs.
//!
//! Used for the per-point zonotope margin (a handful of variables, solved
//! millions of times during validation) and for convex-hull checks. Large
//! scenario programs go through [`crate::conic`] instead.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex multipliers `π` with `cᵀ − πᵀA ≥ 0` at the optimum.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

struct Tableau {
    rows: usize,
    /// Structural columns; artificials follow at `cols..cols + rows`.
    cols: usize,
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + self.rows + 1
    }

    fn rhs(&self) -> usize {
        self.cols + self.rows
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * pivot_row[j];
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..w {
                self.obj[j] -= f * pivot_row[j];
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on the current objective row, allowing only
    /// columns `< allowed` to enter. Returns `false` on unboundedness.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let rhs = self.rhs();
        let max_iter = 200 * (self.rows + self.cols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let entering = if bland {
                (0..allowed).find(|&j| self.obj[j] < -COST_TOL)
            } else {
                (0..allowed)
                    .filter(|&j| self.obj[j] < -COST_TOL)
                    .min_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]))
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio.abs() <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        Err(Error::Numerical(format!(
            "simplex exceeded {max_iter} iterations ({} rows, {} columns)",
            self.rows, self.cols
        )))
    }
}

/// Solves `min cᵀx  s.t.  A x = b, x ≥ 0`.
///
/// `a` is given row-wise; every row must have `c.len()` entries.
pub fn solve_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let rows = a.len();
    let cols = c.len();
    if b.len() != rows {
        return Err(Error::Dimension {
            expected: rows,
            found: b.len(),
        });
    }
    if let Some(row) = a.iter().find(|r| r.len() != cols) {
        return Err(Error::Dimension {
            expected: cols,
            found: row.len(),
        });
    }

    let mut sign = vec![1.0; rows];
    let mut t = Vec::with_capacity(rows);
    for i in 0..rows {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        let mut row = vec![0.0; cols + rows + 1];
        for j in 0..cols {
            row[j] = s * a[i][j];
        }
        row[cols + i] = 1.0;
        row[cols + rows] = s * b[i];
        t.push(row);
    }
    let mut tab = Tableau {
        rows,
        cols,
        t,
        obj: vec![0.0; cols + rows + 1],
        basis: (cols..cols + rows).collect(),
    };

    // Phase 1: minimize the sum of artificials.
    for j in 0..cols {
        tab.obj[j] = -(0..rows).map(|i| tab.t[i][j]).sum::<f64>();
    }
    let rhs = tab.rhs();
    tab.obj[rhs] = -(0..rows).map(|i| tab.t[i][rhs]).sum::<f64>();
    tab.optimize(cols)?;
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if -tab.obj[rhs] > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible);
    }
    // Drive zero-level artificials out of the basis where possible.
    for r in 0..rows {
        if tab.basis[r] >= cols {
            if let Some(c) = (0..cols).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, c);
            }
        }
    }

    // Phase 2.
    for j in 0..tab.width() {
        let basic: f64 = (0..rows)
            .map(|i| {
                let cb = if tab.basis[i] < cols { c[tab.basis[i]] } else { 0.0 };
                cb * tab.t[i][j]
            })
            .sum();
        let cj = if j < cols { c[j] } else { 0.0 };
        tab.obj[j] = cj - basic;
    }
    if !tab.optimize(cols)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; cols];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < cols {
            x[bv] = tab.t[i][rhs];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    // Artificial columns hold B⁻¹, and their reduced costs are −π.
    let duals = (0..rows).map(|r| -tab.obj[cols + r] * sign[r]).collect();
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        objective,
        duals,
    }))
}

/// Linear program over free variables:
/// `min cᵀy  s.t.  G y ≥ h, E y = f`.
#[derive(Debug, Clone, Default)]
pub struct GeneralLp {
    pub c: Vec<f64>,
    pub ge: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
}

impl GeneralLp {
    pub fn new(c: Vec<f64>) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }

    pub fn ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ge.push((row, rhs));
        self
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq.push((row, rhs));
        self
    }

    /// Solves through the standard-form dual, which has one row per variable
    /// and stays small when there are many constraints. On success `x` holds
    /// the primal `y`, and `duals` the multipliers of `ge` rows followed by
    /// `eq` rows.
    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.c.len();
        for (row, _) in self.ge.iter().chain(&self.eq) {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let cols = self.ge.len() + 2 * self.eq.len();
        let mut a = vec![vec![0.0; cols]; n];
        let mut cost = Vec::with_capacity(cols);
        for (l, (row, h)) in self.ge.iter().enumerate() {
            for v in 0..n {
                a[v][l] = row[v];
            }
            cost.push(-h);
        }
        let off = self.ge.len();
        for (l, (row, f)) in self.eq.iter().enumerate() {
            for v in 0..n {
                a[v][off + 2 * l] = row[v];
                a[v][off + 2 * l + 1] = -row[v];
            }
            cost.push(-f);
            cost.push(*f);
        }
        match solve_standard(&a, &self.c, &cost)? {
            // Dual unbounded means the primal constraints are inconsistent.
            LpOutcome::Unbounded => Ok(LpOutcome::Infeasible),
            // Dual infeasible: primal unbounded (or infeasible, not separated here).
            LpOutcome::Infeasible => Ok(LpOutcome::Unbounded),
            LpOutcome::Optimal(d) => {
                let y: Vec<f64> = d.duals.iter().map(|p| -p).collect();
                let mut multipliers: Vec<f64> = d.x[..off].to_vec();
                for l in 0..self.eq.len() {
                    multipliers.push(d.x[off + 2 * l] - d.x[off + 2 * l + 1]);
                }
                let objective = self.c.iter().zip(&y).map(|(a, b)| a * b).sum();
                Ok(LpOutcome::Optimal(LpSolution {
                    x: y,
                    objective,
                    duals: multipliers,
                }))
            }
        }
    }
}

/// Whether the origin lies in the convex hull of `points`.
pub fn hull_contains_origin(points: &[Vec<f64>]) -> Result<bool> {
    let Some(first) = points.first() else {
        return Ok(false);
    };
    let dim = first.len();
    let mut a = vec![vec![0.0; points.len()]; dim + 1];
    for (j, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: p.len(),
            });
        }
        for (d, v) in p.iter().enumerate() {
            a[d][j] = *v;
        }
        a[dim][j] = 1.0;
    }
    let mut b = vec![0.0; dim + 1];
    b[dim] = 1.0;
    let c = vec![0.0; points.len()];
    Ok(matches!(solve_standard(&a, &b, &c)?, LpOutcome::Optimal(_)))
}
