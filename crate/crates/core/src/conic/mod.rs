//! Conic programs over the cones needed by the tube fits, plus a pluggable
//! solver contract.
//!
//! A constraint is an affine map of the decision variables required to lie
//! in a cone:
//!
//! | cone          | rows `(e₀, e₁, …)` must satisfy          |
//! |---------------|-------------------------------------------|
//! | zero          | `eᵢ = 0`                                  |
//! | nonnegative   | `eᵢ ≥ 0`                                  |
//! | second order  | `e₀ ≥ ‖(e₁, …)‖₂`                         |
//! | exponential   | `e₁ · exp(e₀ / e₁) ≤ e₂`, `e₁ > 0` (closure) |
//! | power (α)     | `e₀^α · e₁^(1−α) ≥ |e₂|`, `e₀, e₁ ≥ 0`     |

mod clarabel;

pub use self::clarabel::ClarabelBackend;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default solver tolerance (gap and feasibility).
pub const DEFAULT_TOL: f64 = 1e-8;

/// `Σ coef·x[var] + constant`
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn plus(mut self, v: usize, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * x[*v]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone {
    Zero,
    Nonnegative,
    SecondOrder,
    Exponential,
    Power { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<AffineExpr>,
}

/// `min cᵀx + c₀` subject to cone memberships.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<ConeConstraint>,
    /// Variables that parameterize the answer (as opposed to slacks and
    /// auxiliaries). The tie-break minimizes their Euclidean norm; empty
    /// means all variables.
    pub decision_vars: Vec<usize>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    /// Adds `n` variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        self.objective.resize(self.num_vars, 0.0);
        first
    }

    pub fn set_cost(&mut self, v: usize, c: f64) {
        self.objective[v] = c;
    }

    pub fn add_constraint(&mut self, cone: Cone, rows: Vec<AffineExpr>) {
        self.constraints.push(ConeConstraint { cone, rows });
    }

    pub fn nonnegative(&mut self, e: AffineExpr) {
        self.add_constraint(Cone::Nonnegative, vec![e]);
    }

    pub fn equal_zero(&mut self, e: AffineExpr) {
        self.add_constraint(Cone::Zero, vec![e]);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_constant
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.rows.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::Input("objective length differs from variable count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(Error::Input("objective must be finite".into()));
        }
        for (idx, con) in self.constraints.iter().enumerate() {
            let rows = con.rows.len();
            let ok = match con.cone {
                Cone::Zero | Cone::Nonnegative | Cone::SecondOrder => rows >= 1,
                Cone::Exponential => rows == 3,
                Cone::Power { alpha } => rows == 3 && alpha > 0.0 && alpha < 1.0,
            };
            if !ok {
                return Err(Error::Input(format!(
                    "constraint {idx}: {rows} rows do not fit cone {:?}",
                    con.cone
                )));
            }
            for row in &con.rows {
                if !row.constant.is_finite() {
                    return Err(Error::Input(format!("constraint {idx}: non-finite constant")));
                }
                for (v, c) in &row.terms {
                    if *v >= self.num_vars || !c.is_finite() {
                        return Err(Error::Input(format!(
                            "constraint {idx}: bad term ({v}, {c})"
                        )));
                    }
                }
            }
        }
        if let Some(v) = self.decision_vars.iter().find(|v| **v >= self.num_vars) {
            return Err(Error::Input(format!("decision variable {v} out of range")));
        }
        Ok(())
    }

    /// Largest cone violation of `x` over all constraints, in the units of
    /// the constraint rows.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| cone_violation(c.cone, &c.rows.iter().map(|r| r.eval(x)).collect::<Vec<_>>()))
            .fold(0.0, f64::max)
    }
}

fn cone_violation(cone: Cone, e: &[f64]) -> f64 {
    match cone {
        Cone::Zero => e.iter().fold(0.0, |m, v| m.max(v.abs())),
        Cone::Nonnegative => e.iter().fold(0.0, |m, v| m.max(-v)),
        Cone::SecondOrder => {
            let tail = e[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (tail - e[0]).max(0.0)
        }
        Cone::Exponential => {
            let (x, y, z) = (e[0], e[1], e[2]);
            if y > 1e-300 {
                let lhs = y * (x / y).exp();
                (lhs - z).max(-y).max(0.0)
            } else {
                (-y).max(x).max(-z).max(0.0)
            }
        }
        Cone::Power { alpha } => {
            let (x, y, z) = (e[0], e[1], e[2]);
            let geo = x.max(0.0).powf(alpha) * y.max(0.0).powf(1.0 - alpha);
            (z.abs() - geo).max(-x).max(-y).max(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    /// Absolute primal-dual objective gap reported by the backend.
    pub gap: f64,
    pub iterations: u32,
    /// The backend stopped at its relaxed tolerances.
    pub reduced_accuracy: bool,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Converts a non-optimal outcome into an error.
    pub fn into_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: format!("{:?}", self.status),
                detail: format!("after {} iterations, gap {:e}", self.iterations, self.gap),
            })
        }
    }
}

/// A conic solver. Implementations must be pure: identical inputs give
/// identical outputs, and no state is shared between concurrent calls.
pub trait ConicBackend: Sync {
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution>;
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram, tol: f64) -> Result<ConicSolution> {
    ClarabelBackend.solve(program, tol)
}

/// Among points whose objective is within `tol·max(1, |primal_value|)` of
/// `primal_value`, finds the one with minimum Euclidean norm over the
/// program's decision variables.
pub fn tie_break(program: &ConicProgram, primal_value: f64, tol: f64) -> Result<ConicSolution> {
    tie_break_with(&ClarabelBackend, program, primal_value, tol)
}

pub fn tie_break_with(
    backend: &dyn ConicBackend,
    program: &ConicProgram,
    primal_value: f64,
    tol: f64,
) -> Result<ConicSolution> {
    program.validate()?;
    if !primal_value.is_finite() {
        return Err(Error::Input("tie-break needs a finite optimal value".into()));
    }
    let mut ext = program.clone();
    ext.objective.iter_mut().for_each(|c| *c = 0.0);
    ext.objective_constant = 0.0;
    let norm = ext.add_var();
    ext.set_cost(norm, 1.0);

    let slack = tol * primal_value.abs().max(1.0);
    let mut budget = AffineExpr::constant(primal_value + slack - program.objective_constant);
    for (v, c) in program.objective.iter().enumerate() {
        if *c != 0.0 {
            budget.terms.push((v, -c));
        }
    }
    ext.nonnegative(budget);

    let theta: Vec<usize> = if program.decision_vars.is_empty() {
        (0..program.num_vars).collect()
    } else {
        program.decision_vars.clone()
    };
    let mut cone = vec![AffineExpr::var(norm)];
    cone.extend(theta.iter().map(|&v| AffineExpr::var(v)));
    ext.add_constraint(Cone::SecondOrder, cone);

    let mut sol = backend.solve(&ext, tol)?;
    sol.primal.truncate(program.num_vars);
    if sol.primal.len() == program.num_vars {
        sol.objective_value = program.objective_value(&sol.primal);
    }
    Ok(sol)
}

/// Euclidean norm of `x` restricted to the program's decision variables.
pub fn decision_norm(program: &ConicProgram, x: &[f64]) -> f64 {
    if program.decision_vars.is_empty() {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        program
            .decision_vars
            .iter()
            .map(|&v| x[v] * x[v])
            .sum::<f64>()
            .sqrt()
    }
}
