use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Cone, ConicBackend, ConicProgram, ConicSolution, SolveStatus};
use crate::error::{Error, Result};

/// Interior-point backend built on the Clarabel solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

fn push_cone(cones: &mut Vec<SupportedConeT<f64>>, cone: Cone, rows: usize) {
    // Consecutive orthant blocks are merged; Clarabel handles one large
    // block much faster than many scalar ones.
    match (cone, cones.last_mut()) {
        (Cone::Zero, Some(SupportedConeT::ZeroConeT(n))) => *n += rows,
        (Cone::Nonnegative, Some(SupportedConeT::NonnegativeConeT(n))) => *n += rows,
        (Cone::Zero, _) => cones.push(SupportedConeT::ZeroConeT(rows)),
        (Cone::Nonnegative, _) => cones.push(SupportedConeT::NonnegativeConeT(rows)),
        (Cone::SecondOrder, _) => cones.push(SupportedConeT::SecondOrderConeT(rows)),
        (Cone::Exponential, _) => cones.push(SupportedConeT::ExponentialConeT()),
        (Cone::Power { alpha }, _) => cones.push(SupportedConeT::PowerConeT(alpha)),
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution> {
        program.validate()?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Input(format!("solver tolerance {tol} must be positive")));
        }
        let n = program.num_vars;
        let m = program.num_rows();

        // Clarabel works with A x + s = b, s ∈ K, so a row e(x) = a·x + c
        // maps to A = −a, b = c.
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(m);
        let mut cones = Vec::new();
        let mut row = 0usize;
        for con in &program.constraints {
            for e in &con.rows {
                for &(v, c) in &e.terms {
                    if c != 0.0 {
                        ri.push(row);
                        ci.push(v);
                        vals.push(-c);
                    }
                }
                b.push(e.constant);
                row += 1;
            }
            push_cone(&mut cones, con.cone, con.rows.len());
        }
        let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
        let p = CscMatrix::zeros((n, n));

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(300)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .build()
            .map_err(|e| Error::Config(format!("solver settings: {e:?}")))?;

        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Input(format!("solver rejected program: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let (status, reduced_accuracy) = match sol.status {
            SolverStatus::Solved => (SolveStatus::Optimal, false),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, false)
            }
            _ => (SolveStatus::NumericalFailure, false),
        };
        let primal = sol.x.clone();
        let objective_value = if primal.iter().all(|v| v.is_finite()) {
            program.objective_value(&primal)
        } else {
            f64::NAN
        };
        Ok(ConicSolution {
            status,
            primal,
            objective_value,
            gap: (sol.obj_val - sol.obj_val_dual).abs(),
            iterations: sol.iterations,
            reduced_accuracy,
        })
    }
}
