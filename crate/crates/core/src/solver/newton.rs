//! Newton iteration with backtracking line search for one slab.

use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyError, Mode, SlabProblem, SlabState, SparseJacobian};
use crate::discretization::MeshSpec;
use crate::initdata::TimeSlice;
use crate::model::ModelParams;

use super::lu::{norm2, LuSolver};
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineSearch {
    None,
    Backtracking { c: f64, shrink: f64, min_alpha: f64 },
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch::Backtracking { c: 1e-4, shrink: 0.5, min_alpha: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_iters: usize,
    pub line_search: LineSearch,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { rtol: 1e-8, atol: 1e-12, max_iters: 50, line_search: LineSearch::default() }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rtol >= 0.0 && self.rtol.is_finite()) {
            return Err(format!("rtol must be finite and >= 0, got {}", self.rtol));
        }
        if !(self.atol >= 0.0 && self.atol.is_finite()) {
            return Err(format!("atol must be finite and >= 0, got {}", self.atol));
        }
        if self.max_iters < 1 {
            return Err("max_iters >= 1 required".into());
        }
        if let LineSearch::Backtracking { c, shrink, min_alpha } = self.line_search {
            if !(shrink > 0.0 && shrink < 1.0) {
                return Err(format!("line search shrink must lie in (0, 1), got {shrink}"));
            }
            if !(min_alpha > 0.0) {
                return Err(format!("line search min_alpha must be > 0, got {min_alpha}"));
            }
            if !(0.0..1.0).contains(&c) {
                return Err(format!("line search c must lie in [0, 1), got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    MaxIters,
    LineSearchStall,
    SingularMatrix,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub failure_reason: Option<FailureReason>,
}

impl NewtonReport {
    fn fail(iterations: usize, residual_history: Vec<f64>, reason: FailureReason) -> Self {
        NewtonReport { converged: false, iterations, residual_history, failure_reason: Some(reason) }
    }
}

/// Runs Newton from `u0`. Solver breakdowns come back inside the report;
/// `Err` is reserved for problems with the inputs or the machine.
pub fn newton_solve_with(
    problem: &SlabProblem,
    lu: &LuSolver,
    u0: SlabState,
    ic: &TimeSlice,
    opts: &NewtonOptions,
) -> Result<(SlabState, NewtonReport), SolverError> {
    if u0.values.len() != problem.ndof() {
        return Err(SolverError::SizeMismatch);
    }
    let mut u = u0;
    let mut hist = Vec::new();
    let residual = |v: &[f64]| -> Option<Vec<f64>> {
        match problem.residual(v, ic) {
            Ok(r) if r.iter().all(|x| x.is_finite()) => Some(r),
            _ => None,
        }
    };
    let mut r = match problem.residual(&u.values, ic) {
        Err(AssemblyError::SizeMismatch { .. }) => return Err(SolverError::SizeMismatch),
        Ok(r) if r.iter().all(|x| x.is_finite()) => r,
        _ => return Ok((u, NewtonReport::fail(0, hist, FailureReason::NonFinite))),
    };
    let mut rnorm = norm2(&r);
    hist.push(rnorm);
    let tol = (opts.rtol * rnorm).max(opts.atol);
    let mut jac = SparseJacobian { values: vec![0.0; problem.pattern.nnz()] };
    let mut iters = 0;
    loop {
        if rnorm <= tol {
            return Ok((u, NewtonReport { converged: true, iterations: iters, residual_history: hist, failure_reason: None }));
        }
        if iters >= opts.max_iters {
            return Ok((u, NewtonReport::fail(iters, hist, FailureReason::MaxIters)));
        }
        if problem.jacobian_into(&u.values, ic, &mut jac).is_err() || !jac.values.iter().all(|v| v.is_finite()) {
            return Ok((u, NewtonReport::fail(iters, hist, FailureReason::NonFinite)));
        }
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let step = match lu.factor(&problem.pattern, &jac) {
            Ok(f) => f.solve(&problem.pattern, &jac, &neg_r),
            Err(e) => Err(e),
        };
        let delta = match step {
            Ok(d) => d,
            Err(SolverError::SingularMatrix) => {
                return Ok((u, NewtonReport::fail(iters, hist, FailureReason::SingularMatrix)));
            }
            Err(e) => return Err(e),
        };
        let trial = |alpha: f64| -> (Vec<f64>, Option<Vec<f64>>) {
            let v: Vec<f64> = u.values.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let rv = residual(&v);
            (v, rv)
        };
        match opts.line_search {
            LineSearch::None => {
                let (v, rv) = trial(1.0);
                iters += 1;
                match rv {
                    Some(rv) => {
                        u.values = v;
                        rnorm = norm2(&rv);
                        r = rv;
                        hist.push(rnorm);
                    }
                    None => return Ok((u, NewtonReport::fail(iters, hist, FailureReason::NonFinite))),
                }
            }
            LineSearch::Backtracking { c, shrink, min_alpha } => {
                let mut alpha = 1.0;
                loop {
                    let (v, rv) = trial(alpha);
                    if let Some(rv) = rv {
                        let n = norm2(&rv);
                        if n <= (1.0 - c * alpha) * rnorm {
                            u.values = v;
                            rnorm = n;
                            r = rv;
                            hist.push(rnorm);
                            iters += 1;
                            break;
                        }
                    }
                    alpha *= shrink;
                    if alpha < min_alpha {
                        return Ok((u, NewtonReport::fail(iters, hist, FailureReason::LineSearchStall)));
                    }
                }
            }
        }
    }
}

/// Convenience form that builds the slab problem and solver structures.
pub fn newton_solve(
    u0: SlabState,
    mesh: &MeshSpec,
    model: &ModelParams,
    mode: Mode,
    ic: &TimeSlice,
    opts: &NewtonOptions,
) -> Result<(SlabState, NewtonReport), SolverError> {
    let problem = SlabProblem::new(mesh, model, mode, 0.0)?;
    let lu = LuSolver::new(&problem.pattern);
    newton_solve_with(&problem, &lu, u0, ic, opts)
}
