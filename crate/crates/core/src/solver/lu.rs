//! Direct solves with the slab Jacobian.

use crate::assembly::{SparseJacobian, SparsityPattern};

use super::multifrontal::{MultifrontalLu, MultifrontalSymbolic};
use super::SolverError;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

/// Relative residual a solve must reach, refinement included.
pub const LU_RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 30;
/// Memory the global-pivoting fallback may need, as a multiple of the multifrontal factor storage.
const FALLBACK_MEMORY_FACTOR: usize = 4;
/// Refinement stops early once a step reduces the residual by less than this factor.
const STAGNATION_RATIO: f64 = 0.9;

/// Bytes of memory the process may still use, from the cgroup limit or `/proc/meminfo`.
pub fn available_memory() -> Option<usize> {
    let meminfo = std::fs::read_to_string("/proc/meminfo").ok().and_then(|s| {
        s.lines()
            .find(|l| l.starts_with("MemAvailable:"))
            .and_then(|l| l.split_whitespace().nth(1))
            .and_then(|kb| kb.parse::<usize>().ok())
            .map(|kb| kb * 1024)
    });
    let cgroup = std::fs::read_to_string("/sys/fs/cgroup/memory.max")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .map(|limit| {
            let used = std::fs::read_to_string("/sys/fs/cgroup/memory.current")
                .ok()
                .and_then(|s| s.trim().parse::<usize>().ok())
                .unwrap_or(0);
            limit.saturating_sub(used)
        });
    match (meminfo, cgroup) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Reusable sparse LU: the ordering and front structure are computed once
/// per pattern; each [`LuSolver::factor`] call redoes the numeric work.
#[derive(Debug, Clone)]
pub struct LuSolver {
    symbolic: MultifrontalSymbolic,
}

impl LuSolver {
    pub fn new(pattern: &SparsityPattern) -> Self {
        LuSolver { symbolic: MultifrontalSymbolic::new(pattern) }
    }

    pub fn symbolic(&self) -> &MultifrontalSymbolic {
        &self.symbolic
    }

    /// Refuses up front when the factorization cannot fit in memory.
    pub fn check_memory(&self) -> Result<(), SolverError> {
        let needed = self.symbolic.peak_bytes();
        match available_memory() {
            Some(avail) if needed > avail / 10 * 9 => Err(SolverError::InsufficientMemory { needed, available: avail }),
            _ => Ok(()),
        }
    }

    pub fn factor(&self, pattern: &SparsityPattern, jac: &SparseJacobian) -> Result<Factorization, SolverError> {
        self.check_memory()?;
        let lu = self.symbolic.factor(pattern, &jac.values)?;
        Ok(Factorization { lu, fallback_bytes: FALLBACK_MEMORY_FACTOR * self.symbolic.factor_bytes() })
    }
}

#[derive(Debug, Clone)]
pub struct Factorization {
    lu: MultifrontalLu,
    fallback_bytes: usize,
}

impl Factorization {
    /// Solves `J x = rhs` with iterative refinement; fails if the residual
    /// cannot be brought below [`LU_RESIDUAL_TOL`].
    ///
    /// Pivoting is restricted to each front, which can lose too much
    /// accuracy. In that case the system is refactored with faer's sparse LU
    /// (global partial pivoting), provided that fits in memory.
    pub fn solve(&self, pattern: &SparsityPattern, jac: &SparseJacobian, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        if let Some(x) = refine(pattern, jac, rhs, |b| Ok(self.lu.solve(b)))? {
            return Ok(x);
        }
        let fits = available_memory().map_or(true, |avail| self.fallback_bytes <= avail);
        if !fits {
            return Err(SolverError::SingularMatrix);
        }
        let lu = global_lu(pattern, jac)?;
        refine(pattern, jac, rhs, |b| {
            let x = lu.solve(faer::Mat::from_fn(b.len(), 1, |i, _| b[i]));
            Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
        })?
        .ok_or(SolverError::SingularMatrix)
    }
}

fn global_lu(pattern: &SparsityPattern, jac: &SparseJacobian) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>, SolverError> {
    let mut triplets = Vec::with_capacity(pattern.nnz());
    for c in 0..pattern.ndof {
        for k in pattern.col_ptr[c]..pattern.col_ptr[c + 1] {
            triplets.push(Triplet::new(pattern.row_idx[k], c, jac.values[k]));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(pattern.ndof, pattern.ndof, &triplets)
        .map_err(|_| SolverError::SingularMatrix)?;
    a.sp_lu().map_err(|_| SolverError::SingularMatrix)
}

/// Iterative refinement around `inner`. `Ok(None)` when the residual
/// stagnates or the step budget runs out.
fn refine<F>(pattern: &SparsityPattern, jac: &SparseJacobian, rhs: &[f64], inner: F) -> Result<Option<Vec<f64>>, SolverError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, SolverError>,
{
    let bnorm = norm2(rhs);
    let mut x = inner(rhs)?;
    if bnorm == 0.0 {
        return Ok(Some(x));
    }
    let mut prev = f64::INFINITY;
    for step in 0..=MAX_REFINEMENT_STEPS {
        if !x.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        let ax = jac.matvec(pattern, &x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rel = norm2(&r) / bnorm;
        if rel <= LU_RESIDUAL_TOL {
            return Ok(Some(x));
        }
        if step == MAX_REFINEMENT_STEPS || rel > STAGNATION_RATIO * prev {
            break;
        }
        prev = rel;
        let dx = inner(&r)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Ok(None)
}

/// One-shot `J x = rhs`.
pub fn lu_solve(pattern: &SparsityPattern, jac: &SparseJacobian, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    if rhs.len() != pattern.ndof || jac.values.len() != pattern.nnz() {
        return Err(SolverError::SizeMismatch);
    }
    let solver = LuSolver::new(pattern);
    solver.factor(pattern, jac)?.solve(pattern, jac, rhs)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
