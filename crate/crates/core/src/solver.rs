//! Sparse direct solves, the biharmonic initial guess and the Newton loop.

use faer::col::Col;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, Discretization, SparseSystem};
use crate::norms::{pair_norm_with, NormError};
use crate::space::FieldPair;

/// Required relative residual `‖Ax − b‖ / ‖b‖` of a linear solve.
pub const LINEAR_TOL: f64 = 1e-10;
/// Accepted normwise backward error `‖Ax − b‖ / (‖|A||x|‖ + ‖b‖)` when the
/// relative residual target lies below the double precision floor
/// `ε‖|A||x|‖ / ‖b‖`, as it does for fourth-order systems on fine meshes.
pub const BACKWARD_TOL: f64 = 1e-13;
/// Refinement sweeps reusing the factorization.
const REFINEMENT_STEPS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("system is {rows}x{cols} with a right-hand side of length {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("linear solve reached relative residual {relative:e} and backward error {backward:e}")]
    Inaccurate { relative: f64, backward: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `b − Ax` with compensated products and sums, and `|A||x|`.
fn residual(system: &SparseSystem, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (0..system.rhs.len())
        .map(|r| {
            let (mut s, mut c) = (system.rhs[r], 0.0);
            let mut abs = 0.0;
            for (j, a) in system.matrix.row(r) {
                let p = -a * x[j];
                let pe = (-a).mul_add(x[j], -p);
                let t = s + p;
                let z = t - s;
                c += (s - (t - z)) + (p - z) + pe;
                s = t;
                abs += (a * x[j]).abs();
            }
            (s + c, abs)
        })
        .unzip()
}

/// Sparse LU with partial pivoting. The symbolic analysis is kept and
/// reused while successive systems share a sparsity pattern, as the Newton
/// systems on one mesh do.
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn factor(&mut self, a: &SparseColMat<usize, f64>) -> Result<Lu<usize, f64>, SolverError> {
        let sym = a.symbolic();
        let reuse = matches!(&self.symbolic, Some((cp, ri, _)) if cp == sym.col_ptr() && ri == sym.row_idx());
        if !reuse {
            let s = SymbolicLu::try_new(sym).map_err(|e| SolverError::Singular(format!("{e:?}")))?;
            self.symbolic = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
        }
        let s = self.symbolic.as_ref().expect("set above").2.clone();
        Lu::try_new_with_symbolic(s, a.as_ref()).map_err(|e| SolverError::Singular(format!("{e:?}")))
    }

    /// Solves `system` with up to five steps of iterative refinement on
    /// compensated residuals.
    pub fn solve(&mut self, system: &SparseSystem) -> Result<Vec<f64>, SolverError> {
        let m = &system.matrix;
        let n = m.nrows();
        if m.ncols() != n || system.rhs.len() != n {
            return Err(SolverError::Dimension {
                rows: n,
                cols: m.ncols(),
                rhs: system.rhs.len(),
            });
        }
        if let Some(&r) = m.empty_rows().first() {
            return Err(SolverError::Singular(format!("row {r} is zero")));
        }
        let bnorm = norm2(&system.rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = m.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SolverError::Singular(format!("{e:?}")))?;
        let lu = self.factor(&a)?;
        let solve = |b: &[f64]| -> Vec<f64> {
            let col = Col::from_fn(n, |i| b[i]);
            let x = lu.solve(&col);
            (0..n).map(|i| x[i]).collect()
        };

        let mut x = solve(&system.rhs);
        let (mut r, mut abs) = residual(system, &x);
        let mut rel = norm2(&r) / bnorm;
        let mut last_dx = f64::INFINITY;
        for _ in 0..REFINEMENT_STEPS {
            if !rel.is_finite() {
                break;
            }
            let dx = solve(&r);
            let dxn = norm2(&dx);
            // stop once corrections stall at the size of the rounding of x
            if !(dxn < 0.5 * last_dx) || dxn <= f64::EPSILON * norm2(&x) {
                break;
            }
            last_dx = dxn;
            for (a, d) in x.iter_mut().zip(&dx) {
                *a += d;
            }
            (r, abs) = residual(system, &x);
            rel = norm2(&r) / bnorm;
        }
        if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Singular("factorization produced non-finite values".into()));
        }
        let backward = norm2(&r) / (norm2(&abs) + bnorm);
        if rel > LINEAR_TOL && backward > BACKWARD_TOL {
            return Err(SolverError::Inaccurate { relative: rel, backward });
        }
        Ok(x)
    }
}

/// One-off solve; see [`LinearSolver::solve`].
pub fn solve_linear(system: &SparseSystem) -> Result<Vec<f64>, SolverError> {
    LinearSolver::new().solve(system)
}

/// Solution of the biharmonic part: the Newton system at `Ψ = 0`.
pub fn initial_guess(disc: &Discretization) -> Result<FieldPair, SolverError> {
    initial_guess_with(disc, &mut LinearSolver::new())
}

fn initial_guess_with(disc: &Discretization, solver: &mut LinearSolver) -> Result<FieldPair, SolverError> {
    let zero = FieldPair::zeros(disc.ndof());
    Ok(FieldPair::from_block(&solver.solve(&disc.newton_system(&zero)?)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Stop once the increment norm falls below this.
    pub tol: f64,
    pub maxit: usize,
    /// Take one more step after convergence to measure the round-off floor
    /// of the increments.
    pub verify: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 20,
            verify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    /// Newton solves after the initial guess.
    pub iterations: usize,
    /// `‖Ψʲ − Ψʲ⁻¹‖` in the discrete energy norm, one per iteration.
    pub increments: Vec<f64>,
    /// Euclidean norm of the discrete residual at the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
    /// Energy norm of the returned iterate.
    pub solution_norm: f64,
    /// Increment of the verification step taken after convergence.
    pub floor: Option<f64>,
    /// Largest coefficient change of the verification step.
    pub extra_change: Option<f64>,
}

impl NewtonReport {
    /// Increments at or below this carry rounding, not contraction: ten
    /// times the measured floor, and no less than `1e-13‖Ψ‖` since two
    /// nearly identical solves share most of their rounding and so
    /// understate it.
    pub fn informative_threshold(&self) -> f64 {
        (10.0 * self.floor.unwrap_or(0.0)).max(1e-13 * self.solution_norm)
    }

    /// Least-squares slope of `log e_{j+1}` against `log e_j` over the last
    /// three consecutive increment pairs above [`Self::informative_threshold`].
    /// `None` when fewer than two such pairs exist.
    pub fn contraction_slope(&self) -> Option<f64> {
        let floor = self.informative_threshold();
        let pairs: Vec<(f64, f64)> = self
            .increments
            .windows(2)
            .filter(|w| w[0] > floor && w[1] > floor)
            .map(|w| (w[0].ln(), w[1].ln()))
            .collect();
        let last = &pairs[pairs.len().saturating_sub(3)..];
        if last.len() < 2 {
            return None;
        }
        let n = last.len() as f64;
        let mx = last.iter().map(|p| p.0).sum::<f64>() / n;
        let my = last.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = last.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = last.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Plain Newton iteration from [`initial_guess`]; stops when the increment
/// energy norm drops below `opts.tol` or after `opts.maxit` solves.
/// Non-convergence is reported, not raised.
pub fn newton_solve(disc: &Discretization, opts: &NewtonOptions) -> Result<(FieldPair, NewtonReport), SolverError> {
    let norm = |p: &FieldPair| pair_norm_with(p, disc.mesh(), disc.elements(), disc.dofmap(), disc.params());
    let mut solver = LinearSolver::new();
    let mut psi = initial_guess_with(disc, &mut solver)?;
    let mut increments = Vec::new();
    let mut converged = false;
    for _ in 0..opts.maxit.max(1) {
        let next = FieldPair::from_block(&solver.solve(&disc.newton_system(&psi)?)?);
        let inc = norm(&next.sub(&psi))?;
        psi = next;
        increments.push(inc);
        if inc < opts.tol {
            converged = true;
            break;
        }
        if !inc.is_finite() {
            break;
        }
    }
    let (mut floor, mut extra_change) = (None, None);
    if converged && opts.verify {
        let extra = FieldPair::from_block(&solver.solve(&disc.newton_system(&psi)?)?);
        let diff = extra.sub(&psi);
        floor = Some(norm(&diff)?);
        extra_change = Some(diff.u.iter().chain(&diff.v).fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let residual_norm = norm2(&disc.residual(&psi)?);
    let solution_norm = norm(&psi)?;
    Ok((
        psi,
        NewtonReport {
            iterations: increments.len(),
            increments,
            residual_norm,
            converged,
            solution_norm,
            floor,
            extra_change,
        },
    ))
}
