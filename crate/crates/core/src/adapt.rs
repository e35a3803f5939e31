//! Adaptive loop: solve, estimate, mark, refine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, Discretization, PenaltyParams};
use crate::estimator::{dorfler_mark, problem_estimator, EstimatorError, EstimatorReport};
use crate::mesh::{Mesh, MeshError};
use crate::norms::{problem_errors, NormError};
use crate::problems::Problem;
use crate::solver::{newton_solve, NewtonOptions, NewtonReport, SolverError};
use crate::space::{DofMap, FieldPair, Method};

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("bulk parameter {0} outside (0, 1)")]
    InvalidTheta(f64),
    #[error("initial mesh has {ndof} dofs, above the budget of {budget}")]
    BudgetTooSmall { ndof: usize, budget: usize },
    #[error("level {level}: {source}")]
    Solver { level: usize, source: SolverError },
    #[error("level {level}: Newton did not converge in {iterations} iterations")]
    NotConverged { level: usize, iterations: usize },
    #[error("level {level}: {source}")]
    Assembly { level: usize, source: AssemblyError },
    #[error("level {level}: {source}")]
    Estimator { level: usize, source: EstimatorError },
    #[error("level {level}: {source}")]
    Norm { level: usize, source: NormError },
    #[error("level {level}: {source}")]
    Mesh { level: usize, source: MeshError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    pub theta: f64,
    pub max_levels: usize,
    pub ndof_budget: usize,
    pub newton: NewtonOptions,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            theta: 0.3,
            max_levels: 20,
            ndof_budget: usize::MAX,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLevel {
    pub level: usize,
    pub ndof: usize,
    pub triangles: usize,
    pub eta: f64,
    pub err_u: Option<f64>,
    pub err_v: Option<f64>,
    /// Zero on the last level, which is not refined.
    pub marked: usize,
    pub newton: NewtonReport,
}

#[derive(Debug, Clone)]
pub struct AdaptiveTrace {
    pub levels: Vec<AdaptiveLevel>,
    pub final_mesh: Mesh,
    pub final_solution: FieldPair,
    pub final_estimator: EstimatorReport,
}

/// One solve on a fixed mesh, with estimator and errors when available.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub solution: FieldPair,
    pub newton: NewtonReport,
    pub estimator: EstimatorReport,
    pub errors: Option<(f64, f64)>,
}

/// Solve, estimate and measure on `mesh`. Non-convergence is an error.
pub fn solve_level(
    problem: &Problem,
    mesh: &Mesh,
    method: Method,
    params: PenaltyParams,
    newton: &NewtonOptions,
    level: usize,
) -> Result<LevelSolve, AdaptError> {
    let disc = Discretization::for_problem(mesh, method, params, problem)
        .map_err(|source| AdaptError::Assembly { level, source })?;
    let (solution, report) = newton_solve(&disc, newton).map_err(|source| AdaptError::Solver { level, source })?;
    if !report.converged {
        return Err(AdaptError::NotConverged {
            level,
            iterations: report.iterations,
        });
    }
    let estimator =
        problem_estimator(&solution, &disc, problem).map_err(|source| AdaptError::Estimator { level, source })?;
    let errors = if problem.has_exact() {
        Some(
            problem_errors(problem, &solution, mesh, disc.elements(), disc.dofmap(), &params)
                .map_err(|source| AdaptError::Norm { level, source })?,
        )
    } else {
        None
    };
    Ok(LevelSolve {
        solution,
        newton: report,
        estimator,
        errors,
    })
}

/// Adaptive refinement from `problem.initial_mesh()`. Every level is solved
/// from a fresh initial guess. The loop ends after `max_levels` levels or
/// when the next mesh would exceed `ndof_budget`.
pub fn adaptive_run(
    problem: &Problem,
    method: Method,
    params: PenaltyParams,
    opts: &AdaptiveOptions,
) -> Result<AdaptiveTrace, AdaptError> {
    if !(opts.theta > 0.0 && opts.theta < 1.0) {
        return Err(AdaptError::InvalidTheta(opts.theta));
    }
    let mut mesh = problem.initial_mesh();
    let ndof0 = DofMap::new(&mesh, method).ndof();
    if ndof0 > opts.ndof_budget {
        return Err(AdaptError::BudgetTooSmall {
            ndof: ndof0,
            budget: opts.ndof_budget,
        });
    }
    let mut levels = Vec::new();
    for level in 0..opts.max_levels.max(1) {
        let solve = solve_level(problem, &mesh, method, params, &opts.newton, level)?;
        let mut record = AdaptiveLevel {
            level,
            ndof: solve.solution.ndof(),
            triangles: mesh.num_triangles(),
            eta: solve.estimator.total(),
            err_u: solve.errors.map(|e| e.0),
            err_v: solve.errors.map(|e| e.1),
            marked: 0,
            newton: solve.newton,
        };
        let mut next = None;
        if level + 1 < opts.max_levels {
            let marked = dorfler_mark(&solve.estimator, opts.theta)
                .map_err(|source| AdaptError::Estimator { level, source })?;
            let refined = mesh.bisect(&marked).map_err(|source| AdaptError::Mesh { level, source })?;
            if !marked.is_empty() && DofMap::new(&refined, method).ndof() <= opts.ndof_budget {
                record.marked = marked.len();
                next = Some(refined);
            }
        }
        levels.push(record);
        match next {
            Some(m) => mesh = m,
            None => {
                return Ok(AdaptiveTrace {
                    levels,
                    final_mesh: mesh,
                    final_solution: solve.solution,
                    final_estimator: solve.estimator,
                })
            }
        }
    }
    unreachable!("the last level always returns")
}
