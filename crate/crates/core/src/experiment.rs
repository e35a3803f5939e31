//! Convergence experiments on the manufactured and constant-load problems.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapt::{adaptive_run, solve_level, AdaptError, AdaptiveOptions};
use crate::assembly::{AssemblyError, Discretization, PenaltyParams, SparseSystem};
use crate::estimator::EstimatorReport;
use crate::mesh::Mesh;
use crate::norms::rate;
use crate::problems::Problem;
use crate::solver::{NewtonOptions, NewtonReport};
use crate::space::{FieldPair, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    SquareDg,
    SquareIp,
    LshapeDg,
    LshapeIp,
    LshapeAdaptiveDg,
    LshapeAdaptiveIp,
    LshapeAdaptiveF1,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::SquareDg,
        Experiment::SquareIp,
        Experiment::LshapeDg,
        Experiment::LshapeIp,
        Experiment::LshapeAdaptiveDg,
        Experiment::LshapeAdaptiveIp,
        Experiment::LshapeAdaptiveF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SquareDg => "square-dg",
            Experiment::SquareIp => "square-ip",
            Experiment::LshapeDg => "lshape-dg",
            Experiment::LshapeIp => "lshape-ip",
            Experiment::LshapeAdaptiveDg => "lshape-adaptive-dg",
            Experiment::LshapeAdaptiveIp => "lshape-adaptive-ip",
            Experiment::LshapeAdaptiveF1 => "lshape-adaptive-f1",
        }
    }

    pub fn problem(self) -> Problem {
        match self {
            Experiment::SquareDg | Experiment::SquareIp => Problem::square(),
            Experiment::LshapeAdaptiveF1 => Problem::constant_load(),
            _ => Problem::lshape(),
        }
    }

    pub fn method(self) -> Method {
        match self {
            Experiment::SquareDg | Experiment::LshapeDg | Experiment::LshapeAdaptiveDg => Method::Dg,
            _ => Method::Ip,
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            Experiment::LshapeAdaptiveDg | Experiment::LshapeAdaptiveIp | Experiment::LshapeAdaptiveF1
        )
    }

    /// Levels run when none are requested.
    pub fn default_levels(self) -> usize {
        match self {
            Experiment::SquareDg | Experiment::LshapeDg => 5,
            Experiment::SquareIp | Experiment::LshapeIp => 6,
            _ => 20,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownExperiment(pub String);

impl fmt::Display for UnknownExperiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown experiment '{}'", self.0)
    }
}

impl std::error::Error for UnknownExperiment {}

impl FromStr for Experiment {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub levels: usize,
    pub params: PenaltyParams,
    pub theta: f64,
    pub newton: NewtonOptions,
    pub ndof_budget: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            levels: experiment.default_levels(),
            params: PenaltyParams::default(),
            theta: 0.3,
            newton: NewtonOptions::default(),
            ndof_budget: None,
        }
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub level: usize,
    pub ndof: usize,
    pub err_u: Option<f64>,
    pub rate_u: Option<f64>,
    pub err_v: Option<f64>,
    pub rate_v: Option<f64>,
    pub eta_total: f64,
    pub rate_eta: Option<f64>,
    /// `√(err_u² + err_v²) / eta_total`
    pub efficiency: Option<f64>,
    pub newton_iters: usize,
}

pub const TABLE_HEADER: &str = "level,ndof,err_u,rate_u,err_v,rate_v,eta_total,rate_eta,efficiency,newton_iters";

fn sig10(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.9e}"))
}

impl TableRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.level,
            self.ndof,
            sig10(self.err_u),
            sig10(self.rate_u),
            sig10(self.err_v),
            sig10(self.rate_v),
            sig10(Some(self.eta_total)),
            sig10(self.rate_eta),
            sig10(self.efficiency),
            self.newton_iters
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<TableRow>,
    pub newton: Vec<NewtonReport>,
    /// Triangle count per level.
    pub triangles: Vec<usize>,
    pub final_mesh: Mesh,
    pub final_solution: FieldPair,
    pub final_estimator: EstimatorReport,
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TABLE_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", row.csv())?;
        }
        Ok(())
    }

    /// Log-log plot data: ndof against estimator and error.
    pub fn write_plot_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "ndof,eta_total,err_total")?;
        for row in &self.rows {
            let err = row.err_u.zip(row.err_v).map(|(u, v)| u.hypot(v));
            writeln!(w, "{},{},{}", row.ndof, sig10(Some(row.eta_total)), sig10(err))?;
        }
        Ok(())
    }

    /// Newton system linearized at the final solution.
    pub fn final_system(&self) -> Result<SparseSystem, AssemblyError> {
        let c = &self.config;
        let problem = c.experiment.problem();
        let disc = Discretization::for_problem(&self.final_mesh, c.experiment.method(), c.params, &problem)?;
        disc.newton_system(&self.final_solution)
    }
}

struct LevelData {
    ndof: usize,
    eta: f64,
    errors: Option<(f64, f64)>,
    newton: NewtonReport,
    triangles: usize,
}

fn rates(values: &[f64], ndofs: &[usize]) -> Vec<Option<f64>> {
    if values.len() < 2 {
        return vec![None; values.len()];
    }
    rate(values, ndofs).unwrap_or_else(|_| vec![None; values.len()])
}

fn table(levels: &[LevelData]) -> Vec<TableRow> {
    let ndofs: Vec<usize> = levels.iter().map(|l| l.ndof).collect();
    let etas: Vec<f64> = levels.iter().map(|l| l.eta).collect();
    let rate_eta = rates(&etas, &ndofs);
    let (rate_u, rate_v) = if levels.iter().all(|l| l.errors.is_some()) {
        let eu: Vec<f64> = levels.iter().map(|l| l.errors.unwrap().0).collect();
        let ev: Vec<f64> = levels.iter().map(|l| l.errors.unwrap().1).collect();
        (rates(&eu, &ndofs), rates(&ev, &ndofs))
    } else {
        (vec![None; levels.len()], vec![None; levels.len()])
    };
    levels
        .iter()
        .enumerate()
        .map(|(i, l)| TableRow {
            level: i,
            ndof: l.ndof,
            err_u: l.errors.map(|e| e.0),
            rate_u: rate_u[i],
            err_v: l.errors.map(|e| e.1),
            rate_v: rate_v[i],
            eta_total: l.eta,
            rate_eta: rate_eta[i],
            efficiency: l.errors.map(|(u, v)| u.hypot(v) / l.eta),
            newton_iters: l.newton.iterations,
        })
        .collect()
}

/// Runs the configured experiment. Uniform experiments refine the initial
/// mesh `levels − 1` times; adaptive ones run at most `levels` levels.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult, AdaptError> {
    let exp = config.experiment;
    let problem = exp.problem();
    let method = exp.method();
    let budget = config.ndof_budget.unwrap_or(usize::MAX);
    let mut data = Vec::new();
    let (final_mesh, final_solution, final_estimator) = if exp.is_adaptive() {
        let opts = AdaptiveOptions {
            theta: config.theta,
            max_levels: config.levels,
            ndof_budget: budget,
            newton: config.newton,
        };
        let trace = adaptive_run(&problem, method, config.params, &opts)?;
        for l in trace.levels {
            data.push(LevelData {
                ndof: l.ndof,
                eta: l.eta,
                errors: l.err_u.zip(l.err_v),
                newton: l.newton,
                triangles: l.triangles,
            });
        }
        (trace.final_mesh, trace.final_solution, trace.final_estimator)
    } else {
        let mut mesh = problem.initial_mesh();
        let mut level = 0;
        loop {
            let solve = solve_level(&problem, &mesh, method, config.params, &config.newton, level)?;
            data.push(LevelData {
                ndof: solve.solution.ndof(),
                eta: solve.estimator.total(),
                errors: solve.errors,
                newton: solve.newton,
                triangles: mesh.num_triangles(),
            });
            level += 1;
            let next = (level < config.levels).then(|| mesh.uniform_refine());
            match next {
                Some(m) if crate::space::DofMap::new(&m, method).ndof() <= budget => mesh = m,
                _ => break (mesh, solve.solution, solve.estimator),
            }
        }
    };
    Ok(ExperimentResult {
        config: *config,
        rows: table(&data),
        triangles: data.iter().map(|l| l.triangles).collect(),
        newton: data.into_iter().map(|l| l.newton).collect(),
        final_mesh,
        final_solution,
        final_estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("square".parse::<Experiment>().is_err());
    }

    #[test]
    fn two_square_levels() {
        let mut cfg = ExperimentConfig::new(Experiment::SquareDg);
        cfg.levels = 2;
        let res = run(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert!(res.rows[0].rate_u.is_none());
        assert!(res.rows[1].rate_u.is_some());
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), TABLE_HEADER);
        assert_eq!(text.lines().count(), 3);
    }
}
