//! Residual a posteriori estimator, data oscillation and Dörfler marking.
//!
//! Volume indicator
//! `η_K² = h_K⁴ (‖f + [u_h, v_h]‖²_K + ‖[u_h, u_h] − 2g‖²_K)`,
//! edge indicator
//! `η_E² = h_E (‖[D²u_h ν]‖² + ‖[D²v_h ν]‖²) + h_E⁻³ (‖[u_h]‖² + ‖[v_h]‖²)
//!        + h_E⁻¹ (‖[∇u_h]‖² + ‖[∇v_h]‖²)`.
//! Hessian jumps are taken on interior edges only; the function and
//! gradient jumps on all edges, with the one-sided trace on the boundary.
//! The function-jump term is dropped on continuous spaces.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    dot, edge_points, edge_sides, hessian_bracket, mat_vec, trace_at, Discretization, DATA_DEGREE, EDGE_POINTS,
};
use crate::mesh::{Mesh, Point};
use crate::problems::Problem;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::space::{combine_hessians, FieldPair, Method, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("load is not finite on triangle {0}")]
    NonFiniteLoad(usize),
    #[error("cannot mark an empty estimator report")]
    Empty,
    #[error("bulk parameter {0} outside (0, 1)")]
    InvalidTheta(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    /// `η_K²` per triangle.
    pub volume_sq: Vec<f64>,
    /// `η_E²` per edge.
    pub edge_sq: Vec<f64>,
    /// `η_K² + Σ_{E ∈ E(K)} η_E²` per triangle.
    pub aggregate_sq: Vec<f64>,
    /// `Σ_K η_K² + Σ_E η_E²`, each edge once.
    pub total_sq: f64,
    /// `osc²(f)`
    pub osc_sq: f64,
}

impl EstimatorReport {
    /// `η = √(Σ_K η_K² + Σ_E η_E²)`
    pub fn total(&self) -> f64 {
        self.total_sq.sqrt()
    }

    /// CSV with header `triangle_id,eta_K_sq,eta_agg_sq`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "triangle_id,eta_K_sq,eta_agg_sq")?;
        for (t, (k, a)) in self.volume_sq.iter().zip(&self.aggregate_sq).enumerate() {
            writeln!(w, "{t},{k:.10e},{a:.10e}")?;
        }
        Ok(())
    }
}

fn sq(v: [f64; 2]) -> f64 {
    dot(v, v)
}

/// Indicators of `psi` on `disc`; `loads(x)` returns `(f(x), g(x))`.
pub fn compute_estimator(
    psi: &FieldPair,
    disc: &Discretization,
    loads: impl Fn(Point) -> (f64, f64) + Sync,
) -> Result<EstimatorReport, EstimatorError> {
    let mesh = disc.mesh();
    let dofmap = disc.dofmap();
    let elements = disc.elements();
    dofmap.check_len(&psi.u)?;
    dofmap.check_len(&psi.v)?;
    let nt = mesh.num_triangles();
    let rule = triangle_rule(DATA_DEGREE).expect("supported triangle rule");
    let erule = edge_rule(EDGE_POINTS).expect("supported edge rule");
    let hess: Vec<_> = (0..nt)
        .map(|t| {
            let h = &elements[t].hess;
            (
                combine_hessians(h, &dofmap.local_coefficients(&psi.u, t)),
                combine_hessians(h, &dofmap.local_coefficients(&psi.v, t)),
            )
        })
        .collect();

    let volume: Vec<Result<(f64, f64), EstimatorError>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let map = &elements[t].map;
            let (hu, hv) = &hess[t];
            let uv = hessian_bracket(hu, hv);
            let uu = hessian_bracket(hu, hu);
            let jac = 2.0 * map.area;
            let (mut res, mut fsum, mut f2sum) = (0.0, 0.0, 0.0);
            for (q, w) in rule.weights.iter().enumerate() {
                let (f, g) = loads(map.to_physical(rule.reference_point(q)));
                if !(f.is_finite() && g.is_finite()) {
                    return Err(EstimatorError::NonFiniteLoad(t));
                }
                let wq = w * jac;
                res += wq * ((f + uv).powi(2) + (uu - 2.0 * g).powi(2));
                fsum += wq * f;
                f2sum += wq * f * f;
            }
            let h4 = mesh.diameter(t).powi(4);
            // ∫(f − f̄)² = ∫f² − (∫f)²/|K|
            let var = (f2sum - fsum * fsum / map.area).max(0.0);
            Ok((h4 * res, h4 * var))
        })
        .collect();
    let mut volume_sq = Vec::with_capacity(nt);
    let mut osc_sq = 0.0;
    for v in volume {
        let (eta, osc) = v?;
        volume_sq.push(eta);
        osc_sq += osc;
    }

    let method = disc.method();
    let edge_sq: Vec<f64> = mesh
        .edges()
        .par_iter()
        .map(|edge| {
            let h = edge.length;
            let nu = edge.normal;
            let sides = edge_sides(edge);
            let mut eta = 0.0;
            if !edge.is_boundary() {
                let (p, m) = (sides[0].t, sides[1].t);
                let ju = mat_vec(&hess[p].0, nu);
                let jv = mat_vec(&hess[p].1, nu);
                let ku = mat_vec(&hess[m].0, nu);
                let kv = mat_vec(&hess[m].1, nu);
                eta += h * h * (sq([ju[0] - ku[0], ju[1] - ku[1]]) + sq([jv[0] - kv[0], jv[1] - kv[1]]));
            }
            for (x, w) in edge_points(mesh, edge, &erule) {
                let mut jump = [0.0; 2];
                let mut jump_grad = [[0.0; 2]; 2];
                for side in &sides {
                    let (vals, grads) = trace_at(&elements[side.t], x);
                    for (k, field) in [&psi.u, &psi.v].into_iter().enumerate() {
                        let c = dofmap.local_coefficients(field, side.t);
                        for i in 0..6 {
                            jump[k] += side.sign * c[i] * vals[i];
                            jump_grad[k][0] += side.sign * c[i] * grads[i][0];
                            jump_grad[k][1] += side.sign * c[i] * grads[i][1];
                        }
                    }
                }
                if method == Method::Dg {
                    eta += w * (jump[0] * jump[0] + jump[1] * jump[1]) / (h * h * h);
                }
                eta += w * (sq(jump_grad[0]) + sq(jump_grad[1])) / h;
            }
            eta
        })
        .collect();

    let mut aggregate_sq = volume_sq.clone();
    for (e, edge) in mesh.edges().iter().enumerate() {
        aggregate_sq[edge.plus] += edge_sq[e];
        if let Some(m) = edge.minus {
            aggregate_sq[m] += edge_sq[e];
        }
    }
    let total_sq = volume_sq.iter().sum::<f64>() + edge_sq.iter().sum::<f64>();
    Ok(EstimatorReport {
        volume_sq,
        edge_sq,
        aggregate_sq,
        total_sq,
        osc_sq,
    })
}

/// Estimator with the loads of `problem`.
pub fn problem_estimator(
    psi: &FieldPair,
    disc: &Discretization,
    problem: &Problem,
) -> Result<EstimatorReport, EstimatorError> {
    compute_estimator(psi, disc, |p| problem.loads(p).unwrap_or((f64::NAN, f64::NAN)))
}

/// `osc²(f) = Σ_K h_K⁴ ‖f − f̄_K‖²_K` with `f̄_K` the mean of `f` over `K`.
pub fn oscillation(f: impl Fn(Point) -> f64 + Sync, mesh: &Mesh) -> f64 {
    let rule = triangle_rule(DATA_DEGREE).expect("supported triangle rule");
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            let area = mesh.area(t);
            let at = |q: usize| {
                let p = rule.reference_point(q);
                let x = [
                    a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1],
                    a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1],
                ];
                f(x)
            };
            let vals: Vec<f64> = (0..rule.len()).map(at).collect();
            let mean = rule.weights.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() * 2.0;
            let var: f64 = rule.weights.iter().zip(&vals).map(|(w, v)| w * (v - mean).powi(2)).sum::<f64>() * 2.0 * area;
            mesh.diameter(t).powi(4) * var
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Smallest set of triangles, taken by decreasing aggregate indicator,
/// carrying at least `theta` of the summed aggregates. Ids are returned in
/// ascending order.
pub fn dorfler_mark(report: &EstimatorReport, theta: f64) -> Result<Vec<usize>, EstimatorError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(EstimatorError::InvalidTheta(theta));
    }
    let eta = &report.aggregate_sq;
    if eta.is_empty() {
        return Err(EstimatorError::Empty);
    }
    let total: f64 = eta.iter().sum();
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]));
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &t in &order {
        // compared as a fraction so that e.g. 3 of 10 equal indicators
        // meet θ = 0.3 exactly
        if total == 0.0 || acc / total >= theta {
            break;
        }
        acc += eta[t];
        marked.push(t);
    }
    marked.sort_unstable();
    Ok(marked)
}
