//! Mesh-dependent energy norms, errors against exact solutions and
//! empirical convergence rates.
//!
//! `‖φ‖²_dG = Σ_K |φ|²_{H²(K)} + Σ_E σ1 h_E⁻³ ‖[φ]‖²_E + Σ_E σ2 h_E⁻¹ ‖[∇φ·ν]‖²_E`
//! over interior and boundary edges. The function-jump sum is dropped on
//! continuous spaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    dot, edge_points, edge_sides, element_data, frobenius, trace_at, ElementData, PenaltyParams, DATA_DEGREE,
    EDGE_POINTS,
};
use crate::mesh::{Mesh, Point};
use crate::problems::Problem;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::space::{combine_hessians, DofMap, FieldPair, Jet, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("exact solution unavailable at ({0}, {1}): {2}")]
    Exact(f64, f64, String),
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("rate inputs must be positive and of equal length")]
    InvalidRateInput,
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub level: usize,
    pub ndof: usize,
    pub err_u: f64,
    pub err_v: f64,
    pub rate_u: Option<f64>,
    pub rate_v: Option<f64>,
    pub newton_iters: usize,
    pub eta_total: Option<f64>,
}

/// Value and gradient of a local field at physical `x`.
fn side_trace(data: &ElementData, c: &[f64; 6], x: Point) -> (f64, [f64; 2]) {
    let (vals, grads) = trace_at(data, x);
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for i in 0..6 {
        v += c[i] * vals[i];
        g[0] += c[i] * grads[i][0];
        g[1] += c[i] * grads[i][1];
    }
    (v, g)
}

/// Edge penalty part of the squared norm of `(exact − field)` on edge `e`.
/// Without `exact` this is the norm of `field` itself.
fn edge_part<const K: usize>(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
    fields: &[&[f64]; K],
    exact: Option<&(dyn Fn(Point) -> Result<[Jet; K], NormError> + Sync)>,
    e: usize,
) -> Result<[f64; K], NormError> {
    let rule = edge_rule(EDGE_POINTS).expect("supported edge rule");
    let edge = &mesh.edges()[e];
    let nu = edge.normal;
    let p1 = params.jump_weight(dofmap.method(), edge.length);
    let p2 = params.normal_weight(edge.length);
    let sides = edge_sides(edge);
    let mut out = [0.0; K];
    for (x, w) in edge_points(mesh, edge, &rule) {
        let mut jump = [0.0; K];
        let mut jump_grad = [[0.0; 2]; K];
        for side in &sides {
            for k in 0..K {
                let c = dofmap.local_coefficients(fields[k], side.t);
                let (v, g) = side_trace(&elements[side.t], &c, x);
                jump[k] += side.sign * v;
                jump_grad[k][0] += side.sign * g[0];
                jump_grad[k][1] += side.sign * g[1];
            }
        }
        // the exact solution is continuous: it only enters through the
        // boundary trace
        let trace = match exact {
            Some(f) if edge.is_boundary() => Some(f(x)?),
            _ => None,
        };
        for k in 0..K {
            let (mut j, mut gn) = (jump[k], dot(jump_grad[k], nu));
            if exact.is_some() {
                (j, gn) = (-j, -gn);
            }
            if let Some(t) = &trace {
                j += t[k].value;
                gn += dot(t[k].grad, nu);
            }
            out[k] += w * (p1 * j * j + p2 * gn * gn);
        }
    }
    Ok(out)
}

fn norms_sq<const K: usize>(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
    fields: [&[f64]; K],
    exact: Option<&(dyn Fn(Point) -> Result<[Jet; K], NormError> + Sync)>,
) -> Result<[f64; K], NormError> {
    for f in &fields {
        dofmap.check_len(f)?;
    }
    let rule = triangle_rule(DATA_DEGREE).expect("supported triangle rule");
    let nt = mesh.num_triangles();
    let parts: Vec<Result<[f64; K], NormError>> = (0..nt + mesh.num_edges())
        .into_par_iter()
        .map(|k| {
            if k >= nt {
                return edge_part(mesh, elements, dofmap, params, &fields, exact, k - nt);
            }
            let data = &elements[k];
            let hh: [_; K] = std::array::from_fn(|i| combine_hessians(&data.hess, &dofmap.local_coefficients(fields[i], k)));
            let mut out = [0.0; K];
            match exact {
                None => {
                    for i in 0..K {
                        out[i] = data.map.area * frobenius(&hh[i], &hh[i]);
                    }
                }
                Some(f) => {
                    let jac = 2.0 * data.map.area;
                    for (q, w) in rule.weights.iter().enumerate() {
                        let jets = f(data.map.to_physical(rule.reference_point(q)))?;
                        for i in 0..K {
                            let mut d = jets[i].hess;
                            for (r, row) in d.iter_mut().enumerate() {
                                for (c, v) in row.iter_mut().enumerate() {
                                    *v -= hh[i][r][c];
                                }
                            }
                            out[i] += w * jac * frobenius(&d, &d);
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut total = [0.0; K];
    for p in parts {
        let p = p?;
        for i in 0..K {
            total[i] += p[i];
        }
    }
    Ok(total)
}

/// `‖φ‖_dG` of a discrete field.
pub fn dg_norm(field: &[f64], mesh: &Mesh, dofmap: &DofMap, params: &PenaltyParams) -> Result<f64, NormError> {
    dg_norm_with(field, mesh, &element_data(mesh), dofmap, params)
}

pub fn dg_norm_with(
    field: &[f64],
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
) -> Result<f64, NormError> {
    let [s] = norms_sq(mesh, elements, dofmap, params, [field], None)?;
    Ok(s.sqrt())
}

/// `√(‖u‖²_dG + ‖v‖²_dG)`
pub fn pair_norm_with(
    psi: &FieldPair,
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
) -> Result<f64, NormError> {
    let [u, v] = norms_sq(mesh, elements, dofmap, params, [&psi.u, &psi.v], None)?;
    Ok((u + v).sqrt())
}

/// `‖u − u_h‖_dG` for an exact solution given by its jets.
pub fn error_dg_norm(
    exact: impl Fn(Point) -> Jet + Sync,
    field: &[f64],
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &PenaltyParams,
) -> Result<f64, NormError> {
    let f = |p: Point| Ok([exact(p)]);
    let [s] = norms_sq(mesh, &element_data(mesh), dofmap, params, [field], Some(&f))?;
    Ok(s.sqrt())
}

/// `(‖u − u_h‖_dG, ‖v − v_h‖_dG)` against the problem's exact pair.
pub fn problem_errors(
    problem: &Problem,
    psi: &FieldPair,
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
) -> Result<(f64, f64), NormError> {
    if !problem.has_exact() {
        return Err(NormError::NoExactSolution);
    }
    let f = |p: Point| match problem.exact(p) {
        Ok(Some((u, v))) => Ok([u, v]),
        Ok(None) => Err(NormError::NoExactSolution),
        Err(e) => Err(NormError::Exact(p[0], p[1], e.to_string())),
    };
    let [u, v] = norms_sq(mesh, elements, dofmap, params, [&psi.u, &psi.v], Some(&f))?;
    Ok((u.sqrt(), v.sqrt()))
}

/// `rate(ℓ) = 2 log(e_{ℓ−1}/e_ℓ) / log(ndof_ℓ/ndof_{ℓ−1})`; the first entry
/// is `None`.
pub fn rate(errors: &[f64], ndofs: &[usize]) -> Result<Vec<Option<f64>>, NormError> {
    if errors.len() != ndofs.len() || errors.is_empty() {
        return Err(NormError::InvalidRateInput);
    }
    if errors.iter().any(|&e| !(e > 0.0 && e.is_finite())) || ndofs.contains(&0) {
        return Err(NormError::InvalidRateInput);
    }
    let mut out = vec![None];
    for l in 1..errors.len() {
        let dn = (ndofs[l] as f64 / ndofs[l - 1] as f64).ln();
        out.push((dn != 0.0).then(|| 2.0 * (errors[l - 1] / errors[l]).ln() / dn));
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::space::Method;

    #[test]
    fn rate_examples() {
        let r = rate(&[1.0, 0.5], &[100, 400]).unwrap();
        assert!((r[1].unwrap() - 1.0).abs() < 1e-14);
        let r = rate(&[0.3, 0.3], &[100, 400]).unwrap();
        assert_eq!(r[1], Some(0.0));
        let r = rate(&[0.0310832754, 0.0137172531], &[352, 1472]).unwrap();
        // tabulated values are truncated to four decimals
        assert_eq!((r[1].unwrap() * 1e4).floor() / 1e4, 1.1434);
        assert_eq!(r[0], None);
        assert!(rate(&[1.0, -1.0], &[1, 2]).is_err());
        assert!(rate(&[1.0], &[1, 2]).is_err());
    }

    #[test]
    fn constant_field_norm() {
        let mesh = unit_square_mesh().uniform_refine();
        let dofmap = DofMap::new(&mesh, Method::Dg);
        let params = PenaltyParams::default();
        let one = vec![1.0; dofmap.ndof()];
        let expected: f64 = mesh
            .edges()
            .iter()
            .filter(|e| e.is_boundary())
            .map(|e| 20.0 / (e.length * e.length))
            .sum::<f64>()
            .sqrt();
        assert!((dg_norm(&one, &mesh, &dofmap, &params).unwrap() - expected).abs() < 1e-12 * expected);
        assert_eq!(dg_norm(&vec![0.0; dofmap.ndof()], &mesh, &dofmap, &params).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_is_reproduced() {
        let mesh = unit_square_mesh().uniform_refine();
        let dofmap = DofMap::new(&mesh, Method::Dg);
        // nonzero on the boundary, so the boundary trace terms are exercised
        let q = |p: Point| p[0] * p[1] + 0.5 * p[0] * p[0];
        let exact = |p: Point| Jet {
            value: q(p),
            grad: [p[1] + p[0], p[0]],
            hess: [[1.0, 1.0], [1.0, 0.0]],
        };
        let field = dofmap.interpolate(q);
        let e = error_dg_norm(exact, &field, &mesh, &dofmap, &PenaltyParams::default()).unwrap();
        assert!(e < 1e-11, "{e}");
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 10.0, 100.0];
        let y = x.map(|v: f64| 3.0 * v.powf(-0.5));
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-14);
    }
}
