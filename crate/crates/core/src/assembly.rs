//! Assembly of the penalized bilinear form, the trilinear bracket form, the
//! loads and the coupled Newton system.
//!
//! All matrices follow the convention `M[i][j] = a(φ_j, φ_i)`: rows are test
//! functions, columns trial functions. Edge sums run over interior and
//! boundary edges; on a boundary edge the jump and the average are both the
//! one-sided trace.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Edge, Mesh, Point};
use crate::problems::Problem;
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};
use crate::space::{combine_hessians, DofMap, ElementMap, FieldPair, Mat2, Method, ReferenceBasis, SpaceError};
use crate::sparse::{CsrMatrix, Triplets};

/// Triangle rule for the bilinear and trilinear forms.
pub const FORM_DEGREE: usize = 4;
/// Triangle rule for loads, error norms and estimators.
pub const DATA_DEGREE: usize = 10;
/// Gauss points per edge.
pub const EDGE_POINTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("invalid penalty parameters: {0}")]
    InvalidPenalty(String),
    #[error("load is not finite on triangle {0}")]
    NonFiniteLoad(usize),
    #[error("dof map has {got} triangles, mesh has {expected}")]
    MeshMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Penalty weights `σ1` (function jumps, dG only) and `σ2` (normal
/// derivative jumps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            sigma1: 20.0,
            sigma2: 20.0,
        }
    }
}

impl PenaltyParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Self {
        Self { sigma1, sigma2 }
    }

    /// `σ2 ≥ 1` always; `σ1 > 0` in dG mode. `σ1` is not read in IP mode.
    pub fn validate(&self, method: Method) -> Result<(), AssemblyError> {
        if !(self.sigma2.is_finite() && self.sigma2 >= 1.0) {
            return Err(AssemblyError::InvalidPenalty(format!("sigma2 = {} must be >= 1", self.sigma2)));
        }
        if method == Method::Dg && !(self.sigma1.is_finite() && self.sigma1 > 0.0) {
            return Err(AssemblyError::InvalidPenalty(format!("sigma1 = {} must be > 0", self.sigma1)));
        }
        Ok(())
    }

    /// Weight of `‖[φ]‖²_E`, zero in IP mode.
    pub fn jump_weight(&self, method: Method, h: f64) -> f64 {
        match method {
            Method::Dg => self.sigma1 / (h * h * h),
            Method::Ip => 0.0,
        }
    }

    /// Weight of `‖[∇φ·ν]‖²_E`.
    pub fn normal_weight(&self, h: f64) -> f64 {
        self.sigma2 / h
    }
}

/// `[a, b] = a_xx b_yy + a_yy b_xx − 2 a_xy b_xy` for constant Hessians.
#[inline]
pub fn hessian_bracket(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[1][1] + a[1][1] * b[0][0] - 2.0 * a[0][1] * b[0][1]
}

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn mat_vec(h: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
}

#[inline]
pub(crate) fn frobenius(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Affine map and physical shape Hessians of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementData {
    pub map: ElementMap,
    pub hess: [Mat2; 6],
}

pub fn element_data(mesh: &Mesh) -> Vec<ElementData> {
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let map = ElementMap::new(mesh, t);
            ElementData {
                map,
                hess: map.hessians(),
            }
        })
        .collect()
}

/// One side of an edge: triangle, jump sign and averaging weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSide {
    pub t: usize,
    pub sign: f64,
    pub avg: f64,
}

pub fn edge_sides(edge: &Edge) -> Vec<EdgeSide> {
    match edge.minus {
        Some(m) => vec![
            EdgeSide {
                t: edge.plus,
                sign: 1.0,
                avg: 0.5,
            },
            EdgeSide {
                t: m,
                sign: -1.0,
                avg: 0.5,
            },
        ],
        None => vec![EdgeSide {
            t: edge.plus,
            sign: 1.0,
            avg: 1.0,
        }],
    }
}

/// Physical quadrature points on an edge with weights that include the
/// edge length.
pub fn edge_points(mesh: &Mesh, edge: &Edge, rule: &EdgeRule) -> Vec<(Point, f64)> {
    let a = mesh.vertices()[edge.vertices[0]];
    let b = mesh.vertices()[edge.vertices[1]];
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * edge.length))
        .collect()
}

/// Shape values and physical gradients of triangle `data` at physical `x`.
#[inline]
pub fn trace_at(data: &ElementData, x: Point) -> ([f64; 6], [[f64; 2]; 6]) {
    let p = data.map.to_reference(x);
    (ReferenceBasis::values(p), data.map.gradients(p))
}

/// `∫_T̂ φ̂_i` on the reference triangle.
fn reference_moments(rule: &TriangleRule) -> [f64; 6] {
    let mut m = [0.0; 6];
    for (q, w) in rule.weights.iter().enumerate() {
        let v = ReferenceBasis::values(rule.reference_point(q));
        for i in 0..6 {
            m[i] += w * v[i];
        }
    }
    m
}

fn check_mesh(mesh: &Mesh, dofmap: &DofMap) -> Result<(), AssemblyError> {
    if mesh.num_triangles() != dofmap.num_triangles() {
        return Err(AssemblyError::MeshMismatch {
            got: dofmap.num_triangles(),
            expected: mesh.num_triangles(),
        });
    }
    Ok(())
}

type Local = Vec<(usize, usize, f64)>;

/// Runs `local` over `0..count` in parallel and merges in index order.
fn merge(n: usize, count: usize, local: impl Fn(usize) -> Local + Sync + Send) -> CsrMatrix {
    let parts: Vec<Local> = (0..count).into_par_iter().map(local).collect();
    let mut t = Triplets::with_capacity(n, n, parts.iter().map(Vec::len).sum());
    for part in parts {
        for (r, c, v) in part {
            t.push(r, c, v);
        }
    }
    t.into_csr()
}

fn scatter(dofs: &[Option<usize>], local: &[Vec<f64>]) -> Local {
    let mut out = Vec::with_capacity(local.len() * local.len());
    for (a, row) in local.iter().enumerate() {
        let Some(r) = dofs[a] else { continue };
        for (b, &v) in row.iter().enumerate() {
            if let Some(c) = dofs[b] {
                out.push((r, c, v));
            }
        }
    }
    out
}

fn volume_a(elements: &[ElementData], dofmap: &DofMap, t: usize) -> Local {
    let e = &elements[t];
    let local: Vec<Vec<f64>> = (0..6)
        .map(|a| (0..6).map(|b| e.map.area * frobenius(&e.hess[a], &e.hess[b])).collect())
        .collect();
    scatter(dofmap.local(t), &local)
}

fn edge_a(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
    rule: &EdgeRule,
    e: usize,
) -> Local {
    let edge = &mesh.edges()[e];
    let nu = edge.normal;
    let p1 = params.jump_weight(dofmap.method(), edge.length);
    let p2 = params.normal_weight(edge.length);
    let sides = edge_sides(edge);
    let m = 6 * sides.len();
    let mut dofs = Vec::with_capacity(m);
    let mut avg_hn = Vec::with_capacity(m);
    for side in &sides {
        dofs.extend_from_slice(dofmap.local(side.t));
        for h in &elements[side.t].hess {
            let hn = mat_vec(h, nu);
            avg_hn.push([side.avg * hn[0], side.avg * hn[1]]);
        }
    }
    let mut local = vec![vec![0.0; m]; m];
    let mut jump = vec![0.0; m];
    let mut jump_grad = vec![[0.0; 2]; m];
    for (x, w) in edge_points(mesh, edge, rule) {
        for (s, side) in sides.iter().enumerate() {
            let (vals, grads) = trace_at(&elements[side.t], x);
            for i in 0..6 {
                jump[6 * s + i] = side.sign * vals[i];
                jump_grad[6 * s + i] = [side.sign * grads[i][0], side.sign * grads[i][1]];
            }
        }
        for a in 0..m {
            let gn_a = dot(jump_grad[a], nu);
            for b in 0..m {
                let consistency = dot(jump_grad[a], avg_hn[b]) + dot(jump_grad[b], avg_hn[a]);
                let penalty = p1 * jump[a] * jump[b] + p2 * gn_a * dot(jump_grad[b], nu);
                local[a][b] += w * (penalty - consistency);
            }
        }
    }
    scatter(&dofs, &local)
}

fn assemble_a_with(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    params: &PenaltyParams,
) -> Result<CsrMatrix, AssemblyError> {
    check_mesh(mesh, dofmap)?;
    params.validate(dofmap.method())?;
    let rule = edge_rule(EDGE_POINTS).expect("supported edge rule");
    let nt = mesh.num_triangles();
    let n = dofmap.ndof();
    Ok(merge(n, nt + mesh.num_edges(), |k| {
        if k < nt {
            volume_a(elements, dofmap, k)
        } else {
            edge_a(mesh, elements, dofmap, params, &rule, k - nt)
        }
    }))
}

/// Matrix of `a_dG` (or `a_IP` on a continuous dof map).
pub fn assemble_a(mesh: &Mesh, dofmap: &DofMap, params: &PenaltyParams) -> Result<CsrMatrix, AssemblyError> {
    assemble_a_with(mesh, &element_data(mesh), dofmap, params)
}

fn moments(elements: &[ElementData], t: usize, reference: &[f64; 6]) -> [f64; 6] {
    let jac = 2.0 * elements[t].map.area;
    reference.map(|m| m * jac)
}

fn b_matrix_with(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    w: &[f64],
    reference: &[f64; 6],
) -> Result<CsrMatrix, AssemblyError> {
    check_mesh(mesh, dofmap)?;
    dofmap.check_len(w)?;
    Ok(merge(dofmap.ndof(), mesh.num_triangles(), |t| {
        let e = &elements[t];
        let hw = combine_hessians(&e.hess, &dofmap.local_coefficients(w, t));
        let m = moments(elements, t, reference);
        let local: Vec<Vec<f64>> = (0..6)
            .map(|a| (0..6).map(|b| -0.5 * hessian_bracket(&hw, &e.hess[b]) * m[a]).collect())
            .collect();
        scatter(dofmap.local(t), &local)
    }))
}

fn form_moments() -> [f64; 6] {
    reference_moments(&triangle_rule(FORM_DEGREE).expect("supported triangle rule"))
}

/// `B(w)[i][j] = b(w, φ_j, φ_i) = −½ Σ_K ∫_K [w, φ_j] φ_i`.
pub fn assemble_b_matrix(w: &[f64], mesh: &Mesh, dofmap: &DofMap) -> Result<CsrMatrix, AssemblyError> {
    b_matrix_with(mesh, &element_data(mesh), dofmap, w, &form_moments())
}

fn b_vector_with(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    w: &[f64],
    z: &[f64],
    reference: &[f64; 6],
) -> Result<Vec<f64>, AssemblyError> {
    check_mesh(mesh, dofmap)?;
    dofmap.check_len(w)?;
    dofmap.check_len(z)?;
    let parts: Vec<[f64; 6]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let e = &elements[t];
            let hw = combine_hessians(&e.hess, &dofmap.local_coefficients(w, t));
            let hz = combine_hessians(&e.hess, &dofmap.local_coefficients(z, t));
            let br = hessian_bracket(&hw, &hz);
            moments(elements, t, reference).map(|m| -0.5 * br * m)
        })
        .collect();
    let mut out = vec![0.0; dofmap.ndof()];
    for (t, local) in parts.iter().enumerate() {
        for (g, v) in dofmap.local(t).iter().zip(local) {
            if let Some(g) = g {
                out[*g] += v;
            }
        }
    }
    Ok(out)
}

/// `b(w, z, φ_i)` for every test function.
pub fn b_vector(w: &[f64], z: &[f64], mesh: &Mesh, dofmap: &DofMap) -> Result<Vec<f64>, AssemblyError> {
    b_vector_with(mesh, &element_data(mesh), dofmap, w, z, &form_moments())
}

fn loads_with<const K: usize>(
    mesh: &Mesh,
    elements: &[ElementData],
    dofmap: &DofMap,
    f: &(dyn Fn(Point) -> [f64; K] + Sync),
) -> Result<[Vec<f64>; K], AssemblyError> {
    check_mesh(mesh, dofmap)?;
    let rule = triangle_rule(DATA_DEGREE).expect("supported triangle rule");
    let parts: Vec<Result<[[f64; 6]; K], AssemblyError>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let map = &elements[t].map;
            let jac = 2.0 * map.area;
            let mut local = [[0.0; 6]; K];
            for (q, w) in rule.weights.iter().enumerate() {
                let p = rule.reference_point(q);
                let vals = ReferenceBasis::values(p);
                let data = f(map.to_physical(p));
                for (k, d) in data.iter().enumerate() {
                    if !d.is_finite() {
                        return Err(AssemblyError::NonFiniteLoad(t));
                    }
                    for i in 0..6 {
                        local[k][i] += w * jac * d * vals[i];
                    }
                }
            }
            Ok(local)
        })
        .collect();
    let mut out: [Vec<f64>; K] = std::array::from_fn(|_| vec![0.0; dofmap.ndof()]);
    for (t, part) in parts.into_iter().enumerate() {
        let part = part?;
        for (i, g) in dofmap.local(t).iter().enumerate() {
            if let Some(g) = g {
                for k in 0..K {
                    out[k][*g] += part[k][i];
                }
            }
        }
    }
    Ok(out)
}

/// `L_i = Σ_K ∫_K f φ_i` with the degree-10 rule.
pub fn assemble_load(
    f: impl Fn(Point) -> f64 + Sync,
    mesh: &Mesh,
    dofmap: &DofMap,
) -> Result<Vec<f64>, AssemblyError> {
    let [l] = loads_with(mesh, &element_data(mesh), dofmap, &|p| [f(p)])?;
    Ok(l)
}

/// Square block system over `2·ndof` unknowns ordered `[u; v]`.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Matrix entries as `row col value` lines.
    pub fn write_matrix<W: Write>(&self, w: W) -> io::Result<()> {
        self.matrix.write_coordinate(w)
    }

    /// Right-hand side as `row value` lines.
    pub fn write_rhs<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (r, v) in self.rhs.iter().enumerate() {
            writeln!(w, "{r} {v:.16e}")?;
        }
        Ok(())
    }
}

/// A mesh, a dof map and the state-independent pieces of the discrete
/// problem: the matrix of `a` and the two load vectors.
#[derive(Debug, Clone)]
pub struct Discretization<'m> {
    mesh: &'m Mesh,
    dofmap: DofMap,
    params: PenaltyParams,
    elements: Vec<ElementData>,
    moments: [f64; 6],
    a: CsrMatrix,
    load_f: Vec<f64>,
    load_g: Vec<f64>,
}

impl<'m> Discretization<'m> {
    /// `loads(x)` returns `(f(x), g(x))`.
    pub fn new(
        mesh: &'m Mesh,
        method: Method,
        params: PenaltyParams,
        loads: impl Fn(Point) -> (f64, f64) + Sync,
    ) -> Result<Self, AssemblyError> {
        let dofmap = DofMap::new(mesh, method);
        let elements = element_data(mesh);
        let a = assemble_a_with(mesh, &elements, &dofmap, &params)?;
        let [load_f, load_g] = loads_with(mesh, &elements, &dofmap, &|p| {
            let (f, g) = loads(p);
            [f, g]
        })?;
        Ok(Self {
            mesh,
            dofmap,
            params,
            elements,
            moments: form_moments(),
            a,
            load_f,
            load_g,
        })
    }

    pub fn for_problem(
        mesh: &'m Mesh,
        method: Method,
        params: PenaltyParams,
        problem: &Problem,
    ) -> Result<Self, AssemblyError> {
        Self::new(mesh, method, params, |p| problem.loads(p).unwrap_or((f64::NAN, f64::NAN)))
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn method(&self) -> Method {
        self.dofmap.method()
    }

    pub fn params(&self) -> &PenaltyParams {
        &self.params
    }

    pub fn ndof(&self) -> usize {
        self.dofmap.ndof()
    }

    pub fn elements(&self) -> &[ElementData] {
        &self.elements
    }

    pub fn a_matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn load_f(&self) -> &[f64] {
        &self.load_f
    }

    pub fn load_g(&self) -> &[f64] {
        &self.load_g
    }

    pub fn b_matrix(&self, w: &[f64]) -> Result<CsrMatrix, AssemblyError> {
        b_matrix_with(self.mesh, &self.elements, &self.dofmap, w, &self.moments)
    }

    pub fn b_vector(&self, w: &[f64], z: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        b_vector_with(self.mesh, &self.elements, &self.dofmap, w, z, &self.moments)
    }

    fn check_pair(&self, psi: &FieldPair) -> Result<(), AssemblyError> {
        self.dofmap.check_len(&psi.u)?;
        self.dofmap.check_len(&psi.v)?;
        Ok(())
    }

    /// Newton step at `prev`:
    /// `[[A + 2B(v), 2B(u)], [−2B(u), A]] [u; v] = [2b(u,v,·) + L(f); −b(u,u,·) + L(g)]`.
    pub fn newton_system(&self, prev: &FieldPair) -> Result<SparseSystem, AssemblyError> {
        self.check_pair(prev)?;
        let n = self.ndof();
        let bu = self.b_matrix(&prev.u)?;
        let bv = self.b_matrix(&prev.v)?;
        let mut t = Triplets::with_capacity(2 * n, 2 * n, 2 * self.a.nnz() + bv.nnz() + 2 * bu.nnz());
        t.extend_shifted(&self.a, 0, 0, 1.0);
        t.extend_shifted(&bv, 0, 0, 2.0);
        t.extend_shifted(&bu, 0, n, 2.0);
        t.extend_shifted(&bu, n, 0, -2.0);
        t.extend_shifted(&self.a, n, n, 1.0);
        let buv = self.b_vector(&prev.u, &prev.v)?;
        let buu = self.b_vector(&prev.u, &prev.u)?;
        let mut rhs = Vec::with_capacity(2 * n);
        rhs.extend((0..n).map(|i| 2.0 * buv[i] + self.load_f[i]));
        rhs.extend((0..n).map(|i| -buu[i] + self.load_g[i]));
        Ok(SparseSystem {
            matrix: t.into_csr(),
            rhs,
        })
    }

    /// The Ψ-independent system `[[A, 0], [0, A]] [u; v] = [L(f); L(g)]`.
    pub fn biharmonic_system(&self) -> SparseSystem {
        let n = self.ndof();
        let mut t = Triplets::with_capacity(2 * n, 2 * n, 2 * self.a.nnz());
        t.extend_shifted(&self.a, 0, 0, 1.0);
        t.extend_shifted(&self.a, n, n, 1.0);
        let mut rhs = self.load_f.clone();
        rhs.extend_from_slice(&self.load_g);
        SparseSystem {
            matrix: t.into_csr(),
            rhs,
        }
    }

    /// `N_h(Ψ; φ_i)` as a block vector: `A u + 2b(u,v,·) − L(f)` then
    /// `A v − b(u,u,·) − L(g)`.
    pub fn residual(&self, psi: &FieldPair) -> Result<Vec<f64>, AssemblyError> {
        self.check_pair(psi)?;
        let au = self.a.matvec(&psi.u);
        let av = self.a.matvec(&psi.v);
        let buv = self.b_vector(&psi.u, &psi.v)?;
        let buu = self.b_vector(&psi.u, &psi.u)?;
        let n = self.ndof();
        let mut r = Vec::with_capacity(2 * n);
        r.extend((0..n).map(|i| au[i] + 2.0 * buv[i] - self.load_f[i]));
        r.extend((0..n).map(|i| av[i] - buu[i] - self.load_g[i]));
        Ok(r)
    }
}
