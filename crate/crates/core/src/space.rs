//! Quadratic Lagrange spaces: broken P2 for the dG scheme and continuous P2
//! vanishing on the boundary for the C0 interior penalty scheme.
//!
//! Local degrees of freedom are ordered as the three vertices followed by
//! the three edge midpoints; midpoint `3 + i` lies on the edge opposite
//! vertex `i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("triangle {0} out of range")]
    TriangleOutOfRange(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Discretization flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Discontinuous Galerkin on broken P2.
    Dg,
    /// C0 interior penalty on continuous P2 with zero boundary values.
    Ip,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dg => "dg",
            Method::Ip => "ip",
        }
    }
}

pub type Mat2 = [[f64; 2]; 2];

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Mat2,
}

/// P2 Lagrange shape functions on the reference triangle.
pub struct ReferenceBasis;

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

impl ReferenceBasis {
    pub const NODES: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];

    fn bary(p: [f64; 2]) -> [f64; 3] {
        [1.0 - p[0] - p[1], p[0], p[1]]
    }

    pub fn values(p: [f64; 2]) -> [f64; 6] {
        let l = Self::bary(p);
        let mut out = [0.0; 6];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            out[i] = l[i] * (2.0 * l[i] - 1.0);
            out[3 + i] = 4.0 * l[j] * l[k];
        }
        out
    }

    pub fn gradients(p: [f64; 2]) -> [[f64; 2]; 6] {
        let l = Self::bary(p);
        let g = BARY_GRAD;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for a in 0..2 {
                out[i][a] = (4.0 * l[i] - 1.0) * g[i][a];
                out[3 + i][a] = 4.0 * (l[k] * g[j][a] + l[j] * g[k][a]);
            }
        }
        out
    }

    /// Hessians are constant on the reference element.
    pub fn hessians() -> [Mat2; 6] {
        let g = BARY_GRAD;
        let mut out = [[[0.0; 2]; 2]; 6];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for a in 0..2 {
                for b in 0..2 {
                    out[i][a][b] = 4.0 * g[i][a] * g[i][b];
                    out[3 + i][a][b] = 4.0 * (g[j][a] * g[k][b] + g[k][a] * g[j][b]);
                }
            }
        }
        out
    }
}

/// Affine map `x = x0 + B x̂` of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jac: Mat2,
    pub inv: Mat2,
    pub area: f64,
}

impl ElementMap {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.corners(t);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self {
            origin: a,
            jac,
            inv,
            area: 0.5 * det,
        }
    }

    pub fn to_physical(&self, p: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * p[0] + self.jac[0][1] * p[1],
            self.origin[1] + self.jac[1][0] * p[0] + self.jac[1][1] * p[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// `B⁻ᵀ ĝ`
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// `B⁻ᵀ Ĥ B⁻¹`; exact for affine maps.
    pub fn push_hessian(&self, h: Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for b in 0..2 {
                    for d in 0..2 {
                        s += self.inv[b][a] * h[b][d] * self.inv[d][c];
                    }
                }
                *v = s;
            }
        }
        out
    }

    /// Physical gradients of the six shape functions at reference point `p`.
    pub fn gradients(&self, p: [f64; 2]) -> [[f64; 2]; 6] {
        ReferenceBasis::gradients(p).map(|g| self.push_gradient(g))
    }

    /// Physical Hessians of the six shape functions.
    pub fn hessians(&self) -> [Mat2; 6] {
        ReferenceBasis::hessians().map(|h| self.push_hessian(h))
    }
}

/// Local-to-global numbering.
#[derive(Debug, Clone)]
pub struct DofMap {
    method: Method,
    local: Vec<[Option<usize>; 6]>,
    ndof: usize,
    /// Global P2 nodes removed from the unknowns (IP mode only).
    constrained: Vec<usize>,
    /// Physical location of every unknown.
    dof_points: Vec<Point>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, method: Method) -> Self {
        match method {
            Method::Dg => Self::broken(mesh),
            Method::Ip => Self::continuous(mesh),
        }
    }

    fn broken(mesh: &Mesh) -> Self {
        let nt = mesh.num_triangles();
        let mut local = Vec::with_capacity(nt);
        let mut dof_points = Vec::with_capacity(6 * nt);
        for t in 0..nt {
            let map = ElementMap::new(mesh, t);
            local.push(std::array::from_fn(|i| Some(6 * t + i)));
            dof_points.extend(ReferenceBasis::NODES.iter().map(|&p| map.to_physical(p)));
        }
        Self {
            method: Method::Dg,
            local,
            ndof: 6 * nt,
            constrained: Vec::new(),
            dof_points,
        }
    }

    fn continuous(mesh: &Mesh) -> Self {
        let nv = mesh.num_vertices();
        let nnodes = nv + mesh.num_edges();
        let mut on_boundary = vec![false; nnodes];
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.is_boundary() {
                on_boundary[edge.vertices[0]] = true;
                on_boundary[edge.vertices[1]] = true;
                on_boundary[nv + e] = true;
            }
        }
        let mut index = vec![None; nnodes];
        let mut constrained = Vec::new();
        let mut dof_points = Vec::new();
        for node in 0..nnodes {
            if on_boundary[node] {
                constrained.push(node);
                continue;
            }
            index[node] = Some(dof_points.len());
            dof_points.push(if node < nv {
                mesh.vertices()[node]
            } else {
                let e = &mesh.edges()[node - nv];
                let a = mesh.vertices()[e.vertices[0]];
                let b = mesh.vertices()[e.vertices[1]];
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            });
        }
        let local = (0..mesh.num_triangles())
            .map(|t| {
                let v = mesh.triangles()[t].vertices;
                let e = mesh.triangle_edges(t);
                [
                    index[v[0]],
                    index[v[1]],
                    index[v[2]],
                    index[nv + e[0]],
                    index[nv + e[1]],
                    index[nv + e[2]],
                ]
            })
            .collect();
        Self {
            method: Method::Ip,
            local,
            ndof: dof_points.len(),
            constrained,
            dof_points,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn num_triangles(&self) -> usize {
        self.local.len()
    }

    /// Global indices of the local dofs of triangle `t`; `None` marks a
    /// boundary node fixed to zero.
    #[inline]
    pub fn local(&self, t: usize) -> &[Option<usize>; 6] {
        &self.local[t]
    }

    pub fn constrained_nodes(&self) -> &[usize] {
        &self.constrained
    }

    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.ndof {
            return Err(SpaceError::LengthMismatch {
                got: coeffs.len(),
                expected: self.ndof,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn local_coefficients(&self, coeffs: &[f64], t: usize) -> [f64; 6] {
        self.local[t].map(|g| g.map_or(0.0, |g| coeffs[g]))
    }

    /// Nodal interpolation; constrained boundary nodes are zero by
    /// construction.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_points.iter().map(|&p| f(p)).collect()
    }
}

/// Evaluates a discrete field on triangle `t` at reference point `p`.
pub fn eval(mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64], t: usize, p: [f64; 2]) -> Result<Jet, SpaceError> {
    if t >= mesh.num_triangles() || t >= dofmap.num_triangles() {
        return Err(SpaceError::TriangleOutOfRange(t));
    }
    dofmap.check_len(coeffs)?;
    let c = dofmap.local_coefficients(coeffs, t);
    let map = ElementMap::new(mesh, t);
    let values = ReferenceBasis::values(p);
    let grads = map.gradients(p);
    let hess = map.hessians();
    let mut jet = Jet::default();
    for i in 0..6 {
        jet.value += c[i] * values[i];
        for a in 0..2 {
            jet.grad[a] += c[i] * grads[i][a];
            for b in 0..2 {
                jet.hess[a][b] += c[i] * hess[i][a][b];
            }
        }
    }
    Ok(jet)
}

/// Hessian of a local P2 combination (constant per triangle).
pub fn combine_hessians(hess: &[Mat2; 6], c: &[f64; 6]) -> Mat2 {
    let mut h = [[0.0; 2]; 2];
    for i in 0..6 {
        for a in 0..2 {
            for b in 0..2 {
                h[a][b] += c[i] * hess[i][a][b];
            }
        }
    }
    h
}

/// Coefficients of the coupled pair `(u_h, v_h)` over one [`DofMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldPair {
    pub fn zeros(ndof: usize) -> Self {
        Self {
            u: vec![0.0; ndof],
            v: vec![0.0; ndof],
        }
    }

    pub fn ndof(&self) -> usize {
        self.u.len()
    }

    /// Block vector `[u; v]`.
    pub fn to_block(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.u.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.v);
        x
    }

    pub fn from_block(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            u: x[..n].to_vec(),
            v: x[n..].to_vec(),
        }
    }

    pub fn sub(&self, other: &FieldPair) -> FieldPair {
        FieldPair {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a - b).collect(),
        }
    }
}
