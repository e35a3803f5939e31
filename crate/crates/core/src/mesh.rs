//! Conforming triangulations of polygonal domains.
//!
//! A [`Mesh`] is immutable; [`Mesh::uniform_refine`] (red refinement) and
//! [`Mesh::bisect`] (newest vertex bisection with closure) return new meshes.
//!
//! Conventions:
//! - triangles are stored counter-clockwise;
//! - local edge `i` of a triangle is the edge opposite local vertex `i`;
//! - every triangle carries the local index of its refinement edge
//!   (equivalently of its newest vertex);
//! - an interior edge is shared by `plus < minus`, its unit normal points
//!   from `plus` into `minus`; a boundary edge has only `plus` and an
//!   outward normal.
//!
//! The initial unit-square mesh is the criss-cross split of `(0,1)²` by both
//! diagonals (4 right isosceles triangles meeting at the centre). The
//! initial L-shape mesh splits each of its three unit squares by the
//! diagonal through the re-entrant corner `(0,0)`. Initial refinement edges
//! are the longest edges.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {0} references a vertex that does not exist")]
    VertexOutOfRange(usize),
    #[error("triangle {0} is degenerate or clockwise")]
    NotPositivelyOriented(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("marked triangle {0} does not exist")]
    MarkedOutOfRange(usize),
    #[error("triangle {0} has an invalid refinement edge index")]
    CorruptRefinementEdge(usize),
    #[error("bisection closure did not terminate within {0} steps")]
    ClosureDiverged(usize),
    #[error("edge {0} does not exist")]
    EdgeOutOfRange(usize),
    #[error("conformity audit failed: {0}")]
    NotConforming(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    /// Local index of the refinement edge (the edge opposite the newest vertex).
    pub ref_edge: u8,
    pub generation: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller vertex index first.
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    pub normal: [f64; 2],
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

/// Orientation data needed to form jumps and averages across an edge.
///
/// `[φ] = φ|plus − φ|minus` and `⟨φ⟩ = ½(φ|plus + φ|minus)` on interior
/// edges; on boundary edges `[φ] = ⟨φ⟩ = φ|plus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub plus: usize,
    pub minus: Option<usize>,
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    0.5 * (u[0] * v[1] - u[1] * v[0])
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Local index of the longest edge; ties go to the lowest index.
fn longest_edge(p: [Point; 3]) -> u8 {
    let mut best = 0;
    let mut best_len = -1.0;
    for i in 0..3 {
        let l = dist(p[(i + 1) % 3], p[(i + 2) % 3]);
        if l > best_len * (1.0 + 1e-12) {
            best = i;
            best_len = l;
        }
    }
    best as u8
}

impl Mesh {
    /// Builds a mesh and its edge adjacency. Triangles must be
    /// counter-clockwise.
    pub fn new(vertices: Vec<Point>, triangles: Vec<Triangle>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.vertices.iter().any(|&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange(t));
            }
            if tri.ref_edge > 2 {
                return Err(MeshError::CorruptRefinementEdge(t));
            }
            let [a, b, c] = tri.vertices.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if area <= 0.0 {
                return Err(MeshError::NotPositivelyOriented(t));
            }
            areas.push(area);
            diameters.push(dist(a, b).max(dist(b, c)).max(dist(c, a)));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * triangles.len());
        let mut edges: Vec<Edge> = Vec::with_capacity(2 * triangles.len());
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri.vertices[(i + 1) % 3];
                let b = tri.vertices[(i + 2) % 3];
                let k = key(a, b);
                let id = match lookup.get(&k) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.minus.is_some() {
                            return Err(MeshError::NonManifoldEdge(k.0, k.1));
                        }
                        edge.minus = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(k, e);
                        edges.push(Edge {
                            vertices: [k.0, k.1],
                            plus: t,
                            minus: None,
                            normal: [0.0; 2],
                            length: dist(vertices[k.0], vertices[k.1]),
                        });
                        e
                    }
                };
                *slot = id;
            }
            triangle_edges.push(local);
        }

        // Normals point out of `plus`, which is the smaller triangle index
        // because triangles are visited in order.
        for edge in &mut edges {
            let a = vertices[edge.vertices[0]];
            let b = vertices[edge.vertices[1]];
            let t = sub(b, a);
            let mut n = [t[1] / edge.length, -t[0] / edge.length];
            let tri = &triangles[edge.plus];
            let c = tri.vertices.map(|v| vertices[v]);
            let centroid = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let out = sub(mid, centroid);
            if n[0] * out[0] + n[1] * out[1] < 0.0 {
                n = [-n[0], -n[1]];
            }
            edge.normal = n;
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            triangle_edges,
            areas,
            diameters,
        })
    }

    /// Builds a mesh from vertex triples, with each refinement edge set to
    /// the longest edge.
    pub fn from_triangles(vertices: Vec<Point>, triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, v) in triangles.iter().enumerate() {
            if v.iter().any(|&i| i >= vertices.len()) {
                return Err(MeshError::VertexOutOfRange(t));
            }
            let p = v.map(|i| vertices[i]);
            tris.push(Triangle {
                vertices: *v,
                ref_edge: longest_edge(p),
                generation: 0,
            });
        }
        Self::new(vertices, tris)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge ids of triangle `t`, entry `i` opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// `h_K = diam(K)`.
    pub fn diameter(&self, t: usize) -> f64 {
        self.diameters[t]
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn frame(&self, edge: usize) -> Result<EdgeFrame, MeshError> {
        let e = self.edges.get(edge).ok_or(MeshError::EdgeOutOfRange(edge))?;
        Ok(EdgeFrame {
            plus: e.plus,
            minus: e.minus,
            normal: e.normal,
        })
    }

    /// Smallest interior angle (radians) over all triangles.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .flat_map(|t| triangle_angles(self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest ratio `h_E / h_K` over all triangles and their edges.
    pub fn min_edge_to_diameter_ratio(&self) -> f64 {
        let mut r = f64::INFINITY;
        for t in 0..self.num_triangles() {
            for e in self.triangle_edges[t] {
                r = r.min(self.edges[e].length / self.diameters[t]);
            }
        }
        r
    }

    /// Checks the structural invariants: positive orientation, interior
    /// edges with two triangles, boundary edges with one, and no hanging
    /// vertex inside any boundary-flagged edge. The hanging-node check is
    /// quadratic and meant for tests.
    pub fn audit(&self) -> Result<(), MeshError> {
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.corners(t);
            if signed_area(a, b, c) <= 0.0 {
                return Err(MeshError::NotPositivelyOriented(t));
            }
        }
        let mut count = vec![0usize; self.num_edges()];
        for te in &self.triangle_edges {
            for &e in te {
                count[e] += 1;
            }
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let expected = if edge.is_boundary() { 1 } else { 2 };
            if count[e] != expected {
                return Err(MeshError::NotConforming(format!("edge {e} has {} triangles", count[e])));
            }
            let n = edge.normal;
            if ((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() > 1e-14 {
                return Err(MeshError::NotConforming(format!("edge {e} normal not unit")));
            }
        }
        for edge in self.edges.iter().filter(|e| e.is_boundary()) {
            let a = self.vertices[edge.vertices[0]];
            let b = self.vertices[edge.vertices[1]];
            let t = sub(b, a);
            let l2 = t[0] * t[0] + t[1] * t[1];
            for (v, &p) in self.vertices.iter().enumerate() {
                if v == edge.vertices[0] || v == edge.vertices[1] {
                    continue;
                }
                let d = sub(p, a);
                let cross = t[0] * d[1] - t[1] * d[0];
                let s = (t[0] * d[0] + t[1] * d[1]) / l2;
                if cross.abs() <= 1e-12 * l2 && s > 1e-12 && s < 1.0 - 1e-12 {
                    return Err(MeshError::NotConforming(format!(
                        "hanging vertex {v} on edge ({}, {})",
                        edge.vertices[0], edge.vertices[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Red refinement: every triangle is split into four congruent children
    /// through its edge midpoints. Children get their longest edge as
    /// refinement edge.
    pub fn uniform_refine(&self) -> Mesh {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.vertices;
            let te = self.triangle_edges[t];
            // midpoint opposite local vertex i
            let (m_bc, m_ca, m_ab) = (nv + te[0], nv + te[1], nv + te[2]);
            for v in [[a, m_ab, m_ca], [b, m_bc, m_ab], [c, m_ca, m_bc], [m_ab, m_bc, m_ca]] {
                triangles.push(Triangle {
                    vertices: v,
                    ref_edge: longest_edge(v.map(|i| vertices[i])),
                    generation: tri.generation + 1,
                });
            }
        }
        Mesh::new(vertices, triangles).expect("red refinement preserves validity")
    }

    /// Newest vertex bisection of the marked triangles followed by the
    /// conformity closure.
    ///
    /// Closure works on edges: the refinement edge of every marked triangle
    /// is bisected, and any triangle holding a bisected edge must bisect its
    /// own refinement edge as well. Each triangle is
    /// then split across its refinement edge; the two children (newest
    /// vertex = the midpoint, refinement edge = the edge opposite it) are
    /// split again whenever their refinement edge is bisected.
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        let nt = self.num_triangles();
        for &t in marked {
            if t >= nt {
                return Err(MeshError::MarkedOutOfRange(t));
            }
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let ref_edge_id = |t: usize| self.triangle_edges[t][self.triangles[t].ref_edge as usize];

        let mut split = vec![false; self.num_edges()];
        let mut queue = Vec::new();
        for &t in marked {
            let e = ref_edge_id(t);
            if !split[e] {
                split[e] = true;
                queue.push(e);
            }
        }
        let limit = self.num_edges() + 1;
        let mut steps = 0;
        while let Some(e) = queue.pop() {
            steps += 1;
            if steps > limit {
                return Err(MeshError::ClosureDiverged(limit));
            }
            let edge = &self.edges[e];
            for t in std::iter::once(edge.plus).chain(edge.minus) {
                let r = ref_edge_id(t);
                if !split[r] {
                    split[r] = true;
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, edge) in self.edges.iter().enumerate() {
            if split[e] {
                let a = self.vertices[edge.vertices[0]];
                let b = self.vertices[edge.vertices[1]];
                midpoint.insert((edge.vertices[0], edge.vertices[1]), vertices.len());
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }

        let mut triangles = Vec::with_capacity(nt + 2 * midpoint.len());
        let mut stack = Vec::new();
        for tri in &self.triangles {
            stack.push(*tri);
            while let Some(cur) = stack.pop() {
                let r = cur.ref_edge as usize;
                let a = cur.vertices[r];
                let b = cur.vertices[(r + 1) % 3];
                let c = cur.vertices[(r + 2) % 3];
                match midpoint.get(&key(b, c)) {
                    Some(&m) => {
                        let generation = cur.generation + 1;
                        // pushed in reverse so (m, a, b) is emitted first
                        stack.push(Triangle {
                            vertices: [m, c, a],
                            ref_edge: 0,
                            generation,
                        });
                        stack.push(Triangle {
                            vertices: [m, a, b],
                            ref_edge: 0,
                            generation,
                        });
                    }
                    None => triangles.push(cur),
                }
            }
        }
        Mesh::new(vertices, triangles)
    }

    /// Plain-text export: `VERTICES`, `TRIANGLES` and `BOUNDARY` sections.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "VERTICES {}", self.num_vertices())?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "TRIANGLES {}", self.num_triangles())?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{i} {} {} {}", t.vertices[0], t.vertices[1], t.vertices[2])?;
        }
        writeln!(w, "BOUNDARY {}", self.num_boundary_edges())?;
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            writeln!(w, "{} {}", e.vertices[0], e.vertices[1])?;
        }
        Ok(())
    }
}

fn triangle_angles(p: [Point; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let u = sub(p[(i + 1) % 3], p[i]);
        let v = sub(p[(i + 2) % 3], p[i]);
        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        *slot = cos.clamp(-1.0, 1.0).acos();
    }
    out
}

/// Criss-cross mesh of the unit square: 4 triangles meeting at `(½, ½)`.
pub fn unit_square_mesh() -> Mesh {
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
    Mesh::from_triangles(vertices, &[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]).expect("valid layout")
}

/// L-shape `(−1,1)² ∖ ([0,1) × (−1,0])` as 6 triangles; every diagonal
/// passes through the re-entrant corner `(0,0)`.
pub fn lshape_mesh() -> Mesh {
    let vertices = vec![
        [-1.0, -1.0],
        [0.0, -1.0],
        [0.0, 0.0],
        [-1.0, 0.0],
        [-1.0, 1.0],
        [0.0, 1.0],
        [1.0, 1.0],
        [1.0, 0.0],
    ];
    Mesh::from_triangles(
        vertices,
        &[[0, 1, 2], [0, 2, 3], [3, 2, 4], [2, 5, 4], [2, 7, 6], [2, 6, 5]],
    )
    .expect("valid layout")
}
