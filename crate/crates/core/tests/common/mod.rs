//! Dense reference implementations of the discrete forms. Every quantity is
//! evaluated pointwise from `space::eval` on unit coefficient vectors, with
//! no local-to-global shortcuts.
#![allow(dead_code)]

use vkplate::assembly::PenaltyParams;
use vkplate::mesh::{Mesh, Point};
use vkplate::quadrature::{edge_rule, triangle_rule};
use vkplate::space::{eval, DofMap, ElementMap, Jet, Method};

pub struct Oracle<'a> {
    pub mesh: &'a Mesh,
    pub dofmap: &'a DofMap,
    /// (triangle, reference point, physical weight)
    tri: Vec<(usize, [f64; 2], f64)>,
    /// (edge, physical point, weight)
    edge: Vec<(usize, Point, f64)>,
}

/// Pointwise samples of one field.
pub struct Samples {
    pub tri: Vec<Jet>,
    pub edge: Vec<(Jet, Option<Jet>)>,
}

fn bracket(a: &Jet, b: &Jet) -> f64 {
    a.hess[0][0] * b.hess[1][1] + a.hess[1][1] * b.hess[0][0] - 2.0 * a.hess[0][1] * b.hess[0][1]
}

fn hn(j: &Jet, n: [f64; 2]) -> [f64; 2] {
    [j.hess[0][0] * n[0] + j.hess[0][1] * n[1], j.hess[1][0] * n[0] + j.hess[1][1] * n[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl<'a> Oracle<'a> {
    pub fn new(mesh: &'a Mesh, dofmap: &'a DofMap) -> Self {
        let rule = triangle_rule(8).unwrap();
        let mut tri = Vec::new();
        for t in 0..mesh.num_triangles() {
            let area = mesh.area(t);
            for (q, w) in rule.weights.iter().enumerate() {
                tri.push((t, rule.reference_point(q), 2.0 * area * w));
            }
        }
        let erule = edge_rule(7).unwrap();
        let mut edge = Vec::new();
        for (e, ed) in mesh.edges().iter().enumerate() {
            let a = mesh.vertices()[ed.vertices[0]];
            let b = mesh.vertices()[ed.vertices[1]];
            for (s, w) in erule.points.iter().zip(&erule.weights) {
                edge.push((e, [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * ed.length));
            }
        }
        Self { mesh, dofmap, tri, edge }
    }

    fn at(&self, c: &[f64], t: usize, x: Point) -> Jet {
        let p = ElementMap::new(self.mesh, t).to_reference(x);
        eval(self.mesh, self.dofmap, c, t, p).unwrap()
    }

    pub fn sample(&self, c: &[f64]) -> Samples {
        let tri = self.tri.iter().map(|&(t, p, _)| eval(self.mesh, self.dofmap, c, t, p).unwrap()).collect();
        let edge = self
            .edge
            .iter()
            .map(|&(e, x, _)| {
                let ed = &self.mesh.edges()[e];
                (self.at(c, ed.plus, x), ed.minus.map(|m| self.at(c, m, x)))
            })
            .collect();
        Samples { tri, edge }
    }

    pub fn unit(&self, i: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dofmap.ndof()];
        c[i] = 1.0;
        c
    }

    pub fn basis(&self) -> Vec<Samples> {
        (0..self.dofmap.ndof()).map(|i| self.sample(&self.unit(i))).collect()
    }

    /// Physical points of the triangle rule, for evaluating data.
    pub fn tri_points(&self) -> Vec<Point> {
        self.tri
            .iter()
            .map(|&(t, p, _)| ElementMap::new(self.mesh, t).to_physical(p))
            .collect()
    }

    /// `a(η, χ)`
    pub fn a(&self, eta: &Samples, chi: &Samples, params: &PenaltyParams) -> f64 {
        let mut s = 0.0;
        for (q, &(_, _, w)) in self.tri.iter().enumerate() {
            let (a, b) = (&eta.tri[q], &chi.tri[q]);
            for r in 0..2 {
                for c in 0..2 {
                    s += w * a.hess[r][c] * b.hess[r][c];
                }
            }
        }
        for (q, &(e, _, w)) in self.edge.iter().enumerate() {
            let ed = &self.mesh.edges()[e];
            let n = ed.normal;
            let h = ed.length;
            let parts = |f: &(Jet, Option<Jet>)| -> (f64, [f64; 2], [f64; 2]) {
                match &f.1 {
                    Some(m) => {
                        let (hp, hm) = (hn(&f.0, n), hn(m, n));
                        (
                            f.0.value - m.value,
                            [f.0.grad[0] - m.grad[0], f.0.grad[1] - m.grad[1]],
                            [0.5 * (hp[0] + hm[0]), 0.5 * (hp[1] + hm[1])],
                        )
                    }
                    None => (f.0.value, f.0.grad, hn(&f.0, n)),
                }
            };
            let (je, ge, he) = parts(&eta.edge[q]);
            let (jc, gc, hc) = parts(&chi.edge[q]);
            s -= w * (dot(gc, he) + dot(ge, hc));
            if self.dofmap.method() == Method::Dg {
                s += w * params.sigma1 / (h * h * h) * je * jc;
            }
            s += w * params.sigma2 / h * dot(ge, n) * dot(gc, n);
        }
        s
    }

    /// `b(w, z, φ) = −½ Σ ∫ [w, z] φ`
    pub fn b(&self, w: &Samples, z: &Samples, phi: &Samples) -> f64 {
        self.tri
            .iter()
            .enumerate()
            .map(|(q, &(_, _, wt))| -0.5 * wt * bracket(&w.tri[q], &z.tri[q]) * phi.tri[q].value)
            .sum()
    }

    /// `∫ f φ`
    pub fn load(&self, f: impl Fn(Point) -> f64, phi: &Samples) -> f64 {
        self.tri_points()
            .iter()
            .zip(&self.tri)
            .enumerate()
            .map(|(q, (&x, &(_, _, w)))| w * f(x) * phi.tri[q].value)
            .sum()
    }

    /// Per-triangle and per-edge indicators of `(u, v)`, each term summed
    /// pointwise.
    pub fn estimator(&self, u: &Samples, v: &Samples, loads: impl Fn(Point) -> (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        let mut vol = vec![0.0; self.mesh.num_triangles()];
        for (q, (&(t, _, w), x)) in self.tri.iter().zip(self.tri_points()).enumerate() {
            let (f, g) = loads(x);
            let (a, b) = (&u.tri[q], &v.tri[q]);
            let h4 = self.mesh.diameter(t).powi(4);
            vol[t] += h4 * w * ((f + bracket(a, b)).powi(2) + (bracket(a, a) - 2.0 * g).powi(2));
        }
        let mut edge = vec![0.0; self.mesh.num_edges()];
        for (q, &(e, _, w)) in self.edge.iter().enumerate() {
            let ed = &self.mesh.edges()[e];
            let (n, h) = (ed.normal, ed.length);
            for field in [u, v] {
                let (p, m) = &field.edge[q];
                let (jump, jg) = match m {
                    Some(m) => {
                        let (hp, hm) = (hn(p, n), hn(m, n));
                        let jh = [hp[0] - hm[0], hp[1] - hm[1]];
                        edge[e] += w * h * dot(jh, jh);
                        (p.value - m.value, [p.grad[0] - m.grad[0], p.grad[1] - m.grad[1]])
                    }
                    None => (p.value, p.grad),
                };
                if self.dofmap.method() == Method::Dg {
                    edge[e] += w * jump * jump / (h * h * h);
                }
                edge[e] += w * dot(jg, jg) / h;
            }
        }
        (vol, edge)
    }

    pub fn dense_a(&self, params: &PenaltyParams) -> Vec<Vec<f64>> {
        let basis = self.basis();
        (0..basis.len())
            .map(|i| (0..basis.len()).map(|j| self.a(&basis[j], &basis[i], params)).collect())
            .collect()
    }
}

/// Largest entrywise difference relative to the largest entry of `b`.
pub fn rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Square `[0,1]²` split along its diagonal.
pub fn two_triangle_mesh() -> Mesh {
    Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], &[[0, 1, 2], [0, 2, 3]]).unwrap()
}

/// Lower-triangular Cholesky factor, `None` if a pivot is not positive.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 0.0 {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    Some(l)
}
