//! Quadrature rules on the reference triangle `(0,0), (1,0), (0,1)` and on
//! the reference edge `[0, 1]`.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
//! rules. They have strictly positive weights and strictly interior nodes,
//! which matters for the L-shaped problems whose loads are singular at a
//! mesh vertex.

use thiserror::Error;

/// Highest total degree served by [`triangle_rule`].
pub const MAX_TRIANGLE_DEGREE: usize = 14;
/// Largest point count served by [`edge_rule`].
pub const MAX_EDGE_POINTS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuadratureError {
    #[error("unsupported triangle quadrature degree {0} (supported: 1..={MAX_TRIANGLE_DEGREE})")]
    UnsupportedDegree(usize),
    #[error("unsupported edge point count {0} (supported: 1..={MAX_EDGE_POINTS})")]
    UnsupportedPoints(usize),
}

/// A rule on the reference triangle. Points are barycentric `(λ0, λ1, λ2)`
/// with `λ1 = x̂`, `λ2 = ŷ`; weights sum to the reference area `1/2`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl TriangleRule {
    /// Reference coordinates `(x̂, ŷ)` of node `q`.
    #[inline]
    pub fn reference_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrates `f(x̂, ŷ)` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }
}

/// A rule on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&t, w)| w * f(t)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, Newton iteration on the
/// three-term recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                let kf = k as f64;
                p0 = ((2.0 * kf + 1.0) * z * p1 - kf * p2) / (kf + 1.0);
            }
            // p0 = P_n(z), p1 = P_{n-1}(z)
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule with `npts` nodes on `[0, 1]`, exact to degree
/// `2·npts − 1`.
pub fn edge_rule(npts: usize) -> Result<EdgeRule, QuadratureError> {
    if npts == 0 || npts > MAX_EDGE_POINTS {
        return Err(QuadratureError::UnsupportedPoints(npts));
    }
    let (x, w) = gauss_legendre(npts);
    Ok(EdgeRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        exact_degree: 2 * npts - 1,
    })
}

/// Rule on the reference triangle exact for total degree `≤ degree`.
///
/// The collapsed map `x̂ = s`, `ŷ = t(1 − s)` turns a degree-`d` polynomial
/// into degree `d + 1` in `s` (Jacobian `1 − s`) and `d` in `t`, so
/// `n = ⌈(d + 2)/2⌉` Gauss points per direction suffice.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule, QuadratureError> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let n = (degree + 2).div_ceil(2);
    let line = edge_rule(n).expect("n ≤ 8 is always supported");
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&s, &ws) in line.points.iter().zip(&line.weights) {
        for (&t, &wt) in line.points.iter().zip(&line.weights) {
            let x = s;
            let y = t * (1.0 - s);
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exact_degree: degree,
    })
}
