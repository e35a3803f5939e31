//! Benchmark problems for the von Kármán system
//! `Δ²u = [u,v] + f`, `Δ²v = −½[u,u] + g` with clamped boundary conditions.
//!
//! Manufactured problems carry closed-form `u`, `v`; their loads
//! `f = Δ²u − [u,v]` and `g = Δ²v + ½[u,u]` are obtained by fourth-order
//! Taylor-mode differentiation of the closed forms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{lshape_mesh, unit_square_mesh, Mesh, Point};
use crate::space::Jet;
use crate::taylor::{bracket, taylor_eval, Taylor4};

/// Points closer than this to the re-entrant corner are refused.
pub const CORNER_EXCLUSION: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("evaluation at ({0}, {1}) is too close to the singular corner")]
    SingularPoint(f64, f64),
    #[error("corner angle {0} outside (π, 2π]")]
    InvalidAngle(f64),
    #[error("no non-characteristic root found for angle {0}")]
    NoRoot(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Square,
    LShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Square,
    LShapeSingular { omega: f64 },
    ConstantLoad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    kind: Kind,
    /// Elliptic regularity index.
    pub alpha: f64,
}

/// Exact solution jets `(u, v)` at a point.
pub type ExactPair = (Jet, Jet);

fn jet_of(t: &Taylor4) -> Jet {
    Jet {
        value: t.value(),
        grad: t.gradient(),
        hess: t.hessian(),
    }
}

/// Smallest non-characteristic root in `(0, 1)` of `sin²(αω) = α² sin²ω`.
///
/// The squared equation splits into `sin(αω) = ±α sin ω`; `α = 0` and
/// `α = 1` are the characteristic roots and are excluded. Each branch is
/// scanned for sign changes and refined by bisection.
pub fn alpha_root(omega: f64) -> Result<f64, ProblemError> {
    if !(omega > PI && omega <= 2.0 * PI) {
        return Err(ProblemError::InvalidAngle(omega));
    }
    let s = omega.sin();
    let branches = [-s, s].map(|c| move |a: f64| (a * omega).sin() + a * c);
    let n = 10_000;
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let mut best: Option<f64> = None;
    for h in branches {
        let mut a = lo;
        let mut ha = h(a);
        for k in 1..=n {
            let b = lo + (hi - lo) * k as f64 / n as f64;
            let hb = h(b);
            if ha * hb <= 0.0 {
                let root = bisect(&h, a, b, ha);
                best = Some(best.map_or(root, |r: f64| r.min(root)));
                break;
            }
            a = b;
            ha = hb;
        }
    }
    best.ok_or(ProblemError::NoRoot(omega))
}

fn bisect(h: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ha: f64) -> f64 {
    while b - a > 1e-15 {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if hm == 0.0 {
            return m;
        }
        if ha * hm < 0.0 {
            b = m;
        } else {
            a = m;
            ha = hm;
        }
    }
    0.5 * (a + b)
}

/// Angular part of the corner singularity for exponent `alpha` and
/// opening angle `omega`.
pub fn corner_profile(alpha: f64, omega: f64, theta: f64) -> f64 {
    let (am, ap) = (alpha - 1.0, alpha + 1.0);
    let a = (am * omega).sin() / am - (ap * omega).sin() / ap;
    let c = (am * omega).cos() - (ap * omega).cos();
    a * ((am * theta).cos() - (ap * theta).cos()) - ((am * theta).sin() / am - (ap * theta).sin() / ap) * c
}

fn corner_profile_taylor(alpha: f64, omega: f64, theta: Taylor4) -> Taylor4 {
    let (am, ap) = (alpha - 1.0, alpha + 1.0);
    let a = (am * omega).sin() / am - (ap * omega).sin() / ap;
    let c = (am * omega).cos() - (ap * omega).cos();
    ((theta * am).cos() - (theta * ap).cos()) * a - ((theta * am).sin() * (1.0 / am) - (theta * ap).sin() * (1.0 / ap)) * c
}

/// Polar angle in `[0, 2π)`.
pub fn polar_angle(p: Point) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

fn square_u(x: Taylor4, y: Taylor4) -> Taylor4 {
    let fx = x * (1.0 - x);
    let fy = y * (1.0 - y);
    fx * fx * fy * fy
}

fn square_v(x: Taylor4, y: Taylor4) -> Taylor4 {
    (x * PI).sin().powi(2) * (y * PI).sin().powi(2)
}

/// `(1 − x²)²(1 − y²)² r^{1+α} g(θ)` expanded around `(x0, y0)`.
///
/// The angle is expanded as `θ0 + atan(cross/dot)` with
/// `cross = x0·y − y0·x` and `dot = x0·x + y0·y`, which has no branch cut
/// near the expansion point.
fn lshape_u(x: Taylor4, y: Taylor4, alpha: f64, omega: f64) -> Result<Taylor4, ProblemError> {
    let (x0, y0) = (x.value(), y.value());
    if x0.hypot(y0) < CORNER_EXCLUSION {
        return Err(ProblemError::SingularPoint(x0, y0));
    }
    let theta0 = polar_angle([x0, y0]);
    let cross = y * x0 - x * y0;
    let dot = x * x0 + y * y0;
    let theta = (cross * dot.powf(-1.0)).atan() + theta0;
    let r2 = x * x + y * y;
    let radial = r2.powf(0.5 * (1.0 + alpha));
    let cx = 1.0 - x * x;
    let cy = 1.0 - y * y;
    Ok(cx * cx * cy * cy * radial * corner_profile_taylor(alpha, omega, theta))
}

impl Problem {
    /// Unit square with `u = x²y²(1−x)²(1−y)²`, `v = sin²(πx) sin²(πy)`.
    pub fn square() -> Self {
        Self {
            kind: Kind::Square,
            alpha: 1.0,
        }
    }

    /// L-shape with `u = v` the slightly singular corner function for
    /// `ω = 3π/2`.
    pub fn lshape() -> Self {
        let omega = 1.5 * PI;
        let alpha = alpha_root(omega).expect("3π/2 has a root");
        Self {
            kind: Kind::LShapeSingular { omega },
            alpha,
        }
    }

    /// L-shape with `f ≡ 1`, `g ≡ 0` and no known solution.
    pub fn constant_load() -> Self {
        Self {
            kind: Kind::ConstantLoad,
            alpha: alpha_root(1.5 * PI).expect("3π/2 has a root"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Square => "square",
            Kind::LShapeSingular { .. } => "lshape",
            Kind::ConstantLoad => "lshape-f1",
        }
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            Kind::Square => Domain::Square,
            _ => Domain::LShape,
        }
    }

    /// The coarse layout of the domain.
    pub fn base_mesh(&self) -> Mesh {
        match self.domain() {
            Domain::Square => unit_square_mesh(),
            Domain::LShape => lshape_mesh(),
        }
    }

    /// Starting triangulation of the convergence studies: the base layout
    /// refined once (16 triangles on the square, 24 on the L-shape).
    pub fn initial_mesh(&self) -> Mesh {
        self.base_mesh().uniform_refine()
    }

    pub fn domain_area(&self) -> f64 {
        match self.domain() {
            Domain::Square => 1.0,
            Domain::LShape => 3.0,
        }
    }

    pub fn has_exact(&self) -> bool {
        !matches!(self.kind, Kind::ConstantLoad)
    }

    /// Taylor expansions of `(u, v)` at `p`, `None` without a known solution.
    pub fn expand(&self, p: Point) -> Result<Option<(Taylor4, Taylor4)>, ProblemError> {
        match self.kind {
            Kind::Square => Ok(Some((
                taylor_eval(|x, y| Ok::<_, ProblemError>(square_u(x, y)), p)?,
                taylor_eval(|x, y| Ok::<_, ProblemError>(square_v(x, y)), p)?,
            ))),
            Kind::LShapeSingular { omega } => {
                let u = taylor_eval(|x, y| lshape_u(x, y, self.alpha, omega), p)?;
                Ok(Some((u, u)))
            }
            Kind::ConstantLoad => Ok(None),
        }
    }

    /// Value, gradient and Hessian of the exact pair.
    pub fn exact(&self, p: Point) -> Result<Option<ExactPair>, ProblemError> {
        Ok(self.expand(p)?.map(|(u, v)| (jet_of(&u), jet_of(&v))))
    }

    /// Loads `(f, g)` at `p`.
    pub fn loads(&self, p: Point) -> Result<(f64, f64), ProblemError> {
        match self.expand(p)? {
            Some((u, v)) => {
                let f = u.bilaplacian() - bracket(&u, &v);
                let g = v.bilaplacian() + 0.5 * bracket(&u, &u);
                Ok((f, g))
            }
            None => Ok((1.0, 0.0)),
        }
    }

    /// `f(p)`, NaN at refused points.
    pub fn f(&self, p: Point) -> f64 {
        self.loads(p).map_or(f64::NAN, |l| l.0)
    }

    /// `g(p)`, NaN at refused points.
    pub fn g(&self, p: Point) -> f64 {
        self.loads(p).map_or(f64::NAN, |l| l.1)
    }

    /// Whether the second load vanishes identically.
    pub fn has_zero_g(&self) -> bool {
        matches!(self.kind, Kind::ConstantLoad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_exponent() {
        let a = alpha_root(1.5 * PI).unwrap();
        assert!((a - 0.5444837367).abs() < 1e-9, "{a}");
        let res = (a * 1.5 * PI).sin().powi(2) - a * a * (1.5 * PI).sin().powi(2);
        assert!(res.abs() <= 1e-12);
        assert!((alpha_root(2.0 * PI).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(alpha_root(3.0), Err(ProblemError::InvalidAngle(_))));
    }

    #[test]
    fn corner_profile_boundary_values() {
        let a = alpha_root(1.5 * PI).unwrap();
        let w = 1.5 * PI;
        assert!(corner_profile(a, w, 0.0).abs() < 1e-14);
        assert!(corner_profile(a, w, w).abs() < 1e-13);
        let d = 1e-6;
        let g_prime_0 = (corner_profile(a, w, d) - corner_profile(a, w, -d)) / (2.0 * d);
        assert!(g_prime_0.abs() < 1e-9);
        let g_prime_w = (corner_profile(a, w, w + d) - corner_profile(a, w, w - d)) / (2.0 * d);
        assert!(g_prime_w.abs() < 1e-8, "{g_prime_w}");
    }

    #[test]
    fn square_values() {
        let p = Problem::square();
        let (u, _) = p.exact([0.5, 0.5]).unwrap().unwrap();
        assert!((u.value - 0.00390625).abs() < 1e-16);
    }

    #[test]
    fn lshape_vanishes_on_outer_boundary() {
        let p = Problem::lshape();
        for s in [-0.9f64, -0.3, 0.2, 0.7] {
            for q in [[1.0, s.abs()], [-1.0, s], [s, 1.0], [-s.abs(), -1.0]] {
                let (u, _) = p.exact(q).unwrap().unwrap();
                assert!(u.value.abs() < 1e-14, "{q:?}");
            }
        }
        assert!(matches!(p.loads([0.0, 0.0]), Err(ProblemError::SingularPoint(..))));
        assert!(p.f([0.0, 0.0]).is_nan());
    }

    #[test]
    fn constant_load_contract() {
        let p = Problem::constant_load();
        assert_eq!(p.loads([0.3, 0.4]).unwrap(), (1.0, 0.0));
        assert_eq!(p.exact([0.3, 0.4]).unwrap(), None);
        assert!(!p.has_exact());
    }

    #[test]
    fn polar_angle_range() {
        assert!((polar_angle([0.0, -1.0]) - 1.5 * PI).abs() < 1e-15);
        assert_eq!(polar_angle([1.0, 0.0]), 0.0);
    }
}
