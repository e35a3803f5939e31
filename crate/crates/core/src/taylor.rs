//! Truncated bivariate Taylor arithmetic through total degree 4.
//!
//! A [`Taylor4`] holds the coefficients `c_ij` of
//! `f(x0 + dx, y0 + dy) ≈ Σ_{i+j≤4} c_ij dxⁱ dyʲ`, so that
//! `∂^{i+j} f / ∂xⁱ∂yʲ = i! j! c_ij`. Products and compositions with
//! univariate functions are exact up to the truncation order, which is all
//! the loads need: `Δ²` and the bracket only read derivatives of order ≤ 4.

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 4;
const LEN: usize = 15;

/// Position of `c_ij` in the packed coefficient array (graded order).
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// (i, j) for every packed slot.
const PAIRS: [(usize, usize); LEN] = {
    let mut out = [(0, 0); LEN];
    let mut d = 0;
    let mut k = 0;
    while d <= ORDER {
        let mut j = 0;
        while j <= d {
            out[k] = (d - j, j);
            k += 1;
            j += 1;
        }
        d += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor4 {
    c: [f64; LEN],
}

impl Taylor4 {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Self { c }
    }

    /// The coordinate `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut t = Self::constant(x0);
        t.c[idx(1, 0)] = 1.0;
        t
    }

    /// The coordinate `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut t = Self::constant(y0);
        t.c[idx(0, 1)] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= ORDER);
        self.c[idx(i, j)]
    }

    /// `∂^{i+j} f / ∂xⁱ ∂yʲ` at the expansion point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coefficient(i, j) * FACT[i] * FACT[j]
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.partial(1, 0), self.partial(0, 1)]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        let xy = self.partial(1, 1);
        [[self.partial(2, 0), xy], [xy, self.partial(0, 2)]]
    }

    /// `f_xxxx + 2 f_xxyy + f_yyyy`
    pub fn bilaplacian(&self) -> f64 {
        self.partial(4, 0) + 2.0 * self.partial(2, 2) + self.partial(0, 4)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.map(|v| v * s) }
    }

    /// `Σ_k d[k]/k! · Nᵏ` with `N = self − self(x0)`, where `d[k]` is the
    /// k-th derivative of a univariate function at `self(x0)`.
    pub fn compose(&self, derivs: [f64; ORDER + 1]) -> Self {
        let mut n = *self;
        n.c[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        let mut power = Self::constant(1.0);
        for (k, d) in derivs.iter().enumerate().skip(1) {
            power = power * n;
            out = out + power.scale(d / FACT[k]);
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    /// `selfᵖ` for a positive base value.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let mut d = [0.0; ORDER + 1];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coef * a.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.compose(d)
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| acc * *self)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn atan(&self) -> Self {
        let a = self.value();
        let q = 1.0 + a * a;
        self.compose([
            a.atan(),
            1.0 / q,
            -2.0 * a / (q * q),
            (6.0 * a * a - 2.0) / (q * q * q),
            24.0 * a * (1.0 - a * a) / (q * q * q * q),
        ])
    }
}

impl Add for Taylor4 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..LEN {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Taylor4 {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..LEN {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Neg for Taylor4 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Taylor4 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; LEN];
        for (a, &(i1, j1)) in PAIRS.iter().enumerate() {
            let va = self.c[a];
            if va == 0.0 {
                continue;
            }
            let d1 = i1 + j1;
            for (b, &(i2, j2)) in PAIRS.iter().enumerate() {
                if d1 + i2 + j2 > ORDER {
                    break;
                }
                c[idx(i1 + i2, j1 + j2)] += va * rhs.c[b];
            }
        }
        Self { c }
    }
}

impl Add<f64> for Taylor4 {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl Sub<Taylor4> for f64 {
    type Output = Taylor4;
    fn sub(self, rhs: Taylor4) -> Taylor4 {
        -rhs + self
    }
}

impl Mul<f64> for Taylor4 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

/// `[a, b] = a_xx b_yy + a_yy b_xx − 2 a_xy b_xy` at the expansion point.
pub fn bracket(a: &Taylor4, b: &Taylor4) -> f64 {
    let ha = a.hessian();
    let hb = b.hessian();
    ha[0][0] * hb[1][1] + ha[1][1] * hb[0][0] - 2.0 * ha[0][1] * hb[0][1]
}

/// Expands `recipe(x, y)` at `point`.
pub fn taylor_eval<E>(
    recipe: impl Fn(Taylor4, Taylor4) -> Result<Taylor4, E>,
    point: [f64; 2],
) -> Result<Taylor4, E> {
    recipe(Taylor4::var_x(point[0]), Taylor4::var_y(point[1]))
}
