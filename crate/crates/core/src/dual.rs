//! Nested forward-mode dual numbers.
//!
//! `Dual<S>` carries one infinitesimal direction on top of an arbitrary
//! [`Scalar`]; nesting `Dual<Dual<f64>>` gives mixed second derivatives and
//! so on. Each nesting level is seeded independently, so the coefficient of
//! `ε_a ε_b` is the mixed partial along the seeds of levels `a` and `b`.

use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arithmetic required by every metric, wind and map evaluation.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Number of nested infinitesimal levels.
    const DEPTH: usize;

    fn cst(c: f64) -> Self;
    /// The plain real part, all infinitesimals dropped.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// `self^p` for a real exponent.
    fn powf(self, p: f64) -> Self;

    /// Coefficient of the product of the infinitesimals whose levels are set
    /// in `mask` (bit `l` is level `l`, level 0 innermost).
    fn coeff(&self, mask: u32) -> f64;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let mut acc = self;
        for _ in 1..n.unsigned_abs() {
            acc *= self;
        }
        if n < 0 {
            Self::one() / acc
        } else {
            acc
        }
    }

    /// `x^y` with both arguments active. Integral constant exponents fall
    /// back to repeated multiplication so negative bases stay finite.
    fn pow(self, y: Self) -> Self {
        let yr = y.re();
        if y.coeff_is_constant() && libm::round(yr) == yr && libm::fabs(yr) <= 64.0 {
            return self.powi(yr as i32);
        }
        if y.coeff_is_constant() {
            return self.powf(yr);
        }
        (y * self.ln()).exp()
    }

    /// True when every infinitesimal coefficient vanishes.
    fn coeff_is_constant(&self) -> bool {
        (1..(1u32 << Self::DEPTH)).all(|m| self.coeff(m) == 0.0)
    }
}

impl Scalar for f64 {
    const DEPTH: usize = 0;

    fn cst(c: f64) -> Self {
        c
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    fn sin(self) -> Self {
        libm::sin(self)
    }
    fn cos(self) -> Self {
        libm::cos(self)
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    fn powf(self, p: f64) -> Self {
        libm::pow(self, p)
    }
    fn coeff(&self, mask: u32) -> f64 {
        if mask == 0 {
            *self
        } else {
            0.0
        }
    }
    fn powi(self, n: i32) -> Self {
        libm::pow(self, n as f64)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Dual { re, eps }
    }

    /// A quantity `re + seed·ε` varying linearly along this level.
    pub fn var(re: S, seed: S) -> Self {
        Dual { re, eps: seed }
    }

    pub fn constant(re: S) -> Self {
        Dual { re, eps: S::zero() }
    }

    fn chain(self, f: S, df: S) -> Self {
        Dual { re: f, eps: df * self.eps }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, eps: self.eps + o.eps }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, eps: self.eps - o.eps }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, eps: self.re * o.eps + self.eps * o.re }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual { re: q, eps: (self.eps - q * o.eps) / o.re }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: -self.eps }
    }
}

impl<S: Scalar> AddAssign for Dual<S> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> SubAssign for Dual<S> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<S: Scalar> MulAssign for Dual<S> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    const DEPTH: usize = S::DEPTH + 1;

    fn cst(c: f64) -> Self {
        Dual::constant(S::cst(c))
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual { re: r, eps: self.eps / (r + r) }
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), S::one() / self.re)
    }
    fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Self::one();
        }
        let lower = self.re.powf(p - 1.0);
        Dual { re: lower * self.re, eps: lower.scale(p) * self.eps }
    }
    fn coeff(&self, mask: u32) -> f64 {
        let top = 1u32 << S::DEPTH;
        if mask & top != 0 {
            self.eps.coeff(mask & !top)
        } else {
            self.re.coeff(mask)
        }
    }
}

pub type D1 = Dual<f64>;
pub type D2 = Dual<D1>;
pub type D3 = Dual<D2>;
pub type D4 = Dual<D3>;

/// Lifts an `S` value into `Dual<S>` moving along `seed`.
pub fn lift<S: Scalar>(base: &[S], seed: &[S]) -> alloc::vec::Vec<Dual<S>> {
    base.iter().zip(seed).map(|(&b, &s)| Dual::var(b, s)).collect()
}

/// Lifts without any motion along the new level.
pub fn lift_const<S: Scalar>(base: &[S]) -> alloc::vec::Vec<Dual<S>> {
    base.iter().map(|&b| Dual::constant(b)).collect()
}

/// Lifts a plain vector into an arbitrary scalar type.
pub fn constants<S: Scalar>(v: &[f64]) -> alloc::vec::Vec<S> {
    v.iter().map(|&c| S::cst(c)).collect()
}

/// Derivative of a scalar function of one variable.
pub fn derivative(f: impl Fn(D1) -> D1, t: f64) -> f64 {
    f(Dual::var(t, 1.0)).eps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol * (1.0 + libm::fabs(b))
    }

    #[test]
    fn first_derivative_of_composite() {
        let d = derivative(|x| (x * x).sin() + x.sqrt(), 1.3);
        let expect = 2.0 * 1.3 * libm::cos(1.69) + 0.5 / libm::sqrt(1.3);
        assert!(close(d, expect, 1e-14));
    }

    #[test]
    fn nested_levels_give_mixed_partials() {
        // f(x, y) = x^2 y^3, ∂x∂y f = 6 x y^2, ∂x∂x f = 2 y^3
        let x0 = 0.7;
        let y0 = -1.2;
        let x = D2::new(D1::new(x0, 1.0), D1::new(0.0, 0.0));
        let y = D2::new(D1::new(y0, 0.0), D1::new(1.0, 0.0));
        let f = x * x * y * y * y;
        assert!(close(f.coeff(0b11), 6.0 * x0 * y0 * y0, 1e-14));
        assert!(close(f.coeff(0b01), 2.0 * x0 * y0 * y0 * y0, 1e-14));
        assert!(close(f.coeff(0b10), 3.0 * x0 * x0 * y0 * y0, 1e-14));

        let xx = D2::new(D1::new(x0, 1.0), D1::new(1.0, 0.0));
        let g = xx * xx * Scalar::cst(y0 * y0 * y0);
        assert!(close(g.coeff(0b11), 2.0 * y0 * y0 * y0, 1e-14));
    }

    #[test]
    fn third_order_through_sqrt() {
        // d^3/dx^3 sqrt(x) = 3/8 x^{-5/2}
        let x0 = 2.5;
        let x = D3::new(
            D2::new(D1::new(x0, 1.0), D1::new(1.0, 0.0)),
            D2::new(D1::new(1.0, 0.0), D1::new(0.0, 0.0)),
        );
        let f = x.sqrt();
        assert!(close(f.coeff(0b111), 0.375 * libm::pow(x0, -2.5), 1e-13));
    }

    #[test]
    fn pow_with_integral_exponent_keeps_negative_base() {
        let x = D1::new(-2.0, 1.0);
        let p = x.pow(D1::cst(3.0));
        assert_eq!(p.re, -8.0);
        assert_eq!(p.eps, 12.0);
        let q = D1::new(2.0, 1.0).pow(D1::cst(0.5));
        assert!(close(q.eps, 0.5 / libm::sqrt(2.0), 1e-15));
    }
}
