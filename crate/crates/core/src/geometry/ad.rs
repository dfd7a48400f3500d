//! Forward-mode automatic differentiation.
//!
//! [`Jet`] carries a value together with its gradient and Hessian with respect
//! to the three ambient coordinates. Because `Jet<T>` is generic over its
//! component type, nesting (`Jet<Jet<f64>>`) yields derivatives up to fourth
//! order, which is what the Laplace–Beltrami operator applied twice needs.
//! [`Dual`] is a single-direction first-order number used for time derivatives.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic shared by `f64` and the AD number types.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// The underlying real value (innermost component).
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }
}

/// Value and one directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Scalar> Dual<T> {
    pub fn variable(v: T) -> Self {
        Dual { v, d: T::cst(1.0) }
    }

    pub fn constant(v: T) -> Self {
        Dual { v, d: T::zero() }
    }

    fn chain(self, f: T, df: T) -> Self {
        Dual { v: f, d: df * self.d }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl<T: Scalar> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Dual {
            v: self.v + c,
            d: self.d,
        }
    }
}

impl<T: Scalar> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        Dual {
            v: self.v - c,
            d: self.d,
        }
    }
}

impl<T: Scalar> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Dual {
            v: self.v * c,
            d: self.d * c,
        }
    }
}

impl<T: Scalar> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        Dual {
            v: self.v / c,
            d: self.d / c,
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, (s * 2.0).recip())
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn recip(self) -> Self {
        let r = self.v.recip();
        self.chain(r, -(r * r))
    }
}

/// Value, gradient and Hessian with respect to three variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub g: [T; 3],
    pub h: [[T; 3]; 3],
}

impl<T: Scalar> Jet<T> {
    pub fn constant(v: T) -> Self {
        let z = T::zero();
        Jet {
            v,
            g: [z; 3],
            h: [[z; 3]; 3],
        }
    }

    /// The `i`-th coordinate variable evaluated at `v`.
    pub fn variable(v: T, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = T::cst(1.0);
        j
    }

    /// Seeds a point so that evaluating a function on it yields value,
    /// gradient and Hessian at `x`.
    pub fn seed(x: [T; 3]) -> [Self; 3] {
        [
            Self::variable(x[0], 0),
            Self::variable(x[1], 1),
            Self::variable(x[2], 2),
        ]
    }

    pub fn laplacian(&self) -> T {
        self.h[0][0] + self.h[1][1] + self.h[2][2]
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f: T, df: T, ddf: T) -> Self {
        let mut out = Self::constant(f);
        for i in 0..3 {
            out.g[i] = df * self.g[i];
        }
        for i in 0..3 {
            for j in 0..3 {
                out.h[i][j] = df * self.h[i][j] + ddf * self.g[i] * self.g[j];
            }
        }
        out
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        let mut out = Self::constant(f(self.v));
        for i in 0..3 {
            out.g[i] = f(self.g[i]);
            for j in 0..3 {
                out.h[i][j] = f(self.h[i][j]);
            }
        }
        out
    }

    fn zip(self, o: Self, f: impl Fn(T, T) -> T) -> Self {
        let mut out = Self::constant(f(self.v, o.v));
        for i in 0..3 {
            out.g[i] = f(self.g[i], o.g[i]);
            for j in 0..3 {
                out.h[i][j] = f(self.h[i][j], o.h[i][j]);
            }
        }
        out
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for i in 0..3 {
            for j in i..3 {
                let hij = self.h[i][j] * o.v
                    + self.v * o.h[i][j]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
                out.h[i][j] = hij;
                out.h[j][i] = hij;
            }
        }
        out
    }
}

impl<T: Scalar> Div for Jet<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

impl<T: Scalar> Add<f64> for Jet<T> {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.v = self.v + c;
        self
    }
}

impl<T: Scalar> Sub<f64> for Jet<T> {
    type Output = Self;
    fn sub(mut self, c: f64) -> Self {
        self.v = self.v - c;
        self
    }
}

impl<T: Scalar> Mul<f64> for Jet<T> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.map(|a| a * c)
    }
}

impl<T: Scalar> Div<f64> for Jet<T> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.map(|a| a / c)
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn cst(v: f64) -> Self {
        Jet::constant(T::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let ds = (s * 2.0).recip();
        // d2/dx2 sqrt(x) = -1 / (4 x^{3/2})
        let dds = -(ds / (self.v * 2.0));
        self.chain(s, ds, dds)
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn recip(self) -> Self {
        let r = self.v.recip();
        let r2 = r * r;
        self.chain(r, -r2, r2 * r * 2.0)
    }
}
