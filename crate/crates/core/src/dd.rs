//! Software double-double arithmetic (~31 significant digits).
//!
//! A value is stored as an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
//! Only the operations needed by the disc and circle iterations are provided.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let e = (a - (s - v)) + (b - v);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };
    /// 2π to double-double accuracy.
    pub const TWO_PI: Self = Self {
        hi: 6.283_185_307_179_586,
        lo: 2.449_293_598_294_706_4e-16,
    };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        // One Newton step on the f64 root doubles the precision.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = (self - Self { hi: p, lo: e }).to_f64();
        Self::new(x, r / (2.0 * x))
    }

    /// Reduces into `[0, 2π)` using the double-double value of 2π.
    pub fn rem_two_pi(self) -> Self {
        let k = (self.to_f64() / Self::TWO_PI.hi).floor();
        let mut r = self - Self::TWO_PI * Self::from_f64(k);
        if r.hi < 0.0 {
            r = r + Self::TWO_PI;
        }
        if r.hi >= Self::TWO_PI.hi {
            r = r - Self::TWO_PI;
        }
        r
    }
}

impl DoubleDouble {
    /// π/2 to double-double accuracy.
    pub const FRAC_PI_2: Self = Self {
        hi: 1.570_796_326_794_896_6,
        lo: 6.123_233_995_736_766e-17,
    };

    /// Sine and cosine, reduced to `|x| <= π/4` and summed as Taylor series.
    pub fn sin_cos(self) -> (Self, Self) {
        let k = (self.to_f64() / Self::FRAC_PI_2.hi).round();
        let x = self - Self::FRAC_PI_2 * Self::from_f64(k);
        let x2 = x * x;
        // sin: x - x³/3! + ...; cos: 1 - x²/2! + ...
        let mut s_term = x;
        let mut s = x;
        let mut c_term = Self::ONE;
        let mut c = Self::ONE;
        for n in 1..=14 {
            let nf = n as f64;
            s_term = -(s_term * x2) / Self::from_f64((2.0 * nf) * (2.0 * nf + 1.0));
            c_term = -(c_term * x2) / Self::from_f64((2.0 * nf - 1.0) * (2.0 * nf));
            s = s + s_term;
            c = c + c_term;
        }
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Self::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Self::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from_f64(q3)
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexDD {
    pub re: DoubleDouble,
    pub im: DoubleDouble,
}

impl ComplexDD {
    pub const ZERO: Self = Self { re: DoubleDouble::ZERO, im: DoubleDouble::ZERO };
    pub const ONE: Self = Self { re: DoubleDouble::ONE, im: DoubleDouble::ZERO };

    #[inline]
    pub fn new(re: DoubleDouble, im: DoubleDouble) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn from_c64(z: Complex64) -> Self {
        Self { re: z.re.into(), im: z.im.into() }
    }

    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn norm_sqr(self) -> DoubleDouble {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> DoubleDouble {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// `e^{iθ}` for a double-double angle.
    pub fn cis(theta: DoubleDouble) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    /// Projects onto the unit circle.
    pub fn normalize(self) -> Self {
        let n = self.norm();
        Self { re: self.re / n, im: self.im / n }
    }

    /// Principal argument: the f64 `atan2` corrected by the residual angle
    /// after rotating back in double-double.
    pub fn arg(self) -> DoubleDouble {
        let t = self.im.to_f64().atan2(self.re.to_f64());
        let rot = Self::cis(-DoubleDouble::from_f64(t));
        let w = self * rot;
        let x = (w.im / w.re).to_f64();
        // atan(x) = x - x³/3 + ..., |x| ~ 1e-16
        DoubleDouble::from_f64(t) + DoubleDouble::from_f64(x - x * x * x / 3.0)
    }
}

impl Add for ComplexDD {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for ComplexDD {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl Neg for ComplexDD {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { re: -self.re, im: -self.im }
    }
}

impl Mul for ComplexDD {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl Div for ComplexDD {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let den = rhs.norm_sqr();
        let num = self * rhs.conj();
        Self { re: num.re / den, im: num.im / den }
    }
}
