//! Double-double arithmetic and the `Real` trait the solver is generic over.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, about 106 significant bits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn from_sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Dd::ZERO } else { Dd::new(f64::NAN, 0.0) };
        }
        let y = self.hi.sqrt();
        let yy = Dd::from(y);
        yy + (self - yy.sqr()) / (2.0 * y)
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.78 {
            return Dd::new(f64::INFINITY, 0.0);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * k;
        // r in [-ln2/2, ln2/2]; scale down by 2^10 and sum the Taylor series
        let s = r * (1.0 / 1024.0);
        let mut term = s;
        let mut sum = s;
        for i in 2..=12 {
            term = term * s / (i as f64);
            sum += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        // (1 + sum)^(2^10) - 1, kept in expm1 form to avoid cancellation
        for _ in 0..10 {
            sum = sum * (sum + 2.0);
        }
        let e = sum + 1.0;
        let scale = 2f64.powi(k as i32);
        Dd::new(e.hi * scale, e.lo * scale)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(if self.hi == 0.0 { f64::NEG_INFINITY } else { f64::NAN }, 0.0);
        }
        if self.hi.is_infinite() {
            return self;
        }
        let y = Dd::from(self.hi.ln());
        // one Newton step on exp(y) = x doubles the number of correct bits
        y + self * (-y).exp() - 1.0
    }

    pub fn powf(self, e: Dd) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        (e * self.ln()).exp()
    }

    /// Quantize `lo` to 2^-106 relative to the binade of `hi`.
    pub fn canonical(self) -> Self {
        if self.hi == 0.0 || !self.hi.is_finite() {
            return Dd::new(self.hi, 0.0);
        }
        let Some(e) = quantum_exp(self.hi) else {
            return Dd::new(self.hi, 0.0);
        };
        let q = 2f64.powi(e);
        let lo = (self.lo / q).round_ties_even() * q;
        let (hi, lo) = quick_two_sum(self.hi, lo);
        Dd::new(hi, lo)
    }
}

/// log2 of the canonical low-word spacing for a given high word, or None
/// when the grid would fall below the normal range.
pub(crate) fn quantum_exp(hi: f64) -> Option<i32> {
    let biased = ((hi.to_bits() >> 52) & 0x7ff) as i32;
    // normal hi = m * 2^(biased - 1075) with a 53-bit integer m
    let q = biased - 1075 - 53;
    (biased != 0 && q >= -1022).then_some(q)
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl From<Dd> for f64 {
    fn from(x: Dd) -> f64 {
        x.to_f64()
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd::new(-self.hi, -self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, b: f64) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from(b)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::decimal::format_dd(*self))
    }
}

/// Scalar type the collocation residual and series evaluation are generic over.
pub trait Real:
    Copy
    + Send
    + Sync
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn from_dd(x: Dd) -> Self;
    fn to_f64(self) -> f64;
    fn to_dd(self) -> Dd;
    fn abs(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_dd(x: Dd) -> Self {
        x.to_f64()
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn to_dd(self) -> Dd {
        Dd::from(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        Dd::from(x)
    }
    fn from_dd(x: Dd) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    fn to_dd(self) -> Dd {
        self
    }
    fn abs(self) -> Self {
        Dd::abs(self)
    }
    fn exp(self) -> Self {
        Dd::exp(self)
    }
    fn ln(self) -> Self {
        Dd::ln(self)
    }
    fn is_finite(self) -> bool {
        Dd::is_finite(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b) / b).abs().to_f64()
    }

    #[test]
    fn third_times_three() {
        let t = Dd::ONE / Dd::from(3.0);
        let e = t * 3.0 - 1.0;
        assert!(e.abs().to_f64() < 1e-31);
    }

    #[test]
    fn sqrt_two_squared() {
        let s = Dd::from(2.0).sqrt();
        assert!(rel(s * s, Dd::from(2.0)) < 1e-31);
    }

    #[test]
    fn exp_ln_inverse() {
        for &x in &[1e-8, 0.3, 1.0, 2.5, 17.0, 1e5] {
            let d = Dd::from(x) + 1e-20;
            let back = d.ln().exp();
            assert!(rel(back, d) < 4e-31, "x={x}");
        }
    }

    #[test]
    fn exp_one_matches_reference() {
        // e = 2.718281828459045235360287471352662497757...
        let e = Dd::ONE.exp();
        let reference = Dd::new(std::f64::consts::E, 1.4456468917292502e-16);
        assert!(rel(e, reference) < 1e-31);
    }

    #[test]
    fn canonical_is_idempotent() {
        let x = Dd::from(1.0) / Dd::from(7.0);
        let c = x.canonical();
        assert_eq!(c, c.canonical());
        assert!(rel(c, x) < 1e-31);
    }
}
