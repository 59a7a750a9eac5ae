//! Chebyshev series on an interval, the map H = |E|^ℓ, and helpers on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd::{Dd, Real};
use crate::decimal;
use crate::error::{Error, Result};

/// Default Bernstein-ellipse parameter for complex continuation.
pub const TRUST_RHO: f64 = 1.5;

/// Relative slack allowed beyond the endpoints in checked evaluation.
const DOMAIN_SLACK: f64 = 1e-12;

/// Chebyshev series on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMap {
    lo: f64,
    hi: f64,
    coeffs: Vec<Dd>,
}

/// Chebyshev-Lobatto nodes of `[lo, hi]` in increasing order, `degree + 1` of them.
pub fn chebyshev_nodes(lo: f64, hi: f64, degree: usize) -> Vec<f64> {
    if degree == 0 {
        return vec![0.5 * (lo + hi)];
    }
    let n = degree as f64;
    (0..=degree)
        .map(|j| {
            let t = -(std::f64::consts::PI * j as f64 / n).cos();
            let x = lo + 0.5 * (hi - lo) * (t + 1.0);
            // pin the endpoints exactly
            if j == 0 {
                lo
            } else if j == degree {
                hi
            } else {
                x
            }
        })
        .collect()
}

/// Chebyshev coefficients interpolating `values` at the nodes of [`chebyshev_nodes`].
pub fn interpolate<T: Real>(values: &[T]) -> Vec<T> {
    let m = values.len();
    if m == 1 {
        return vec![values[0]];
    }
    let n = m - 1;
    let nf = n as f64;
    // nodes are ordered by increasing t = -cos(pi j / n), so T_k(t_j) = (-1)^k cos(pi j k / n)
    (0..=n)
        .map(|k| {
            let mut acc = T::from_f64(0.0);
            for (j, &v) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                let jk = (j * k) % (2 * n);
                let mut c = (std::f64::consts::PI * jk as f64 / nf).cos();
                if k % 2 == 1 {
                    c = -c;
                }
                acc = acc + v * T::from_f64(w * c);
            }
            let scale = if k == 0 || k == n { 1.0 / nf } else { 2.0 / nf };
            acc * T::from_f64(scale)
        })
        .collect()
}

/// Clenshaw recurrence at `t` in the reference interval.
#[inline]
pub fn clenshaw<T: Real>(coeffs: &[T], t: T) -> T {
    let zero = T::from_f64(0.0);
    let two_t = t + t;
    let mut b1 = zero;
    let mut b2 = zero;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + two_t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => c0 + t * b1 - b2,
        None => zero,
    }
}

fn clenshaw_complex(coeffs: &[f64], t: Complex64) -> Complex64 {
    let two_t = t * 2.0;
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = two_t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => t * b1 - b2 + c0,
        None => Complex64::new(0.0, 0.0),
    }
}

/// Bernstein-ellipse parameter of a point `t` of the reference plane.
pub fn bernstein_rho(t: Complex64) -> f64 {
    let s = (t * t - 1.0).sqrt();
    (t + s).norm().max((t - s).norm())
}

impl SeriesMap {
    pub fn new(domain: (f64, f64), coeffs: Vec<Dd>) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Value(format!("bad domain [{lo}, {hi}]")));
        }
        if coeffs.is_empty() {
            return Err(Error::Value("empty coefficient list".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Value("non-finite coefficient".into()));
        }
        let coeffs = coeffs.into_iter().map(Dd::canonical).collect();
        Ok(SeriesMap { lo, hi, coeffs })
    }

    pub fn from_f64(domain: (f64, f64), coeffs: &[f64]) -> Result<Self> {
        SeriesMap::new(domain, coeffs.iter().map(|&c| Dd::from(c)).collect())
    }

    /// Interpolate `f` at the Chebyshev nodes of `domain`.
    pub fn from_fn(domain: (f64, f64), degree: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let xs = chebyshev_nodes(domain.0, domain.1, degree);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Value("non-finite sample".into()));
        }
        SeriesMap::from_f64(domain, &interpolate(&ys))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Dd] {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64()).collect()
    }

    #[inline]
    pub fn to_reference<T: Real>(&self, x: T) -> T {
        let s = 2.0 / (self.hi - self.lo);
        let o = (self.hi + self.lo) / (self.hi - self.lo);
        x * T::from_f64(s) - T::from_f64(o)
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = DOMAIN_SLACK * (self.hi - self.lo).max(1.0);
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// Evaluate with a domain check.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("{x} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluate anywhere on the real line (polynomial continuation).
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        let t = self.to_reference(x);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c.hi + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0].hi + t * b1 - b2
    }

    pub fn eval_dd(&self, x: Dd) -> Dd {
        clenshaw(&self.coeffs, self.to_reference(x))
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let s = 2.0 / (self.hi - self.lo);
        let o = (self.hi + self.lo) / (self.hi - self.lo);
        let c = self.coeffs_f64();
        clenshaw_complex(&c, z * s - o)
    }

    /// Bernstein parameter of `z` relative to this domain.
    pub fn rho(&self, z: Complex64) -> f64 {
        let s = 2.0 / (self.hi - self.lo);
        let o = (self.hi + self.lo) / (self.hi - self.lo);
        bernstein_rho(z * s - o)
    }

    pub fn in_trust_region(&self, z: Complex64, rho: f64) -> bool {
        self.rho(z) <= rho
    }

    /// Real interval covered by the trust ellipse.
    pub fn trust_interval(&self, rho: f64) -> (f64, f64) {
        let a = 0.5 * (rho + 1.0 / rho);
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        (mid - a * half, mid + a * half)
    }

    pub fn derivative(&self) -> SeriesMap {
        let n = self.coeffs.len();
        if n == 1 {
            return SeriesMap { lo: self.lo, hi: self.hi, coeffs: vec![Dd::ZERO] };
        }
        let mut d = vec![Dd::ZERO; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + self.coeffs[k] * (2.0 * k as f64);
        }
        d[0] = d[0] * 0.5;
        d.truncate(n - 1);
        let scale = 2.0 / (self.hi - self.lo);
        let coeffs = d.into_iter().map(|c| (c * scale).canonical()).collect();
        SeriesMap { lo: self.lo, hi: self.hi, coeffs }
    }

    /// Values at the `degree + 1` Chebyshev nodes of this domain.
    pub fn node_values(&self) -> Vec<(f64, f64)> {
        chebyshev_nodes(self.lo, self.hi, self.degree()).into_iter().map(|x| (x, self.eval_unchecked(x))).collect()
    }

    /// Re-interpolate at another degree.
    pub fn resample(&self, degree: usize) -> SeriesMap {
        let xs = chebyshev_nodes(self.lo, self.hi, degree);
        let ys: Vec<Dd> = xs.iter().map(|&x| self.eval_dd(Dd::from(x))).collect();
        SeriesMap::new((self.lo, self.hi), interpolate(&ys)).expect("finite resample")
    }
}

pub fn eval_series(s: &SeriesMap, x: f64) -> Result<f64> {
    s.eval(x)
}

/// Interpolating series through samples taken at the Chebyshev nodes of
/// `[min x, max x]`, in any order.
pub fn fit_series(samples: &[(f64, f64)], degree: usize) -> Result<SeriesMap> {
    if samples.len() != degree + 1 {
        return Err(Error::Arity { expected: degree + 1, got: samples.len() });
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Value("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = sorted[0].0;
    let hi = sorted[degree].0;
    if degree > 0 {
        if !(lo < hi) {
            return Err(Error::Value("samples span an empty interval".into()));
        }
        let nodes = chebyshev_nodes(lo, hi, degree);
        let tol = 1e-10 * (hi - lo);
        if nodes.iter().zip(&sorted).any(|(n, s)| (n - s.0).abs() > tol) {
            return Err(Error::Value("sample abscissae are not the Chebyshev nodes of their interval".into()));
        }
    }
    let ys: Vec<f64> = sorted.iter().map(|s| s.1).collect();
    let domain = if degree == 0 { (lo - 0.5, lo + 0.5) } else { (lo, hi) };
    SeriesMap::from_f64(domain, &interpolate(&ys))
}

/// S(s) = s'''/s' - 3/2 (s''/s')^2.
pub fn schwarzian(s: &SeriesMap, x: f64) -> Result<f64> {
    let (lo, hi) = s.domain();
    if !(x > lo && x < hi) {
        return Err(Error::Domain(format!("{x} not interior to [{lo}, {hi}]")));
    }
    let d1 = s.derivative();
    let d2 = d1.derivative();
    let d3 = d2.derivative();
    let a = d1.eval_unchecked(x);
    if a.abs() < 1e-14 {
        return Err(Error::Degenerate(format!("|s'({x})| = {:e}", a.abs())));
    }
    let b = d2.eval_unchecked(x) / a;
    Ok(d3.eval_unchecked(x) / a - 1.5 * b * b)
}

/// Solve `s(x) = y` for strictly monotone `s`.
pub fn invert_monotone(s: &SeriesMap, y: f64) -> Result<f64> {
    let (lo, hi) = s.domain();
    let grid = 256;
    let vals: Vec<f64> = (0..=grid).map(|i| s.eval_unchecked(lo + (hi - lo) * i as f64 / grid as f64)).collect();
    let increasing = vals[grid] > vals[0];
    if vals.windows(2).any(|w| if increasing { w[1] <= w[0] } else { w[1] >= w[0] }) {
        return Err(Error::Monotonicity("series is not strictly monotone on its domain".into()));
    }
    let scale = vals[0].abs().max(vals[grid].abs()).max(1.0);
    let (ymin, ymax) = if increasing { (vals[0], vals[grid]) } else { (vals[grid], vals[0]) };
    let slack = 1e-13 * scale;
    if y < ymin - slack || y > ymax + slack {
        return Err(Error::Range(format!("{y} outside [{ymin}, {ymax}]")));
    }
    let g = |x: f64| if increasing { s.eval_unchecked(x) - y } else { y - s.eval_unchecked(x) };
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-9 * (hi - lo) {
            break;
        }
    }
    let d = s.derivative();
    let mut x = 0.5 * (a + b);
    for _ in 0..8 {
        let r = s.eval_unchecked(x) - y;
        if r.abs() <= 1e-15 * scale {
            break;
        }
        let dx = r / d.eval_unchecked(x);
        let xn = (x - dx).clamp(lo, hi);
        if xn == x {
            break;
        }
        x = xn;
    }
    Ok(x)
}

/// Unimodal map H = |E|^ℓ with the zero x0 of E cached.
#[derive(Clone, Debug, PartialEq)]
pub struct UnimodalMap {
    pub e: SeriesMap,
    pub ell: f64,
    pub x0: f64,
}

impl UnimodalMap {
    pub fn new(e: SeriesMap, ell: f64) -> Result<Self> {
        if !(ell > 1.0 && ell.is_finite()) {
            return Err(Error::Validation(format!("criticality must exceed 1, got {ell}")));
        }
        let (lo, hi) = e.domain();
        if !(lo <= 0.0 && hi > 0.0) {
            return Err(Error::Domain("E must be defined at 0".into()));
        }
        let e0 = e.eval_unchecked(0.0);
        if (e0 - 1.0).abs() > 1e-12 {
            return Err(Error::Value(format!("E(0) = {e0}, expected 1")));
        }
        let x0 = invert_monotone(&e, 0.0)?;
        let m = UnimodalMap { e, ell, x0 };
        m.check_decreasing()?;
        Ok(m)
    }

    /// E has negative derivative at every node of a 1024-point grid.
    pub fn check_decreasing(&self) -> Result<()> {
        let d = self.e.derivative();
        let (lo, hi) = self.e.domain();
        for i in 0..=1024 {
            let x = lo + (hi - lo) * i as f64 / 1024.0;
            if d.eval_unchecked(x) >= 0.0 {
                return Err(Error::Monotonicity(format!("E'({x}) >= 0")));
            }
        }
        Ok(())
    }

    pub fn e_at(&self, x: f64) -> f64 {
        self.e.eval_unchecked(x)
    }

    pub fn h(&self, x: f64) -> f64 {
        self.e.eval_unchecked(x).abs().powf(self.ell)
    }

    /// ℓ log|E(x)|, finite except at x0.
    pub fn log_h(&self, x: f64) -> f64 {
        self.ell * self.e.eval_unchecked(x).abs().ln()
    }

    pub fn orbit(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut y = x;
        for _ in 0..n {
            out.push(y);
            y = self.h(y);
        }
        out
    }
}

/// (E²)^{ℓ/2} on the principal branch; `e` is a value of E.
pub fn h_from_e(e: Complex64, ell: f64) -> Result<Complex64> {
    if e.im == 0.0 {
        return Ok(Complex64::new(e.re.abs().powf(ell), 0.0));
    }
    let e2 = e * e;
    if e2.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if e2.re < 0.0 && e2.im.abs() <= 1e-15 * e2.norm() {
        return Err(Error::Branch(format!("E² = {e2} lies on the slit")));
    }
    Ok((e2.ln() * (0.5 * ell)).exp())
}

/// log H on the principal branch of log E².
pub fn log_h_from_e(e: Complex64, ell: f64) -> Result<Complex64> {
    let e2 = e * e;
    if e2.norm() == 0.0 {
        return Err(Error::Singularity("log H at a zero of E".into()));
    }
    if e2.re <= 0.0 && e2.im.abs() <= 1e-15 * e2.norm() {
        return Err(Error::Branch(format!("E² = {e2} lies on the slit")));
    }
    Ok(e2.ln() * (0.5 * ell))
}

/// H at a complex point inside the trust ellipse of E's domain.
pub fn eval_h(m: &UnimodalMap, z: Complex64) -> Result<Complex64> {
    if !m.e.in_trust_region(z, TRUST_RHO) {
        return Err(Error::Domain(format!("{z} outside the trust region")));
    }
    if z.im == 0.0 {
        return Ok(Complex64::new(m.h(z.re), 0.0));
    }
    h_from_e(m.e.eval_complex(z), m.ell)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SeriesJson {
    pub domain: [f64; 2],
    pub coeffs: Vec<String>,
}

impl SeriesMap {
    pub(crate) fn to_json_repr(&self) -> SeriesJson {
        SeriesJson { domain: [self.lo, self.hi], coeffs: self.coeffs.iter().map(|&c| decimal::format_dd(c)).collect() }
    }

    pub(crate) fn from_json_repr(r: &SeriesJson) -> Result<Self> {
        let coeffs = r.coeffs.iter().map(|s| decimal::parse_dd(s).map_err(Error::Value)).collect::<Result<Vec<_>>>()?;
        SeriesMap::new((r.domain[0], r.domain[1]), coeffs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_repr()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: SeriesJson = serde_json::from_str(s).map_err(|e| Error::Value(e.to_string()))?;
        SeriesMap::from_json_repr(&r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(f: impl Fn(f64) -> f64, degree: usize) -> SeriesMap {
        SeriesMap::from_fn((0.0, 1.0), degree, f).unwrap()
    }

    #[test]
    fn constant_series() {
        let s = SeriesMap::from_f64((0.0, 1.0), &[2.0]).unwrap();
        assert_eq!(eval_series(&s, 0.3).unwrap(), 2.0);
    }

    #[test]
    fn identity_series() {
        let s = unit(|x| x, 1);
        assert!((eval_series(&s, 0.25).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn second_basis_element_at_midpoint() {
        let s = SeriesMap::from_f64((0.0, 1.0), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(eval_series(&s, 0.5).unwrap(), -1.0);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let s = unit(|x| x, 1);
        assert!(matches!(s.eval(1.1), Err(Error::Domain(_))));
        assert!(s.eval(1.0 + 1e-13).is_ok());
    }

    #[test]
    fn fit_identity_and_square() {
        let samples: Vec<(f64, f64)> = chebyshev_nodes(0.0, 1.0, 3).into_iter().map(|x| (x, x)).collect();
        let s = fit_series(&samples, 3).unwrap();
        assert!((s.eval(0.7).unwrap() - 0.7).abs() < 1e-12);

        let samples: Vec<(f64, f64)> = chebyshev_nodes(0.0, 1.0, 2).into_iter().map(|x| (x, x * x)).collect();
        let s = fit_series(&samples, 2).unwrap();
        assert!((s.eval(0.3).unwrap() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn fit_constant() {
        let samples: Vec<(f64, f64)> = chebyshev_nodes(0.0, 1.0, 4).into_iter().map(|x| (x, 1.0)).collect();
        let s = fit_series(&samples, 4).unwrap();
        for c in &s.coeffs_f64()[1..] {
            assert!(c.abs() < 1e-15);
        }
        assert!((s.coeffs_f64()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_arity_and_values() {
        let samples: Vec<(f64, f64)> = chebyshev_nodes(0.0, 1.0, 3).into_iter().map(|x| (x, x)).collect();
        assert!(matches!(fit_series(&samples, 4), Err(Error::Arity { expected: 5, got: 4 })));
        let mut bad = samples.clone();
        bad[1].1 = f64::NAN;
        assert!(matches!(fit_series(&bad, 3), Err(Error::Value(_))));
    }

    #[test]
    fn endpoints_reproduce_samples() {
        let f = |x: f64| (3.0 * x).sin() + 2.0;
        let s = unit(f, 20);
        assert!(((s.eval(0.0).unwrap() - f(0.0)) / f(0.0)).abs() < 1e-12);
        assert!(((s.eval(1.0).unwrap() - f(1.0)) / f(1.0)).abs() < 1e-12);
    }

    #[test]
    fn schwarzian_examples() {
        let affine = unit(|x| 3.0 - 2.0 * x, 1);
        assert!(schwarzian(&affine, 0.4).unwrap().abs() < 1e-14);

        let sq = SeriesMap::from_fn((1.0, 2.0), 2, |x| x * x).unwrap();
        let expected = -1.5 / (1.5 * 1.5);
        assert!((schwarzian(&sq, 1.5).unwrap() - expected).abs() < 1e-12);

        let mob = unit(|x| 1.0 / (x + 1.0), 40);
        assert!(schwarzian(&mob, 0.5).unwrap().abs() < 1e-8);

        let flat = unit(|_| 1.0, 3);
        assert!(matches!(schwarzian(&flat, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn invert_examples() {
        let id = unit(|x| x, 1);
        assert!((invert_monotone(&id, 0.42).unwrap() - 0.42).abs() < 1e-14);
        let lin = unit(|x| 1.0 - 2.0 * x, 1);
        assert!((invert_monotone(&lin, 0.0).unwrap() - 0.5).abs() < 1e-14);

        // independent bisection on 1 - x^3 = 0.5
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if 1.0 - m * m * m > 0.5 {
                a = m
            } else {
                b = m
            }
        }
        let cube = unit(|x| 1.0 - x * x * x, 3);
        assert!((invert_monotone(&cube, 0.5).unwrap() - a).abs() < 1e-13);

        assert!(matches!(invert_monotone(&lin, 3.0), Err(Error::Range(_))));
        let bump = unit(|x| (x - 0.5) * (x - 0.5), 2);
        assert!(matches!(invert_monotone(&bump, 0.1), Err(Error::Monotonicity(_))));
    }

    #[test]
    fn eval_h_examples() {
        let e = unit(|x| 1.0 - 2.0 * x, 1);
        let m = UnimodalMap::new(e, 3.0).unwrap();
        assert_eq!(eval_h(&m, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        assert!((eval_h(&m, Complex64::new(1.0, 0.0)).unwrap().re - 1.0).abs() < 1e-14);
        assert!(eval_h(&m, Complex64::new(m.x0, 0.0)).unwrap().norm() < 1e-40);
        assert!(matches!(eval_h(&m, Complex64::new(5.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_h_branch_error_on_slit() {
        // E(z) = 1 - 2z is purely imaginary at z = 0.5 + 0.1i
        let e = unit(|x| 1.0 - 2.0 * x, 1);
        let m = UnimodalMap::new(e, 2.5).unwrap();
        assert!(matches!(eval_h(&m, Complex64::new(0.5, 0.1)), Err(Error::Branch(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = unit(|x| (1.0 + x).ln(), 12);
        let back = SeriesMap::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn derivative_of_cubic() {
        let s = unit(|x| x * x * x, 3);
        let d = s.derivative();
        assert!((d.eval(0.4).unwrap() - 0.48).abs() < 1e-13);
    }
}
