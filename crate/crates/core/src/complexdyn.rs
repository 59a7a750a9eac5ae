//! Dynamics of the flat-exponential family f(z) = exp(-c (z-a)^-2).
//!
//! Points are on the Riemann sphere: an infinite component stands for ∞,
//! where f is analytic with f(∞) = 1.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_A: f64 = 0.3;
pub const DEFAULT_C: f64 = 0.03;
pub const DEFAULT_BUDGET: u32 = 2000;
/// Landing this close to a (or a stored preimage of a) counts as a hit.
pub const HIT_TOL: f64 = 1e-14;

const EXP_OVERFLOW: f64 = 709.0;
const EXP_UNDERFLOW: f64 = -746.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatExpMap {
    pub a: f64,
    pub c: f64,
}

impl Default for FlatExpMap {
    fn default() -> Self {
        FlatExpMap { a: DEFAULT_A, c: DEFAULT_C }
    }
}

fn infinity() -> Complex64 {
    Complex64::new(f64::INFINITY, 0.0)
}

pub fn is_infinite(z: Complex64) -> bool {
    z.re.is_infinite() || z.im.is_infinite()
}

impl FlatExpMap {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) || !(c.is_finite() && c > 0.0) {
            return Err(Error::Validation(format!("flat-exp parameters need a > 0 and c > 0, got a={a}, c={c}")));
        }
        Ok(FlatExpMap { a, c })
    }

    /// f(z). With `real_extension`, f(a) = 0 is allowed for real z = a.
    pub fn eval(&self, z: Complex64, real_extension: bool) -> Result<Complex64> {
        if z.re.is_nan() || z.im.is_nan() {
            return Err(Error::Numeric("NaN iterate".into()));
        }
        if is_infinite(z) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let d = z - self.a;
        if d.re == 0.0 && d.im == 0.0 {
            return if real_extension && z.im == 0.0 {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Err(Error::Singularity(format!("f is singular at a = {}", self.a)))
            };
        }
        let nd = d.norm();
        let e = if nd > 1e-150 && nd < 1e150 {
            -self.c / (d * d)
        } else {
            // polar form keeps the direction when d² under/overflows
            let mag = (self.c.ln() - 2.0 * nd.ln()).exp();
            let th = PI - 2.0 * d.arg();
            if mag.is_infinite() {
                let cs = th.cos();
                return if cs > 0.0 {
                    Ok(infinity())
                } else if cs < 0.0 {
                    Ok(Complex64::new(0.0, 0.0))
                } else {
                    Err(Error::Numeric(format!("f oscillates unboundedly near a at {z}")))
                };
            }
            Complex64::from_polar(mag, th)
        };
        if e.re > EXP_OVERFLOW {
            return Ok(infinity());
        }
        if e.re < EXP_UNDERFLOW {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let w = e.exp();
        if w.re.is_nan() || w.im.is_nan() {
            return Err(Error::Numeric(format!("f({z}) is not a number")));
        }
        Ok(w)
    }

    /// f'(z) = f(z) 2c (z-a)^-3.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let d = z - self.a;
        let f = self.eval(z, true)?;
        if f == Complex64::new(0.0, 0.0) {
            return Ok(f);
        }
        Ok(f * 2.0 * self.c / (d * d * d))
    }

    fn eval_real(&self, x: f64) -> f64 {
        let d = x - self.a;
        if d == 0.0 {
            0.0
        } else {
            (-self.c / (d * d)).exp()
        }
    }
}

pub fn flat_exp_eval(m: &FlatExpMap, z: Complex64, real_extension: bool) -> Result<Complex64> {
    m.eval(z, real_extension)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub b_f: f64,
    pub z0: f64,
    pub mult_b: f64,
    pub mult_z0: f64,
}

fn brent_bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The repelling fixed point b_f and the attracting z0 with b_f < z0 < 1.
pub fn find_fixed_points(m: &FlatExpMap) -> Result<FixedPoints> {
    if m.a >= 1.0 {
        return Err(Error::Structure(format!("a = {} leaves no room for fixed points in (a, 1]", m.a)));
    }
    let g = |x: f64| m.eval_real(x) - x;
    let n = 200_000;
    let lo = m.a + 1e-6 * (1.0 - m.a);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (1.0 - lo) * i as f64 / n as f64).collect();
    let mut roots = Vec::new();
    let mut prev = g(xs[0]);
    for w in xs.windows(2) {
        let cur = g(w[1]);
        if cur == 0.0 {
            roots.push(w[1]);
        } else if (prev > 0.0) != (cur > 0.0) && prev != 0.0 {
            roots.push(brent_bisect(g, w[0], w[1]));
        }
        prev = cur;
    }
    if roots.len() < 2 {
        return Err(Error::Structure(format!(
            "f(x) - x has {} sign change(s) on (a, 1]; need a repelling and an attracting fixed point",
            roots.len()
        )));
    }
    let mult = |x: f64| m.derivative(Complex64::new(x, 0.0)).map(|d| d.norm());
    let (b_f, z0) = (roots[0], *roots.last().expect("two roots"));
    let fp = FixedPoints { b_f, z0, mult_b: mult(b_f)?, mult_z0: mult(z0)? };
    if !(fp.b_f < fp.z0 && fp.z0 < 1.0 && fp.mult_b > 1.0 && fp.mult_z0 < 1.0) {
        return Err(Error::Structure(format!("fixed points do not have the required shape: {fp:?}")));
    }
    Ok(fp)
}

/// Largest r ≤ 0.2|1 - z0| (shrinking by 0.8) with sampled sup|f'| ≤ 0.9 on
/// 64 boundary points of D(z0, r).
pub fn contraction_radius(m: &FlatExpMap, z0: f64) -> Result<f64> {
    let mut r = 0.2 * (1.0 - z0).abs();
    while r > 1e-10 {
        let ok = (0..64).all(|k| {
            let z = Complex64::new(z0, 0.0) + Complex64::from_polar(r, 2.0 * PI * k as f64 / 64.0);
            m.derivative(z).map(|d| d.norm() <= 0.9).unwrap_or(false)
        });
        if ok {
            return Ok(r);
        }
        r *= 0.8;
    }
    Err(Error::Structure(format!("no contraction disk around z0 = {z0}")))
}

/// Both preimages a ± sqrt(-c / (Log v + 2πik)) for every k.
pub fn preimages_of_point(m: &FlatExpMap, v: Complex64, ks: &[i64]) -> Result<Vec<Complex64>> {
    if v.norm() == 0.0 || is_infinite(v) {
        return Err(Error::Domain(format!("{v} is an omitted value of f")));
    }
    let lv = v.ln();
    let mut out = Vec::with_capacity(2 * ks.len());
    for &k in ks {
        let l = lv + Complex64::new(0.0, 2.0 * PI * k as f64);
        if l.norm() == 0.0 {
            return Err(Error::Degenerate(format!("Log v + 2πik vanishes for k = {k}")));
        }
        let s = (-m.c / l).sqrt();
        out.push(m.a + s);
        out.push(m.a - s);
    }
    Ok(out)
}

fn branch_range(k_max: i64) -> Vec<i64> {
    (-k_max..=k_max).collect()
}

/// Levels 0..=depth of the preimage tree of a over branches |k| ≤ k_max.
pub fn preimage_tree(m: &FlatExpMap, depth: usize, k_max: i64) -> Result<Vec<Vec<Complex64>>> {
    let ks = branch_range(k_max);
    let mut levels = vec![vec![Complex64::new(m.a, 0.0)]];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in levels.last().expect("level 0") {
            next.extend(preimages_of_point(m, v, &ks)?);
        }
        levels.push(next);
    }
    Ok(levels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    Fatou(u32),
    Julia,
    Unknown,
}

impl Tag {
    pub fn gray(self) -> u8 {
        match self {
            Tag::Julia => 0,
            Tag::Unknown => 128,
            Tag::Fatou(s) => 255 - s.min(254) as u8,
        }
    }
}

/// Precomputed data for point classification.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub map: FlatExpMap,
    pub fixed: FixedPoints,
    pub radius: f64,
    /// a and its preimages up to the configured depth.
    pub targets: Vec<Complex64>,
}

impl Classifier {
    pub fn new(m: FlatExpMap, preimage_depth: usize, k_max: i64) -> Result<Self> {
        let fixed = find_fixed_points(&m)?;
        let radius = contraction_radius(&m, fixed.z0)?;
        let targets = preimage_tree(&m, preimage_depth, k_max)?.concat();
        Ok(Classifier { map: m, fixed, radius, targets })
    }

    pub fn classify(&self, z: Complex64, budget: u32) -> Result<Tag> {
        let z0 = Complex64::new(self.fixed.z0, 0.0);
        let mut z = z;
        for s in 0..=budget {
            if !is_infinite(z) {
                if (z - z0).norm() < self.radius {
                    return Ok(Tag::Fatou(s));
                }
                if self.targets.iter().any(|&t| (z - t).norm() <= HIT_TOL) {
                    return Ok(Tag::Julia);
                }
            }
            if s == budget {
                break;
            }
            z = self.map.eval(z, false)?;
        }
        Ok(Tag::Unknown)
    }

    /// The orbits of the singular values 0 and ∞ (via f(∞) = 1) reach the
    /// contraction disk, so no other attracting cycle exists.
    pub fn singular_orbits_attracted(&self, budget: u32) -> Result<bool> {
        for v in [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] {
            if !matches!(self.classify(v, budget)?, Tag::Fatou(_)) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn classify_point(c: &Classifier, z: Complex64, budget: u32) -> Result<Tag> {
    c.classify(z, budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Viewport {
    pub fn default_for(m: &FlatExpMap) -> Self {
        Viewport { re_min: m.a - 1.0, re_max: 1.5, im_min: -1.0, im_max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite())
            && self.re_max > self.re_min
            && self.im_max > self.im_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("empty or invalid viewport {self:?}")))
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Pixel center of column i, row j (row 0 at the top). Rows are placed
    /// symmetrically about the center so that a conjugation-symmetric
    /// viewport gives exactly negated imaginary parts.
    pub fn pixel(&self, i: usize, j: usize, width: usize, height: usize) -> Complex64 {
        let dx = (self.re_max - self.re_min) / width as f64;
        let dy = (self.im_max - self.im_min) / height as f64;
        let ic = 0.5 * (self.im_max + self.im_min);
        let re = self.re_min + (i as f64 + 0.5) * dx;
        let im = ic + (0.5 * height as f64 - j as f64 - 0.5) * dy;
        Complex64::new(re, im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuliaRaster {
    pub viewport: Viewport,
    pub width: usize,
    pub height: usize,
    pub budget: u32,
    /// Row-major, row 0 at the top.
    pub cells: Vec<Tag>,
    /// Pixels whose orbit hit a numeric failure; they are tagged Unknown.
    pub numeric_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuliaStats {
    pub a: f64,
    pub c: f64,
    pub width: usize,
    pub height: usize,
    pub budget: u32,
    pub fatou: usize,
    pub julia: usize,
    pub unknown: usize,
    pub unknown_fraction: f64,
    pub max_steps: u32,
    pub numeric_failures: usize,
    pub b_f: f64,
    pub z0: f64,
    pub mult_b: f64,
    pub mult_z0: f64,
    pub contraction_radius: f64,
    pub single_basin: bool,
}

pub fn render_julia(c: &Classifier, viewport: Viewport, width: usize, height: usize, budget: u32) -> Result<JuliaRaster> {
    viewport.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::Validation("raster needs positive width and height".into()));
    }
    let rows: Vec<(Vec<Tag>, usize)> = (0..height)
        .into_par_iter()
        .map(|j| {
            let mut fails = 0;
            let row = (0..width)
                .map(|i| match c.classify(viewport.pixel(i, j, width, height), budget) {
                    Ok(t) => t,
                    Err(_) => {
                        fails += 1;
                        Tag::Unknown
                    }
                })
                .collect();
            (row, fails)
        })
        .collect();
    let numeric_failures = rows.iter().map(|r| r.1).sum();
    let cells = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(JuliaRaster { viewport, width, height, budget, cells, numeric_failures })
}

impl JuliaRaster {
    pub fn at(&self, i: usize, j: usize) -> Tag {
        self.cells[j * self.width + i]
    }

    pub fn unknown_fraction(&self) -> f64 {
        self.cells.iter().filter(|t| **t == Tag::Unknown).count() as f64 / self.cells.len() as f64
    }

    /// Binary PGM (P5), 8-bit.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.cells.iter().map(|t| t.gray()));
        out
    }

    pub fn stats(&self, c: &Classifier) -> Result<JuliaStats> {
        let count = |p: fn(&Tag) -> bool| self.cells.iter().filter(|t| p(t)).count();
        let unknown = count(|t| *t == Tag::Unknown);
        Ok(JuliaStats {
            a: c.map.a,
            c: c.map.c,
            width: self.width,
            height: self.height,
            budget: self.budget,
            fatou: count(|t| matches!(t, Tag::Fatou(_))),
            julia: count(|t| *t == Tag::Julia),
            unknown,
            unknown_fraction: unknown as f64 / self.cells.len() as f64,
            max_steps: self.cells.iter().filter_map(|t| if let Tag::Fatou(s) = t { Some(*s) } else { None }).max().unwrap_or(0),
            numeric_failures: self.numeric_failures,
            b_f: c.fixed.b_f,
            z0: c.fixed.z0,
            mult_b: c.fixed.mult_b,
            mult_z0: c.fixed.mult_z0,
            contraction_radius: c.radius,
            single_basin: c.singular_orbits_attracted(self.budget)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub depth: usize,
    pub samples: usize,
    pub tree_size: usize,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DensityOptions {
    pub k_max: i64,
    pub seed: u64,
    pub viewport: Viewport,
    /// Longest random backward orbit used to draw a sample.
    pub max_orbit: usize,
}

impl DensityOptions {
    pub fn default_for(m: &FlatExpMap) -> Self {
        DensityOptions { k_max: 4, seed: 1, viewport: Viewport::default_for(m), max_orbit: 7 }
    }
}

/// Points of J_f: random backward orbits of the repelling fixed point,
/// kept when they land in the viewport.
pub fn julia_samples(m: &FlatExpMap, samples: usize, opts: &DensityOptions) -> Result<Vec<Complex64>> {
    let fp = find_fixed_points(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(samples);
    let mut tries = 0usize;
    while out.len() < samples {
        tries += 1;
        if tries > 1000 * samples {
            return Err(Error::Sampling("backward orbits rarely land in the viewport".into()));
        }
        let mut z = Complex64::new(fp.b_f, 0.0);
        for _ in 0..rng.random_range(1..=opts.max_orbit) {
            let k = rng.random_range(-opts.k_max..=opts.k_max);
            let pre = preimages_of_point(m, z, &[k])?;
            z = pre[rng.random_range(0..2)];
        }
        if opts.viewport.contains(z) {
            out.push(z);
        }
    }
    Ok(out)
}

/// Median and max distance from Julia samples to the preimage tree of a
/// (levels 0..=depth, |k| ≤ k_max).
pub fn preimage_density_probe(m: &FlatExpMap, depth: usize, samples: usize, opts: &DensityOptions) -> Result<DensityStats> {
    if depth > 4 {
        return Err(Error::Validation(format!("depth {depth} > 4")));
    }
    if samples < 100 {
        return Err(Error::Validation(format!("need at least 100 samples, got {samples}")));
    }
    let pts = julia_samples(m, samples, opts)?;
    let tree = preimage_tree(m, depth, opts.k_max)?.concat();
    let mut dist: Vec<f64> = pts
        .par_iter()
        .map(|&z| tree.iter().map(|&t| (z - t).norm()).fold(f64::INFINITY, f64::min))
        .collect();
    dist.sort_by(f64::total_cmp);
    let n = dist.len();
    let median = if n % 2 == 1 { dist[n / 2] } else { 0.5 * (dist[n / 2 - 1] + dist[n / 2]) };
    Ok(DensityStats { depth, samples: n, tree_size: tree.len(), median, max: dist[n - 1] })
}

/// H_n(z) = τⁿ base(z/τⁿ).
pub fn tower_map_eval(base: impl Fn(Complex64) -> Result<Complex64>, tau: f64, n: u32, z: Complex64) -> Result<Complex64> {
    let s = tau.powi(n as i32);
    Ok(base(z / s)? * s)
}

/// Fraction of grid points within `delta` of ∪_{n ≤ N} τⁿ K, for N = 0..=n_max.
pub fn tower_density_probe(k: &[Complex64], tau: f64, n_max: u32, grid: Viewport, resolution: usize, delta: f64) -> Result<Vec<f64>> {
    grid.validate()?;
    if k.is_empty() || resolution == 0 || !(tau > 1.0) {
        return Err(Error::Validation("tower probe needs points, a positive resolution and τ > 1".into()));
    }
    let cells: Vec<Complex64> =
        (0..resolution).flat_map(|j| (0..resolution).map(move |i| grid.pixel(i, j, resolution, resolution))).collect();
    let mut covered = vec![false; cells.len()];
    let mut out = Vec::new();
    for n in 0..=n_max {
        let s = tau.powi(n as i32);
        let scaled: Vec<Complex64> = k.iter().map(|&z| z * s).collect();
        covered.par_iter_mut().zip(&cells).for_each(|(c, &p)| {
            if !*c {
                *c = scaled.iter().any(|&q| (q - p).norm() <= delta);
            }
        });
        out.push(covered.iter().filter(|c| **c).count() as f64 / cells.len() as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_field_is_one() {
        let m = FlatExpMap::default();
        let w = m.eval(Complex64::new(1e8, 0.0), false).unwrap();
        assert!((w - 1.0).norm() <= 1e-15);
        assert_eq!(m.eval(infinity(), false).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn singular_point() {
        let m = FlatExpMap::default();
        assert_eq!(m.eval(Complex64::new(m.a, 0.0), true).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(m.eval(Complex64::new(m.a, 0.0), false), Err(Error::Singularity(_))));
    }

    #[test]
    fn approach_to_a_along_axes() {
        let m = FlatExpMap::default();
        // real approach: flat to 0; imaginary approach: blows up to ∞
        assert_eq!(m.eval(Complex64::new(m.a + 1e-9, 0.0), false).unwrap(), Complex64::new(0.0, 0.0));
        assert!(is_infinite(m.eval(Complex64::new(m.a, 1e-3), false).unwrap()));
        // d² underflows here, the polar branch decides
        assert!(is_infinite(m.eval(Complex64::new(m.a, 1e-200), false).unwrap()));
    }

    #[test]
    fn direct_value() {
        let m = FlatExpMap::new(0.5, 0.2).unwrap();
        let w = m.eval(Complex64::new(1.0, 0.0), false).unwrap();
        assert!((w.re - (-0.8f64).exp()).abs() < 1e-15 && w.im == 0.0);
    }

    #[test]
    fn bad_parameters() {
        assert!(FlatExpMap::new(0.0, 1.0).is_err());
        assert!(FlatExpMap::new(0.3, -1.0).is_err());
    }

    #[test]
    fn degenerate_branch() {
        let m = FlatExpMap::default();
        assert!(matches!(preimages_of_point(&m, Complex64::new(1.0, 0.0), &[0]), Err(Error::Degenerate(_))));
        assert!(preimages_of_point(&m, Complex64::new(1.0, 0.0), &[1]).is_ok());
        assert!(matches!(preimages_of_point(&m, Complex64::new(0.0, 0.0), &[1]), Err(Error::Domain(_))));
    }

    #[test]
    fn pixel_centers_mirror() {
        let v = Viewport { re_min: -0.7, re_max: 1.5, im_min: -1.0, im_max: 1.0 };
        for j in 0..7 {
            assert_eq!(v.pixel(3, j, 10, 7).im, -v.pixel(3, 6 - j, 10, 7).im);
        }
    }
}
