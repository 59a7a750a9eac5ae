//! Large-ℓ structure of solved fixed points: the map G, its multiplier and
//! cubic expansion, the singular expansion of log H, Abel residuals,
//! inverse branches, presentation intervals and the extrapolated limit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decimal;
use crate::error::{Error, Result};
use crate::funcspace::log_h_from_e;
use crate::renorm::{extrapolate_inverse_ell, FixedPointSolution, SweepTable, DEFAULT_FIT_WINDOW};

/// Least squares with column equilibration. Returns (coefficients, max abs residual).
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let scales: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    let mut s = a.clone();
    for (j, &c) in scales.iter().enumerate() {
        s.column_mut(j).scale_mut(1.0 / c);
    }
    let svd = s.svd(true, true);
    let mut x = svd.solve(b, 1e-15).map_err(|e| Error::Numeric(e.to_string()))?;
    for (j, &c) in scales.iter().enumerate() {
        x[j] /= c;
    }
    let res = (a * &x - b).amax();
    Ok((x, res))
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Err(Error::Range(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// G(x) = H^{p-1}(x/τ).
#[derive(Clone, Copy)]
pub struct GMap<'a> {
    sol: &'a FixedPointSolution,
}

impl GMap<'_> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.sol.h_iter(x / self.sol.tau_f64(), self.sol.p() - 1)
    }

    pub fn eval_complex(&self, z: Complex64) -> Result<Complex64> {
        let mut w = z / self.sol.tau_f64();
        for _ in 0..self.sol.p() - 1 {
            w = self.sol.h_complex(w)?;
        }
        Ok(w)
    }
}

/// Build G, checking that the intermediate images of [0, 1/τ] miss x0.
pub fn build_g(sol: &FixedPointSolution) -> Result<GMap<'_>> {
    let tau = sol.tau_f64();
    let grid: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0 / tau).collect();
    let mut pts = grid;
    for n in 1..sol.p().saturating_sub(1) {
        for x in pts.iter_mut() {
            *x = sol.h_ext(*x)?;
        }
        let first = pts[0] > sol.x0;
        if pts.iter().any(|&x| (x > sol.x0) != first || (x - sol.x0).abs() < 1e-14) {
            return Err(Error::Degenerate(format!("H^{n}([0, 1/tau]) contains the critical point")));
        }
    }
    Ok(GMap { sol })
}

/// |G'(x0)| by a five-point stencil, and τ^{-1/ℓ}.
pub fn multiplier_check(sol: &FixedPointSolution) -> Result<(f64, f64)> {
    let g = build_g(sol)?;
    let h = 1e-3;
    let x0 = sol.x0;
    if x0 - 2.0 * h < 0.0 || x0 + 2.0 * h > 1.0 {
        return Err(Error::Domain("multiplier stencil leaves [0, 1]".into()));
    }
    let d = (-g.eval(x0 + 2.0 * h)? + 8.0 * g.eval(x0 + h)? - 8.0 * g.eval(x0 - h)? + g.eval(x0 - 2.0 * h)?) / (12.0 * h);
    Ok((d.abs(), sol.tau_f64().powf(-1.0 / sol.ell)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicFit {
    pub epsilon: f64,
    /// (G²)'(x0) from the fit.
    pub derivative: f64,
    pub residual: f64,
    /// G² is the identity to fit accuracy.
    pub degenerate: bool,
}

/// Fit G²(x) - x ≈ a1 y + a2 y² - ε y³ + a4 y⁴, y = x - x0, on a symmetric
/// log-spaced stencil of half-width `scale`.
pub fn parabolic_fit(g: impl Fn(f64) -> Result<f64>, x0: f64, scale: f64) -> Result<ParabolicFit> {
    let ds = logspace(1e-3, 1e-1, 12);
    let ys: Vec<f64> = ds.iter().rev().map(|d| -d * scale).chain(ds.iter().map(|d| d * scale)).collect();
    let mut rhs = Vec::with_capacity(ys.len());
    for &y in &ys {
        rhs.push(g(g(x0 + y)?)? - x0 - y);
    }
    let a = DMatrix::from_fn(ys.len(), 4, |i, j| ys[i].powi(j as i32 + 1));
    let b = DVector::from_vec(rhs.clone());
    let (c, residual) = lstsq(&a, &b)?;
    let derivative = 1.0 + c[0];
    if (derivative - 1.0).abs() > 0.05 {
        return Err(Error::NotParabolic(format!("(G^2)'(x0) = {derivative:.6}")));
    }
    // G² indistinguishable from the identity at rounding level
    let size = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = size <= 64.0 * f64::EPSILON * (x0.abs() + scale);
    let epsilon = if degenerate { 0.0 } else { -c[2] };
    Ok(ParabolicFit { epsilon, derivative, residual, degenerate })
}

/// parabolic_fit of a solution's G about its x0.
pub fn parabolic_fit_solution(sol: &FixedPointSolution) -> Result<ParabolicFit> {
    let g = build_g(sol)?;
    parabolic_fit(|x| g.eval(x), sol.x0, sol.x0.min(1.0 - sol.x0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatouFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub constant: f64,
    pub residual: f64,
}

/// Fit log H(x0+δ) ≈ C0 δ⁻² + C1 δ⁻¹ + C2 log|δ| + K with |δ| log-spaced in
/// `[lo, hi]·scale` on both sides of x0.
pub fn fatou_fit_log(log_h: impl Fn(f64) -> Result<f64>, x0: f64, lo: f64, hi: f64, scale: f64) -> Result<FatouFit> {
    let ds = logspace(lo, hi, 20);
    let ys: Vec<f64> = ds.iter().rev().map(|d| -d * scale).chain(ds.iter().map(|d| d * scale)).collect();
    let mut vals = Vec::with_capacity(ys.len());
    for &y in &ys {
        let v = log_h(x0 + y)?;
        if !v.is_finite() {
            return Err(Error::Sampling(format!("log H is not finite at x0 + {y:e}")));
        }
        vals.push(v);
    }
    // rows are weighted by 1/max(1, |log H|): rounding in the samples is
    // relative, so unweighted rows near x0 would swamp the others
    let w: Vec<f64> = vals.iter().map(|v| 1.0 / v.abs().max(1.0)).collect();
    let basis = |i: usize, j: usize| match j {
        0 => ys[i].powi(-2),
        1 => 1.0 / ys[i],
        2 => ys[i].abs().ln(),
        _ => 1.0,
    };
    let a = DMatrix::from_fn(ys.len(), 4, |i, j| w[i] * basis(i, j));
    let b = DVector::from_iterator(ys.len(), vals.iter().zip(&w).map(|(v, w)| v * w));
    let (c, _) = lstsq(&a, &b)?;
    let residual = (0..ys.len())
        .map(|i| ((0..4).map(|j| c[j] * basis(i, j)).sum::<f64>() - vals[i]).abs())
        .fold(0.0, f64::max);
    Ok(FatouFit { c0: c[0], c1: c[1], c2: c[2], constant: c[3], residual })
}

pub fn fatou_fit(sol: &FixedPointSolution) -> Result<FatouFit> {
    fatou_fit_log(|x| sol.log_h(x), sol.x0, 1e-4, 1e-1, 1.0)
}

fn log_h_complex(sol: &FixedPointSolution, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Ok(Complex64::new(sol.log_h(z.re)?, 0.0));
    }
    log_h_from_e(sol.e_complex(z)?, sol.ell)
}

/// sup |log H(G(z)) - log H(z) + log τ| over `grid`.
pub fn abel_residual(sol: &FixedPointSolution, grid: &[Complex64]) -> Result<f64> {
    abel_residual_trial(sol, grid, sol.tau_f64())
}

/// Abel defect with a trial scaling in the log τ term (G keeps the solution's τ).
pub fn abel_residual_trial(sol: &FixedPointSolution, grid: &[Complex64], tau: f64) -> Result<f64> {
    let g = build_g(sol)?;
    let log_tau = tau.ln();
    let mut worst = 0.0f64;
    for &z in grid {
        let gz = if z.im == 0.0 { Complex64::new(g.eval(z.re)?, 0.0) } else { g.eval_complex(z)? };
        let d = (log_h_complex(sol, gz)? - log_h_complex(sol, z)? + log_tau).norm();
        if !d.is_finite() {
            return Err(Error::Numeric(format!("non-finite Abel defect at {z}")));
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Abel defect at z = τx for the `residual_sup` grid x of the same size,
/// restricted to H(z) ≥ `h_min`. There the defect is at most
/// `residual_sup / h_min` to first order.
pub fn abel_residual_shared(sol: &FixedPointSolution, grid_size: usize, h_min: f64) -> Result<f64> {
    let tau = sol.tau_f64();
    let grid: Vec<Complex64> = (0..grid_size)
        .map(|i| tau * (i as f64 / (grid_size - 1) as f64 / tau))
        .filter(|&z| z <= 1.0 && sol.h(z) >= h_min)
        .map(|z| Complex64::new(z, 0.0))
        .collect();
    abel_residual(sol, &grid)
}

/// Evenly spaced interior points of (x0, 1), shifted by `offset`.
pub fn abel_grid(sol: &FixedPointSolution, n: usize, offset: Complex64) -> Vec<Complex64> {
    (1..=n).map(|k| Complex64::new(sol.x0 + (1.0 - sol.x0) * k as f64 / (n + 1) as f64, 0.0) + offset).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Real solution of E(z) = target along the continued E.
fn invert_e_real(sol: &FixedPointSolution, target: f64) -> Result<f64> {
    let f = |x: f64| sol.e_ext(x).map(|e| e - target);
    // E decreases through the critical point: E > 0 left of x0, E < 0 right of it
    let (mut a, mut b) = if target > 0.0 { (sol.x0 - 1.0, sol.x0) } else { (sol.x0, sol.x0 + 1.0) };
    let limit = sol.tau_f64();
    for _ in 0..40 {
        let (fa, fb) = (f(a)?, f(b)?);
        if (fa > 0.0) != (fb > 0.0) || fa == 0.0 || fb == 0.0 {
            return bisect(f, a, b);
        }
        if target > 0.0 {
            b = a;
            a -= 2.0 * (sol.x0 - a).max(0.5);
            if a < -limit {
                break;
            }
        } else {
            a = b;
            b += 2.0 * (b - sol.x0).max(0.5);
            if b > limit {
                break;
            }
        }
    }
    Err(Error::Range(format!("E does not reach {target} on the continued real domain")))
}

/// P±(w) = E⁻¹(±exp(w/ℓ)).
pub fn inverse_branch_p(sol: &FixedPointSolution, branch: Branch, w: Complex64) -> Result<Complex64> {
    let sign = if branch == Branch::Plus { 1.0 } else { -1.0 };
    let target = (w / sol.ell).exp() * sign;
    if w.im == 0.0 {
        return Ok(Complex64::new(invert_e_real(sol, target.re)?, 0.0));
    }
    let mut z = Complex64::new(invert_e_real(sol, target.re)?, 0.0);
    let h = 1e-7;
    for _ in 0..50 {
        let e = sol.e_complex(z)? - target;
        if e.norm() <= 1e-14 * target.norm().max(1.0) {
            return Ok(z);
        }
        let d = (sol.e_complex(z + h)? - sol.e_complex(z - h)?) / (2.0 * h);
        z -= e / d;
    }
    let e = (sol.e_complex(z)? - target).norm();
    if e <= 1e-12 * target.norm().max(1.0) {
        Ok(z)
    } else {
        Err(Error::Range(format!("Newton for E^-1({target}) stalled at defect {e:e}")))
    }
}

/// The fixed point b0 > 1 of the continued H, its preimage b0' < 0 on the
/// branch E > 0, and H'(b0).
pub fn find_b0(sol: &FixedPointSolution) -> Result<(f64, f64, f64)> {
    let step = 1e-3;
    let mut y = 1.0;
    loop {
        let next = y + step;
        let hn = sol.h_ext(next)?;
        if hn > next {
            break;
        }
        if hn <= sol.h_ext(y)? {
            return Err(Error::Geometry("H stops increasing before reaching a fixed point beyond 1".into()));
        }
        y = next;
        if y > sol.tau_f64() {
            return Err(Error::Geometry("no fixed point of H found beyond 1".into()));
        }
    }
    let b0 = bisect(|x| Ok(sol.h_ext(x)? - x), y, y + step)?;
    let hd = 1e-6;
    let slope = (sol.h_ext(b0 + hd)? - sol.h_ext(b0 - hd)?) / (2.0 * hd);
    let b0p = invert_e_real(sol, b0.powf(1.0 / sol.ell))?;
    Ok((b0, b0p, slope))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresentationIntervals {
    pub j: Vec<(f64, f64)>,
    pub jcal: Vec<(f64, f64)>,
    pub r_prime: f64,
    pub b0: f64,
    pub b0_prime: f64,
}

/// Largest interval around `seed` on which `inside` holds, with endpoints
/// refined by bisection; the search is confined to `[lo, hi]`.
fn component(inside: impl Fn(f64) -> Result<bool>, seed: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !inside(seed)? {
        return Err(Error::Geometry(format!("seed {seed} is not in the set")));
    }
    let h = (hi - lo) / 20000.0;
    let edge = |dir: f64| -> Result<f64> {
        let mut a = seed;
        loop {
            let b = a + dir * h;
            if b < lo || b > hi {
                return Ok(if dir < 0.0 { lo } else { hi });
            }
            if !inside(b)? {
                let (mut x_in, mut x_out) = (a, b);
                for _ in 0..80 {
                    let m = 0.5 * (x_in + x_out);
                    if inside(m)? {
                        x_in = m;
                    } else {
                        x_out = m;
                    }
                }
                return Ok(0.5 * (x_in + x_out));
            }
            a = b;
        }
    };
    Ok((edge(-1.0)?, edge(1.0)?))
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

pub fn presentation_intervals(sol: &FixedPointSolution) -> Result<PresentationIntervals> {
    let p = sol.p();
    let tau = sol.tau_f64();
    let (b0, b0p, _) = find_b0(sol)?;
    let g = build_g(sol)?;
    let lo = b0p / tau;
    let mut j = vec![(0.0, 0.0); p];
    j[0] = (0.0, b0 / tau);
    j[p - 1] = sorted(g.eval(b0p)?, g.eval(b0)?);
    let jp = j[p - 1];
    for q in 2..p {
        let a = sol.h_iter(j[0].0, q - 1)?;
        let b = sol.h_iter(j[0].1, q - 1)?;
        let seed = 0.5 * (a + b);
        j[q - 1] = component(
            |x| {
                let y = sol.h_iter(x, p - q)?;
                Ok(y > jp.0 && y < jp.1)
            },
            seed,
            lo,
            b0,
        )?;
    }
    let sup = j.iter().fold(1.0f64, |m, iv| m.max(iv.1));
    let r_prime = 0.5 * (sup + b0);
    let t = r_prime / tau;
    let mut jcal = vec![(0.0, 0.0); p];
    jcal[0] = (0.0, t);
    let xl = bisect(|x| Ok(sol.h_ext(x)? - t), jp.0, sol.x0)?;
    let xr = bisect(|x| Ok(sol.h_ext(x)? - t), sol.x0, jp.1)?;
    jcal[p - 1] = (xl, xr);
    let jcp = jcal[p - 1];
    for q in 2..p {
        let (a, b) = j[q - 1];
        // seed at the grid point of J_q whose image is closest to x0
        let mut best = (f64::INFINITY, 0.5 * (a + b));
        for i in 1..2000 {
            let x = a + (b - a) * i as f64 / 2000.0;
            let d = (sol.h_iter(x, p - q)? - sol.x0).abs();
            if d < best.0 {
                best = (d, x);
            }
        }
        jcal[q - 1] = component(
            |x| {
                let y = sol.h_iter(x, p - q)?;
                Ok(y > jcp.0 && y < jcp.1)
            },
            best.1,
            a,
            b,
        )?;
    }
    let pi = PresentationIntervals { j, jcal, r_prime, b0, b0_prime: b0p };
    pi.check(1e-9)?;
    Ok(pi)
}

impl PresentationIntervals {
    /// 𝒥_q ⊂ J_q, pairwise disjoint, inside (0, R').
    pub fn check(&self, tol: f64) -> Result<()> {
        for (q, (c, o)) in self.jcal.iter().zip(&self.j).enumerate() {
            if c.0 < o.0 - tol || c.1 > o.1 + tol {
                return Err(Error::Geometry(format!("Jcal[{}] is not inside J[{}]", q + 1, q + 1)));
            }
            if c.0 < -tol || c.1 > self.r_prime + tol {
                return Err(Error::Geometry(format!("Jcal[{}] is not inside (0, R')", q + 1)));
            }
        }
        let mut iv = self.jcal.clone();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in iv.windows(2) {
            if w[1].0 - w[0].1 <= tol {
                return Err(Error::Geometry(format!("intervals {:?} and {:?} overlap", w[0], w[1])));
            }
        }
        Ok(())
    }
}

/// Per-ℓ row of the limit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostics {
    pub ell: f64,
    pub x0: f64,
    pub tau: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub mult_measured: f64,
    pub mult_predicted: f64,
    pub fit_residual: f64,
}

pub fn diagnostics(sol: &FixedPointSolution) -> Result<LimitDiagnostics> {
    let f = fatou_fit(sol)?;
    let (m, p) = multiplier_check(sol)?;
    Ok(LimitDiagnostics {
        ell: sol.ell,
        x0: sol.x0,
        tau: sol.tau_f64(),
        c0: f.c0,
        c1: f.c1,
        c2: f.c2,
        mult_measured: m,
        mult_predicted: p,
        fit_residual: f.residual,
    })
}

pub fn diagnostics_csv(rows: &[LimitDiagnostics]) -> String {
    let mut s = String::from("ell,x0,tau,C0,C1,C2,mult_measured,mult_predicted\n");
    let f = decimal::format_f64;
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            f(r.ell),
            f(r.x0),
            f(r.tau),
            f(r.c0),
            f(r.c1),
            f(r.c2),
            f(r.mult_measured),
            f(r.mult_predicted)
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwLimitEstimate {
    pub x0: f64,
    pub tau: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub fit_residual: f64,
    pub source_ells: Vec<f64>,
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

/// Extrapolate x0, τ and the C-coefficients in 1/ℓ over the last `window`
/// rows; ε comes from the parabolic fit at the largest ℓ.
pub fn extrapolate_limit(sweep: &SweepTable, fits: &[LimitDiagnostics], window: usize) -> Result<EwLimitEstimate> {
    if fits.len() < 4 || sweep.solutions.len() != fits.len() {
        return Err(Error::Data(format!("need at least 4 solved criticalities with diagnostics, got {}", fits.len())));
    }
    let taus: Vec<f64> = fits.iter().map(|f| f.tau).collect();
    let x0s: Vec<f64> = fits.iter().map(|f| f.x0).collect();
    if !taus.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::Data("tau is not increasing in ell".into()));
    }
    if !strictly_monotone(&x0s) {
        return Err(Error::Data("x0 is not monotone in ell".into()));
    }
    let fit = |sel: &dyn Fn(&LimitDiagnostics) -> f64| {
        let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.ell, sel(f))).collect();
        extrapolate_inverse_ell(&pts, window)
    };
    let (x0, r1) = fit(&|f| f.x0);
    let (tau, r2) = fit(&|f| f.tau);
    let (c0, r3) = fit(&|f| f.c0);
    let (c1, _) = fit(&|f| f.c1);
    let (c2, _) = fit(&|f| f.c2);
    let last = sweep.solutions.last().expect("non-empty");
    let pf = parabolic_fit_solution(last)?;
    let est = EwLimitEstimate {
        x0,
        tau,
        c0,
        c1,
        c2,
        epsilon: pf.epsilon,
        fit_residual: r1.max(r2 / tau).max(r3 / c0.abs().max(f64::MIN_POSITIVE)),
        source_ells: fits.iter().map(|f| f.ell).collect(),
    };
    if !(est.tau > 1.0) {
        return Err(Error::Data(format!("extrapolated tau = {} is not > 1", est.tau)));
    }
    if !(est.c0 < 0.0) {
        return Err(Error::Data(format!("extrapolated C0 = {:e} is not negative", est.c0)));
    }
    if !(est.epsilon > 0.0) {
        return Err(Error::Data(format!("epsilon = {} is not positive", est.epsilon)));
    }
    Ok(est)
}

pub fn extrapolate_limit_default(sweep: &SweepTable) -> Result<(EwLimitEstimate, Vec<LimitDiagnostics>)> {
    let fits = sweep.solutions.iter().map(diagnostics).collect::<Result<Vec<_>>>()?;
    Ok((extrapolate_limit(sweep, &fits, DEFAULT_FIT_WINDOW)?, fits))
}
