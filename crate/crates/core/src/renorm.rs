//! Fixed points of the period-p renormalization operator for criticality ℓ.
//!
//! In E-coordinates a fixed point satisfies
//! `E(τu) = α E(H^{p-1}(u))` for u in [0, 1/τ], with H = |E|^ℓ, E(0) = 1 and
//! τ = |α|^ℓ. The unknowns are the Chebyshev coefficients of E on [0, 1] and α.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{critical_orbit_type, seed_parameter, validate_admissible, OrderType};
use crate::dd::{Dd, Real};
use crate::decimal;
use crate::error::{Error, Result};
use crate::funcspace::{self, chebyshev_nodes, clenshaw, h_from_e, interpolate, SeriesJson, SeriesMap, UnimodalMap};

pub const MIN_DEGREE: usize = 16;
pub const MAX_DEGREE: usize = 128;
/// Criticality from which `Precision::Auto` switches to double-double.
pub const AUTO_DD_FROM_ELL: f64 = 64.0;
/// Rows used by default in the τ∞ fit.
pub const DEFAULT_FIT_WINDOW: usize = 4;

const MAX_NEWTON: usize = 60;
const MAX_HALVINGS: usize = 20;
const GUARD_ITERATIONS: usize = 8;
const SEED_DEGREE: usize = 32;
const MAX_EXTENSION_DEPTH: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    #[serde(rename = "dd")]
    DoubleDouble,
    Auto,
}

impl Precision {
    /// Whether a solve at `ell` runs in double-double.
    pub fn use_dd(self, ell: f64) -> bool {
        match self {
            Precision::Double => false,
            Precision::DoubleDouble => true,
            Precision::Auto => ell >= AUTO_DD_FROM_ELL,
        }
    }

    fn resolved(self, ell: f64) -> Precision {
        if self.use_dd(ell) {
            Precision::DoubleDouble
        } else {
            Precision::Double
        }
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" => Ok(Precision::Double),
            "dd" | "double-double" => Ok(Precision::DoubleDouble),
            "auto" => Ok(Precision::Auto),
            other => Err(Error::Validation(format!("unknown precision mode {other:?} (expected double, dd or auto)"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::DoubleDouble => "dd",
            Precision::Auto => "auto",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub degree: usize,
    pub tol: f64,
    pub precision: Precision,
}

impl SolverOptions {
    pub fn new(degree: usize, tol: f64) -> Self {
        SolverOptions { degree, tol, precision: Precision::Auto }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&self.degree) {
            return Err(Error::Validation(format!("degree must lie in [{MIN_DEGREE}, {MAX_DEGREE}], got {}", self.degree)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Validation(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One solved fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointSolution {
    pub e: SeriesMap,
    pub ell: f64,
    pub alpha: Dd,
    pub tau: Dd,
    pub x0: f64,
    /// Sup-norm of the collocation defect at convergence.
    pub residual: f64,
    pub order_type: OrderType,
    pub iterations: usize,
    pub precision: Precision,
}

/// Collocation system for fixed (ℓ, p, degree).
struct Problem {
    ell: f64,
    p: usize,
    nodes: Vec<f64>,
}

#[inline]
fn e_unit<T: Real>(c: &[T], x: T) -> T {
    clenshaw(c, x + x - T::from_f64(1.0))
}

#[inline]
fn h_unit<T: Real>(c: &[T], ell: f64, x: T) -> T {
    let e = e_unit(c, x).abs();
    if e.to_f64() == 0.0 {
        return T::from_f64(0.0);
    }
    (T::from_f64(ell) * e.ln()).exp()
}

impl Problem {
    fn new(ell: f64, p: usize, degree: usize) -> Self {
        Problem { ell, p, nodes: chebyshev_nodes(0.0, 1.0, degree) }
    }

    fn size(&self) -> usize {
        self.nodes.len() + 1
    }

    fn residual<T: Real>(&self, v: &[T]) -> Vec<T> {
        let n = self.nodes.len();
        let c = &v[..n];
        let alpha = v[n];
        let tau = (T::from_f64(self.ell) * alpha.abs().ln()).exp();
        let mut r = Vec::with_capacity(n + 1);
        for &s in &self.nodes {
            let s = T::from_f64(s);
            let mut y = s / tau;
            for _ in 0..self.p - 1 {
                y = h_unit(c, self.ell, y);
            }
            r.push(alpha * e_unit(c, y) - e_unit(c, s));
        }
        r.push(e_unit(c, T::from_f64(0.0)) - T::from_f64(1.0));
        r
    }

    fn sup<T: Real>(r: &[T]) -> f64 {
        r.iter().fold(0.0f64, |m, x| {
            let a = x.to_f64().abs();
            if a.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(a)
            }
        })
    }

    fn jacobian(&self, v: &[f64], r0: &[f64]) -> DMatrix<f64> {
        let m = self.size();
        let cols: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let h = 1e-7 * v[j].abs().max(1.0);
                let mut w = v.to_vec();
                w[j] += h;
                let r = self.residual(&w);
                r.iter().zip(r0).map(|(a, b)| (a - b) / h).collect()
            })
            .collect();
        DMatrix::from_fn(m, m, |i, j| cols[j][i])
    }
}

struct NewtonOutcome {
    v: Vec<Dd>,
    iterations: usize,
    residual: f64,
    damped: usize,
}

fn newton_t<T: Real>(prob: &Problem, v0: &[Dd], tol: f64, max_iter: usize) -> Result<NewtonOutcome> {
    let mut v: Vec<T> = v0.iter().map(|&x| T::from_dd(x)).collect();
    let mut r = prob.residual(&v);
    let mut nr = Problem::sup(&r);
    let mut damped = 0;
    for it in 0..=max_iter {
        if !nr.is_finite() {
            return Err(Error::NoConvergence { residual: nr });
        }
        if nr <= tol {
            return Ok(NewtonOutcome { v: v.iter().map(|x| x.to_dd()).collect(), iterations: it, residual: nr, damped });
        }
        if it == max_iter {
            break;
        }
        let vf: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
        let rf = prob.residual(&vf);
        let jac = prob.jacobian(&vf, &rf);
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x.to_f64()));
        let dv = jac.lu().solve(&rhs).ok_or(Error::NoConvergence { residual: nr })?;
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let vn: Vec<T> = v.iter().zip(dv.iter()).map(|(&a, &d)| a + T::from_f64(lam * d)).collect();
            let rn = prob.residual(&vn);
            let nrn = Problem::sup(&rn);
            if nrn.is_finite() && nrn < nr {
                accepted = Some((vn, rn, nrn));
                break;
            }
            lam *= 0.5;
        }
        let Some((vn, rn, nrn)) = accepted else {
            return Err(Error::NoConvergence { residual: nr });
        };
        if lam < 1.0 {
            damped += 1;
        }
        v = vn;
        r = rn;
        nr = nrn;
    }
    Err(Error::NoConvergence { residual: nr })
}

fn newton(prob: &Problem, v0: &[Dd], tol: f64, max_iter: usize, precision: Precision) -> Result<NewtonOutcome> {
    if precision.use_dd(prob.ell) {
        newton_t::<Dd>(prob, v0, tol, max_iter)
    } else {
        newton_t::<f64>(prob, v0, tol, max_iter)
    }
}

fn build_solution(
    v: &[Dd],
    ell: f64,
    t: &OrderType,
    out: &NewtonOutcome,
    precision: Precision,
) -> Result<FixedPointSolution> {
    let n = v.len() - 1;
    let e = SeriesMap::new((0.0, 1.0), v[..n].to_vec())?;
    let alpha = v[n];
    let tau = alpha.abs().powf(Dd::from(ell));
    let map = UnimodalMap::new(e.clone(), ell).map_err(|err| Error::WrongBranch(format!("solved E is not unimodal: {err}")))?;
    let sol = FixedPointSolution {
        e,
        ell,
        alpha,
        tau,
        x0: map.x0,
        residual: out.residual,
        order_type: t.clone(),
        iterations: out.iterations,
        precision: precision.resolved(ell),
    };
    if !(sol.tau.to_f64() > 1.0) {
        return Err(Error::WrongBranch(format!("tau = {} is not > 1", sol.tau)));
    }
    let got = critical_orbit_type(&map, t.period()).map_err(|err| Error::WrongBranch(err.to_string()))?;
    if &got != t {
        return Err(Error::WrongBranch(format!("solved map has order type {got}, requested {t}")));
    }
    Ok(sol)
}

impl FixedPointSolution {
    pub fn p(&self) -> usize {
        self.order_type.period()
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    pub fn tau_f64(&self) -> f64 {
        self.tau.to_f64()
    }

    pub fn map(&self) -> UnimodalMap {
        UnimodalMap { e: self.e.clone(), ell: self.ell, x0: self.x0 }
    }

    fn state(&self) -> Vec<Dd> {
        let mut v = self.e.coeffs().to_vec();
        v.push(self.alpha);
        v
    }

    /// E continued to the real line: the series inside its trust interval,
    /// the functional equation `E(y) = α E(H^{p-1}(y/τ))` outside it.
    pub fn e_ext(&self, y: f64) -> Result<f64> {
        self.e_ext_depth(y, 0)
    }

    fn e_ext_depth(&self, y: f64, depth: usize) -> Result<f64> {
        let (lo, hi) = self.e.trust_interval(funcspace::TRUST_RHO);
        if y >= lo && y <= hi.min(1.0) {
            return Ok(self.e.eval_unchecked(y));
        }
        if depth >= MAX_EXTENSION_DEPTH || !y.is_finite() {
            return Err(Error::Domain(format!("cannot continue E to {y}")));
        }
        let mut z = y / self.tau_f64();
        for _ in 0..self.p() - 1 {
            z = self.e_ext_depth(z, depth + 1)?.abs().powf(self.ell);
        }
        Ok(self.alpha_f64() * self.e_ext_depth(z, depth + 1)?)
    }

    pub fn h_ext(&self, y: f64) -> Result<f64> {
        Ok(self.e_ext(y)?.abs().powf(self.ell))
    }

    /// H on [0, 1] (and the small series continuation around it).
    pub fn h(&self, x: f64) -> f64 {
        self.e.eval_unchecked(x).abs().powf(self.ell)
    }

    /// ℓ log|E(x)| without underflow.
    pub fn log_h(&self, x: f64) -> Result<f64> {
        Ok(self.ell * self.e_ext(x)?.abs().ln())
    }

    pub fn h_iter(&self, x: f64, n: usize) -> Result<f64> {
        let mut y = x;
        for _ in 0..n {
            y = self.h_ext(y)?;
        }
        Ok(y)
    }

    /// Complex continuation of E, analogous to [`Self::e_ext`].
    pub fn e_complex(&self, z: Complex64) -> Result<Complex64> {
        self.e_complex_depth(z, 0)
    }

    fn e_complex_depth(&self, z: Complex64, depth: usize) -> Result<Complex64> {
        if self.e.in_trust_region(z, funcspace::TRUST_RHO) && z.re <= 1.0 {
            return Ok(self.e.eval_complex(z));
        }
        if depth >= MAX_EXTENSION_DEPTH || !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("cannot continue E to {z}")));
        }
        let mut w = z / self.tau_f64();
        for _ in 0..self.p() - 1 {
            w = h_from_e(self.e_complex_depth(w, depth + 1)?, self.ell)?;
        }
        Ok(self.e_complex_depth(w, depth + 1)? * self.alpha_f64())
    }

    pub fn h_complex(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 {
            return Ok(Complex64::new(self.h_ext(z.re)?, 0.0));
        }
        h_from_e(self.e_complex(z)?, self.ell)
    }
}

/// Seed at ℓ = 2 from the linear map E(x) = 1 - λx.
fn seed_state(t: &OrderType, lambda: f64, sign: f64, degree: usize) -> Vec<Dd> {
    let p = t.period();
    let mut c = vec![Dd::ZERO; degree + 1];
    c[0] = Dd::from(1.0 - 0.5 * lambda);
    c[1] = Dd::from(-0.5 * lambda);
    let mut x = 0.0f64;
    for _ in 0..p - 1 {
        let e = 1.0 - lambda * x;
        x = e * e;
    }
    let alpha = sign / (1.0 - lambda * x);
    c.push(Dd::from(alpha));
    c
}

fn resample_state(v: &[Dd], degree: usize) -> Vec<Dd> {
    let n = v.len() - 1;
    let c = &v[..n];
    let xs = chebyshev_nodes(0.0, 1.0, degree);
    let ys: Vec<Dd> = xs.iter().map(|&x| e_unit(c, Dd::from(x))).collect();
    let mut out = interpolate(&ys);
    out.push(v[n]);
    out
}

/// Solve at ℓ = 2 from the quadratic family.
fn seed_solution(t: &OrderType, opts: &SolverOptions) -> Result<FixedPointSolution> {
    let lambda = seed_parameter(t)?;
    let d0 = opts.degree.min(SEED_DEGREE);
    let offsets = [0.0, -0.01, 0.01, -0.03, 0.03, -0.06, 0.06];
    let mut last = Error::NoConvergence { residual: f64::NAN };
    for off in offsets {
        for sign in [1.0, -1.0] {
            let l = lambda * (1.0 + off);
            let v0 = seed_state(t, l, sign, d0);
            let coarse = Problem::new(2.0, t.period(), d0);
            let attempt = newton(&coarse, &v0, opts.tol.max(1e-12), MAX_NEWTON, opts.precision).and_then(|out| {
                let v = resample_state(&out.v, opts.degree);
                let fine = Problem::new(2.0, t.period(), opts.degree);
                let out = newton(&fine, &v, opts.tol, MAX_NEWTON, opts.precision)?;
                build_solution(&out.v, 2.0, t, &out, opts.precision)
            });
            match attempt {
                Ok(sol) => return Ok(sol),
                Err(e) => last = e,
            }
        }
    }
    Err(last)
}

/// Lagrange prediction in log ℓ through the last (up to three) states.
fn predict(hist: &[(f64, Vec<Dd>)], ell: f64) -> Vec<Dd> {
    let k = hist.len().min(3);
    let pts = &hist[hist.len() - k..];
    let s = ell.ln();
    let logs: Vec<f64> = pts.iter().map(|(l, _)| l.ln()).collect();
    let n = pts[0].1.len();
    let mut out = vec![Dd::ZERO; n];
    for (i, (_, v)) in pts.iter().enumerate() {
        let mut w = 1.0;
        for (j, &lj) in logs.iter().enumerate() {
            if j != i {
                w *= (s - lj) / (logs[i] - lj);
            }
        }
        for (o, &x) in out.iter_mut().zip(v) {
            *o += x * w;
        }
    }
    out
}

/// Guarded continuation state shared by solves and sweeps.
struct Continuation {
    t: OrderType,
    opts: SolverOptions,
    hist: Vec<(f64, Vec<Dd>)>,
    current: FixedPointSolution,
}

impl Continuation {
    fn from_solution(sol: FixedPointSolution, opts: &SolverOptions) -> Self {
        let state = sol.state();
        let state = if state.len() - 1 == opts.degree + 1 { state } else { resample_state(&state, opts.degree) };
        Continuation { t: sol.order_type.clone(), opts: opts.clone(), hist: vec![(sol.ell, state)], current: sol }
    }

    fn start(t: &OrderType, opts: &SolverOptions) -> Result<Self> {
        Ok(Continuation::from_solution(seed_solution(t, opts)?, opts))
    }

    /// Advance to `target`, stepping at most by a factor 2 and halving the
    /// log-step whenever Newton needs damping or more than a few iterations.
    fn advance(&mut self, target: f64) -> Result<FixedPointSolution> {
        let p = self.t.period();
        if (self.current.ell - target).abs() <= 1e-14 * target && self.current.e.degree() == self.opts.degree {
            return Ok(self.current.clone());
        }
        if (self.current.ell - target).abs() <= 1e-14 * target {
            // same ℓ, new degree
            let prob = Problem::new(target, p, self.opts.degree);
            let v = self.hist.last().expect("history").1.clone();
            let out = newton(&prob, &v, self.opts.tol, MAX_NEWTON, self.opts.precision)?;
            let sol = build_solution(&out.v, target, &self.t, &out, self.opts.precision)?;
            self.hist.push((target, out.v));
            self.current = sol.clone();
            return Ok(sol);
        }
        loop {
            let l0 = self.current.ell;
            if (l0 - target).abs() <= 1e-14 * target {
                return Ok(self.current.clone());
            }
            let mut step = if target > l0 { target.min(2.0 * l0) } else { target.max(0.5 * l0) };
            loop {
                let prob = Problem::new(step, p, self.opts.degree);
                let guess = predict(&self.hist, step);
                let accepted = newton(&prob, &guess, self.opts.tol, MAX_NEWTON, self.opts.precision)
                    .ok()
                    .filter(|out| out.damped == 0 && out.iterations <= GUARD_ITERATIONS)
                    .and_then(|out| build_solution(&out.v, step, &self.t, &out, self.opts.precision).ok().map(|s| (out, s)));
                if let Some((out, sol)) = accepted {
                    self.hist.push((step, out.v));
                    if self.hist.len() > 3 {
                        self.hist.remove(0);
                    }
                    self.current = sol;
                    break;
                }
                let next = (l0 * step).sqrt();
                if (next / l0).ln().abs() < 1e-4 {
                    let residual = newton(&prob, &guess, self.opts.tol, MAX_NEWTON, self.opts.precision)
                        .map(|o| o.residual)
                        .unwrap_or_else(|e| match e {
                            Error::NoConvergence { residual } => residual,
                            _ => f64::NAN,
                        });
                    return Err(Error::NoConvergence { residual }.at_ell(step));
                }
                step = next;
            }
        }
    }
}

fn check_inputs(ell: f64, t: &OrderType, opts: &SolverOptions) -> Result<()> {
    if !(ell > 1.0 && ell.is_finite()) {
        return Err(Error::Validation(format!("criticality must exceed 1, got {ell}")));
    }
    opts.validate()?;
    if !validate_admissible(t)? {
        return Err(Error::Combinatorics(format!("{t} is not realized by any superstable quadratic orbit")));
    }
    Ok(())
}

/// Solve τH^p(x) = H(τx) for criticality `ell` and combinatorics `t`.
pub fn solve_fixed_point(
    ell: f64,
    t: &OrderType,
    degree: usize,
    tol: f64,
    init: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    solve_fixed_point_with(ell, t, &SolverOptions::new(degree, tol), init)
}

pub fn solve_fixed_point_with(
    ell: f64,
    t: &OrderType,
    opts: &SolverOptions,
    init: Option<&FixedPointSolution>,
) -> Result<FixedPointSolution> {
    check_inputs(ell, t, opts)?;
    let mut cont = match init {
        Some(s) => {
            if &s.order_type != t {
                return Err(Error::Combinatorics(format!("initial solution has order type {}, requested {t}", s.order_type)));
            }
            Continuation::from_solution(s.clone(), opts)
        }
        None => Continuation::start(t, opts)?,
    };
    cont.advance(ell)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub ell: f64,
    pub tau: f64,
    pub alpha: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub order_type: OrderType,
    pub extrapolated_tau_inf: f64,
    pub extrapolation_residual: f64,
    pub solutions: Vec<FixedPointSolution>,
}

impl SweepRow {
    fn of(s: &FixedPointSolution) -> Self {
        SweepRow { ell: s.ell, tau: s.tau_f64(), alpha: s.alpha_f64(), residual: s.residual, iterations: s.iterations }
    }
}

/// Solve at each ℓ in turn, continuing from the previous solution. Returns
/// the solutions obtained before the first failure together with that failure.
pub fn sweep_partial(
    t: &OrderType,
    ells: &[f64],
    opts: &SolverOptions,
) -> (Vec<FixedPointSolution>, Option<Error>) {
    if ells.is_empty() {
        return (vec![], Some(Error::Validation("empty list of criticalities".into())));
    }
    if ells.windows(2).any(|w| !(w[1] > w[0])) {
        return (vec![], Some(Error::Validation("criticalities must be strictly increasing".into())));
    }
    if let Err(e) = check_inputs(ells[0], t, opts) {
        return (vec![], Some(e));
    }
    let mut cont = match Continuation::start(t, opts) {
        Ok(c) => c,
        Err(e) => return (vec![], Some(e.at_ell(2.0))),
    };
    let mut out = Vec::with_capacity(ells.len());
    for &ell in ells {
        match cont.advance(ell) {
            Ok(s) => out.push(s),
            Err(e) => return (out, Some(e.at_ell(ell))),
        }
    }
    (out, None)
}

pub fn sweep(t: &OrderType, ells: &[f64], degree: usize, tol: f64) -> Result<SweepTable> {
    sweep_with(t, ells, &SolverOptions::new(degree, tol), DEFAULT_FIT_WINDOW)
}

pub fn sweep_with(t: &OrderType, ells: &[f64], opts: &SolverOptions, fit_window: usize) -> Result<SweepTable> {
    let (sols, err) = sweep_partial(t, ells, opts);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SweepTable::from_solutions(t, sols, fit_window))
}

impl SweepTable {
    pub fn from_solutions(t: &OrderType, solutions: Vec<FixedPointSolution>, fit_window: usize) -> Self {
        let rows: Vec<SweepRow> = solutions.iter().map(SweepRow::of).collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.ell, r.tau)).collect();
        let (tau_inf, res) = extrapolate_inverse_ell(&pts, fit_window);
        SweepTable {
            rows,
            order_type: t.clone(),
            extrapolated_tau_inf: tau_inf,
            extrapolation_residual: res,
            solutions,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("ell,tau,alpha,residual,iters\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                decimal::format_f64(r.ell),
                decimal::format_f64(r.tau),
                decimal::format_f64(r.alpha),
                decimal::format_f64(r.residual),
                r.iterations
            ));
        }
        s
    }

    /// Parse the CSV written by [`Self::to_csv`] (a `tau_inf=` footer is ignored).
    pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "ell,tau,alpha,residual,iters" => {}
            _ => return Err(Error::Value("missing sweep CSV header".into())),
        }
        let bad = |l: &str| Error::Value(format!("bad sweep CSV row {l:?}"));
        lines
            .filter(|l| !l.trim().is_empty() && !l.starts_with("tau_inf="))
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(bad(l));
                }
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(l));
                Ok(SweepRow {
                    ell: num(f[0])?,
                    tau: num(f[1])?,
                    alpha: num(f[2])?,
                    residual: num(f[3])?,
                    iterations: f[4].trim().parse().map_err(|_| bad(l))?,
                })
            })
            .collect()
    }
}

/// Least-squares fit of y ≈ y∞ + A/ℓ + B/ℓ² over the last `window` points
/// (fewer terms when fewer points). Returns (y∞, max abs fit residual).
pub fn extrapolate_inverse_ell(points: &[(f64, f64)], window: usize) -> (f64, f64) {
    let k = points.len().min(window.max(1));
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let pts = &points[points.len() - k..];
    let terms = k.min(3);
    let a = DMatrix::from_fn(k, terms, |i, j| pts[i].0.powi(-(j as i32)));
    let b = DVector::from_iterator(k, pts.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let Ok(x) = svd.solve(&b, 1e-14) else {
        return (f64::NAN, f64::NAN);
    };
    let res = (&a * &x - &b).amax();
    (x[0], res)
}

/// Sup over a uniform grid of [0, 1/τ] of |τ H^p(x) - H(τx)|.
pub fn residual_sup(sol: &FixedPointSolution, grid_size: usize) -> Result<f64> {
    if grid_size < 64 {
        return Err(Error::Validation(format!("grid size must be >= 64, got {grid_size}")));
    }
    let tau = sol.tau_f64();
    let mut worst = 0.0f64;
    for i in 0..grid_size {
        let x = i as f64 / (grid_size - 1) as f64 / tau;
        let mut y = x;
        for _ in 0..sol.p() {
            y = sol.h(y);
        }
        let d = (tau * y - sol.h((tau * x).min(1.0))).abs();
        if !d.is_finite() {
            return Err(Error::Numeric(format!("non-finite defect at x = {x}")));
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// One application of the period-p renormalization operator in E-coordinates.
pub fn renormalize(m: &UnimodalMap, t: &OrderType) -> Result<(UnimodalMap, f64)> {
    let p = t.period();
    let got = critical_orbit_type(m, p)?;
    if &got != t {
        return Err(Error::Combinatorics(format!("critical orbit has order type {got}, expected {t}")));
    }
    let mut y = 0.0;
    for _ in 0..p - 1 {
        y = m.h(y);
    }
    let gp = m.e_at(y);
    let alpha = 1.0 / gp;
    if !alpha.is_finite() || alpha.abs() <= 1.0 {
        return Err(Error::Combinatorics(format!("no restrictive interval: g^p(0) = {gp}")));
    }
    let tau = alpha.abs().powf(m.ell);
    let mut escaped = None;
    let e = SeriesMap::from_fn((0.0, 1.0), m.e.degree(), |u| {
        let mut y = u / tau;
        for _ in 0..p - 1 {
            y = m.h(y);
        }
        if !m.e.contains(y) {
            escaped = Some(y);
        }
        alpha * m.e_at(y)
    })?;
    if let Some(y) = escaped {
        return Err(Error::Escape(format!("return orbit reached {y}")));
    }
    Ok((UnimodalMap::new(e, m.ell)?, alpha))
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    order_type: OrderType,
    ell: String,
    alpha: String,
    tau: String,
    x0: String,
    residual: String,
    iterations: usize,
    precision: Precision,
    #[serde(rename = "E")]
    e: SeriesJson,
}

impl FixedPointSolution {
    pub fn to_json(&self) -> String {
        let j = SolutionJson {
            order_type: self.order_type.clone(),
            ell: decimal::format_f64(self.ell),
            alpha: decimal::format_dd(self.alpha),
            tau: decimal::format_dd(self.tau),
            x0: decimal::format_f64(self.x0),
            residual: decimal::format_f64(self.residual),
            iterations: self.iterations,
            precision: self.precision,
            e: self.e.to_json_repr(),
        };
        serde_json::to_string_pretty(&j).expect("serializable")
    }

    /// Read a solution; structural checks only, see `verify` for invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let j: SolutionJson = serde_json::from_str(text).map_err(|e| Error::Value(e.to_string()))?;
        let num = |s: &str| decimal::parse_dd(s).map_err(Error::Value);
        Ok(FixedPointSolution {
            e: SeriesMap::from_json_repr(&j.e)?,
            ell: num(&j.ell)?.to_f64(),
            alpha: num(&j.alpha)?,
            tau: num(&j.tau)?,
            x0: num(&j.x0)?.to_f64(),
            residual: num(&j.residual)?.to_f64(),
            order_type: j.order_type,
            iterations: j.iterations,
            precision: j.precision,
        })
    }
}
