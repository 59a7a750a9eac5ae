//! A1..A9 end to end. Prints one line per criterion; exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renorm_core::combinatorics::{critical_orbit_type, order_type_of, superstable_parameters};
use renorm_core::complexdyn::*;
use renorm_core::limit::*;
use renorm_core::renorm::{residual_sup, solve_fixed_point, sweep, SweepTable, DEFAULT_FIT_WINDOW};
use renorm_core::{FixedPointSolution, OrderType};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let d = t.elapsed();
    ensure(d < limit, format!("took {d:.1?}, limit {limit:?}"))?;
    Ok(d)
}

fn a1() -> Outcome {
    let t = Instant::now();
    let oracle = common::period_doubling_oracle(10);
    let sol = solve_fixed_point(2.0, &OrderType::pd(), 40, 1e-11, None).map_err(|e| e.to_string())?;
    let d = within(t, Duration::from_secs(10))?;
    let a = sol.alpha_f64().abs();
    ensure((a - oracle.alpha).abs() <= 1e-6, format!("|alpha| = {a}, oracle {}", oracle.alpha))?;
    let tau = sol.tau_f64();
    let id = (tau - sol.alpha_f64().powi(2)).abs() / tau;
    ensure(id <= 1e-12, format!("|tau - alpha^2| / tau = {id:e}"))?;
    Ok(format!("|alpha| = {a:.10} (oracle {:.10}), tau = {tau:.10}, {d:.2?}", oracle.alpha))
}

struct PdSweep {
    table: SweepTable,
    elapsed: Duration,
}

const SWEEP_ELLS: [f64; 8] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

fn pd_sweep() -> Result<PdSweep, String> {
    let t = Instant::now();
    let table = sweep(&OrderType::pd(), &SWEEP_ELLS, 96, 1e-13).map_err(|e| e.to_string())?;
    Ok(PdSweep { table, elapsed: t.elapsed() })
}

fn a2(s: &PdSweep) -> Outcome {
    ensure(s.elapsed < Duration::from_secs(180), format!("sweep took {:.1?}", s.elapsed))?;
    let upto128: Vec<FixedPointSolution> = s.table.solutions.iter().filter(|x| x.ell <= 128.0).cloned().collect();
    let t = SweepTable::from_solutions(&OrderType::pd(), upto128, DEFAULT_FIT_WINDOW);
    let taus: Vec<f64> = t.rows.iter().map(|r| r.tau).collect();
    ensure(taus.len() == 7 && taus.windows(2).all(|w| w[1] > w[0]), format!("tau not increasing: {taus:?}"))?;
    let ti = t.extrapolated_tau_inf;
    ensure((25.0..=35.0).contains(&ti), format!("tau_inf = {ti}"))?;
    Ok(format!("tau_128 = {:.4}, tau_inf = {ti:.4}, sweep {:.1?}", taus[6], s.elapsed))
}

fn a3(s: &PdSweep) -> Outcome {
    let mut worst = 0.0f64;
    for sol in &s.table.solutions {
        let (m, p) = multiplier_check(sol).map_err(|e| format!("ell {}: {e}", sol.ell))?;
        worst = worst.max((m - p).abs());
    }
    ensure(worst <= 1e-6, format!("max |measured - predicted| = {worst:e}"))?;
    Ok(format!("max |G'(x0)| - tau^(-1/ell) = {worst:.2e}"))
}

fn a4(s: &PdSweep) -> Outcome {
    let (mut rmax, mut amax) = (0.0f64, 0.0f64);
    for sol in &s.table.solutions {
        let r = residual_sup(sol, 64).map_err(|e| e.to_string())?;
        let a = abel_residual(sol, &abel_grid(sol, 64, Complex64::new(0.0, 0.0))).map_err(|e| e.to_string())?;
        ensure(r <= 1e-10 && a <= 1e-9, format!("ell {}: residual {r:e}, abel {a:e}", sol.ell))?;
        rmax = rmax.max(r);
        amax = amax.max(a);
    }
    Ok(format!("max residual_sup = {rmax:.2e}, max abel = {amax:.2e}"))
}

fn a5(s: &PdSweep) -> Outcome {
    let (est, _) = extrapolate_limit_default(&s.table).map_err(|e| e.to_string())?;
    ensure(est.c0 < 0.0, format!("C0 = {}", est.c0))?;
    ensure(est.epsilon > 0.0, format!("epsilon = {}", est.epsilon))?;
    let x0: Vec<f64> = s.table.solutions.iter().map(|x| x.x0).collect();
    let inc: Vec<f64> = x0.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    ensure(inc.windows(2).all(|w| w[1] < w[0]), format!("x0 increments not decreasing: {inc:?}"))?;
    Ok(format!("C0 = {:.3e}, epsilon = {:.4}, x0 -> {:.6}", est.c0, est.epsilon, est.x0))
}

fn a6() -> Outcome {
    let mut parts = Vec::new();
    for t in ["pd", "[2,3,1]"] {
        let sol = solve_fixed_point(2.0, &t.parse().unwrap(), 40, 1e-11, None).map_err(|e| e.to_string())?;
        let pi = presentation_intervals(&sol).map_err(|e| format!("{t}: {e}"))?;
        pi.check(1e-9).map_err(|e| format!("{t}: {e}"))?;
        ensure(pi.jcal.len() == sol.p(), format!("{t}: {} intervals", pi.jcal.len()))?;
        parts.push(format!("p={} R'={:.5}", sol.p(), pi.r_prime));
    }
    Ok(parts.join(", "))
}

fn a7() -> Outcome {
    let t = Instant::now();
    let m = FlatExpMap::default();
    let fp = find_fixed_points(&m).map_err(|e| e.to_string())?;
    ensure(fp.b_f < fp.z0 && fp.z0 < 1.0, format!("{fp:?}"))?;
    ensure(fp.mult_b > 1.0 && 1.0 > fp.mult_z0, format!("{fp:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 1000 {
        let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() < 0.05 {
            continue;
        }
        let k = rng.random_range(-4i64..=4);
        let w = preimages_of_point(&m, v, &[k]).map_err(|e| e.to_string())?[rng.random_range(0..2)];
        let back = m.eval(w, false).map_err(|e| e.to_string())?;
        worst = worst.max((back - v).norm());
        n += 1;
    }
    ensure(worst <= 1e-12, format!("max |f(w) - v| = {worst:e}"))?;
    let opts = DensityOptions::default_for(&m);
    let med: Vec<f64> = (1..=3)
        .map(|d| preimage_density_probe(&m, d, 500, &opts).map(|s| s.median))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(med.windows(2).all(|w| w[1] < w[0]), format!("medians {med:?}"))?;
    let d = within(t, Duration::from_secs(30))?;
    Ok(format!(
        "b_f = {:.5} (x{:.3}), z0 = {:.5} (x{:.3}), preimage err {worst:.1e}, medians {:.3e} {:.3e} {:.3e}, {d:.1?}",
        fp.b_f, fp.mult_b, fp.z0, fp.mult_z0, med[0], med[1], med[2]
    ))
}

fn a8() -> Outcome {
    let cl = Classifier::new(FlatExpMap::default(), 1, 4).map_err(|e| e.to_string())?;
    let vp = Viewport::default_for(&cl.map);
    let (w, h) = (500, 400);
    let full = render_julia(&cl, vp, w, h, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    for j in 0..h {
        for i in 0..w {
            ensure(full.at(i, j) == full.at(i, h - 1 - j), format!("asymmetric at ({i}, {j})"))?;
        }
    }
    let mut prev: Option<JuliaRaster> = None;
    for b in [1, 2, 4, 16, DEFAULT_BUDGET] {
        let r = if b == DEFAULT_BUDGET { full.clone() } else { render_julia(&cl, vp, w, h, b).map_err(|e| e.to_string())? };
        if let Some(p) = &prev {
            let flips = p.cells.iter().zip(&r.cells).filter(|(a, c)| **a != Tag::Unknown && a != c).count();
            ensure(flips == 0, format!("{flips} decided pixels changed going to budget {b}"))?;
        }
        prev = Some(r);
    }
    let u = full.unknown_fraction();
    ensure(u <= 0.05, format!("unknown fraction {u}"))?;
    Ok(format!("{w}x{h}, unknown fraction {u:.4}"))
}

fn a9(s: &PdSweep) -> Outcome {
    let mut sols: Vec<FixedPointSolution> = s.table.solutions.clone();
    let mut types: Vec<OrderType> = Vec::new();
    for p in [3, 4] {
        types.extend(superstable_parameters(p).map_err(|e| e.to_string())?.into_iter().map(|s| s.order_type));
    }
    for t in &types {
        sols.push(solve_fixed_point(2.0, t, 40, 1e-11, None).map_err(|e| format!("{t}: {e}"))?);
    }
    for sol in &sols {
        let got = critical_orbit_type(&sol.map(), sol.p()).map_err(|e| e.to_string())?;
        ensure(got == sol.order_type, format!("ell {} {}: orbit has type {got}", sol.ell, sol.order_type))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let orbit = sols.last().unwrap().map().orbit(sols.last().unwrap().x0, 4);
    let base = order_type_of(&orbit).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let moved: Vec<f64> = orbit.iter().map(|x| a * x + b).collect();
        ensure(order_type_of(&moved).map_err(|e| e.to_string())? == base, format!("affine ({a}, {b}) changed the type"))?;
    }
    let neg: Vec<f64> = orbit.iter().map(|x| -x).collect();
    ensure(order_type_of(&neg).map_err(|e| e.to_string())? == base, "negation changed the type".into())?;
    Ok(format!("{} solutions, 100 affine maps, negation", sols.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, r: Outcome| {
        match &r {
            Ok(d) => println!("{name} PASS {d}"),
            Err(d) => {
                failed += 1;
                println!("{name} FAIL {d}");
            }
        }
    };
    report("A1", a1());
    match pd_sweep() {
        Ok(s) => {
            report("A2", a2(&s));
            report("A3", a3(&s));
            report("A4", a4(&s));
            report("A5", a5(&s));
            report("A6", a6());
            report("A7", a7());
            report("A8", a8());
            report("A9", a9(&s));
        }
        Err(e) => {
            for n in ["A2", "A3", "A4", "A5", "A9"] {
                report(n, Err(format!("sweep failed: {e}")));
            }
            report("A6", a6());
            report("A7", a7());
            report("A8", a8());
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
