//! Invariant checks on a stored fixed-point solution.

use num_complex::Complex64;
use serde::Serialize;

use crate::combinatorics::{critical_orbit_type, order_type_of};
use crate::limit::{abel_grid, abel_residual, abel_residual_shared, multiplier_check, presentation_intervals};
use crate::renorm::{residual_sup, FixedPointSolution};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug)]
pub struct Bounds {
    pub residual: f64,
    pub abel: f64,
    pub multiplier: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { residual: 1e-10, abel: 1e-9, multiplier: 1e-6 }
    }
}

fn check(name: &'static str, r: crate::Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

/// Run every invariant that can be evaluated from the solution alone.
pub fn verify_solution(sol: &FixedPointSolution, b: &Bounds) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(check("json_round_trip", {
        let text = sol.to_json();
        FixedPointSolution::from_json(&text).map(|back| (back == *sol && back.to_json() == text, String::new()))
    }));
    out.push(check("normalization", {
        let d = (sol.e.eval_unchecked(0.0) - 1.0).abs();
        Ok((d <= 1e-12, format!("|E(0) - 1| = {d:.3e}")))
    }));
    out.push(check("unimodal", sol.map().check_decreasing().map(|_| (true, "E decreasing on [0, 1]".into()))));
    out.push(check("tau_identity", {
        let t = sol.tau_f64();
        let d = (t - sol.alpha_f64().abs().powf(sol.ell)).abs() / t;
        Ok((d <= 1e-12, format!("|tau - |alpha|^ell| / tau = {d:.3e}")))
    }));
    out.push(check(
        "order_type",
        critical_orbit_type(&sol.map(), sol.p()).map(|t| (t == sol.order_type, format!("critical orbit {t}, stored {}", sol.order_type))),
    ));
    out.push(check("order_type_affine", {
        let orbit = sol.map().orbit(sol.x0, sol.p());
        let moved: Vec<f64> = orbit.iter().map(|x| 3.0 * x - 1.0).collect();
        let negated: Vec<f64> = orbit.iter().map(|x| -x).collect();
        (|| {
            let t = order_type_of(&orbit)?;
            Ok((order_type_of(&moved)? == t && order_type_of(&negated)? == t, format!("{t}")))
        })()
    }));
    let rsup = residual_sup(sol, 64);
    out.push(check("residual_sup", rsup.clone().map(|r| (r <= b.residual, format!("{r:.3e} <= {:.0e}", b.residual)))));
    out.push(check("multiplier", {
        multiplier_check(sol).map(|(m, p)| ((m - p).abs() <= b.multiplier, format!("|G'(x0)| = {m:.12}, tau^(-1/ell) = {p:.12}")))
    }));
    out.push(check("abel_real", {
        abel_residual(sol, &abel_grid(sol, 64, Complex64::new(0.0, 0.0))).map(|a| (a <= b.abel, format!("{a:.3e} <= {:.0e}", b.abel)))
    }));
    out.push(check("abel_vs_residual", {
        rsup.and_then(|r| {
            let a = abel_residual_shared(sol, 64, 0.1)?;
            Ok((a <= 10.0 * r + 1e-14, format!("{a:.3e} <= 10 x {r:.3e}")))
        })
    }));
    out.push(check("presentation_intervals", {
        presentation_intervals(sol).map(|pi| (true, format!("R' = {:.6}, b0 = {:.6}", pi.r_prime, pi.b0)))
    }));
    out
}
