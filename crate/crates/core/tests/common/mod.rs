//! Independent oracles for the tests: nothing here calls the solver.
#![allow(dead_code)]

/// g_λ^n(0) and its λ-derivative for g_λ(y) = 1 - λy².
fn orbit_and_slope(lambda: f64, n: usize) -> (f64, f64) {
    let (mut y, mut dy) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let ny = 1.0 - lambda * y * y;
        dy = -y * y - 2.0 * lambda * y * dy;
        y = ny;
    }
    (y, dy)
}

pub fn g_iter(lambda: f64, n: usize) -> f64 {
    orbit_and_slope(lambda, n).0
}

fn newton(mut lambda: f64, n: usize) -> f64 {
    for _ in 0..100 {
        let (f, df) = orbit_and_slope(lambda, n);
        let step = f / df;
        lambda -= step;
        if step.abs() < 1e-16 * lambda {
            break;
        }
    }
    lambda
}

pub struct PeriodDoublingOracle {
    /// Superstable parameters of periods 2, 4, ..., 2^k.
    pub lambdas: Vec<f64>,
    /// |g^{2^{n-1}}(0)| at the period-2^n parameter.
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Aitken-accelerated limit of the ratios.
    pub alpha: f64,
}

/// Superstable parameters of x ↦ 1 - λx² along the period-doubling cascade and
/// the scaling of the critical orbit's closest return.
pub fn period_doubling_oracle(k: usize) -> PeriodDoublingOracle {
    let mut lambdas = vec![1.0, newton(1.31, 4)];
    while lambdas.len() < k {
        let n = lambdas.len();
        let guess = lambdas[n - 1] + (lambdas[n - 1] - lambdas[n - 2]) / 4.669;
        lambdas.push(newton(guess, 1 << (n + 1)));
    }
    let distances: Vec<f64> = lambdas.iter().enumerate().map(|(i, &l)| g_iter(l, 1 << i).abs()).collect();
    let ratios: Vec<f64> = distances.windows(2).map(|w| w[0] / w[1]).collect();
    let aitken: Vec<f64> = ratios
        .windows(3)
        .map(|r| r[2] - (r[2] - r[1]).powi(2) / (r[2] - 2.0 * r[1] + r[0]))
        .collect();
    let alpha = *aitken.last().unwrap();
    PeriodDoublingOracle { lambdas, distances, ratios, alpha }
}
