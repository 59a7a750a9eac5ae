//! Shared fixtures for the benchmarks.

use renorm_core::renorm::solve_fixed_point;
use renorm_core::{FixedPointSolution, OrderType};

/// Period-doubling fixed point at ℓ = 2, degree 40.
pub fn pd_solution() -> FixedPointSolution {
    solve_fixed_point(2.0, &OrderType::pd(), 40, 1e-11, None).expect("pd fixed point at ell = 2")
}
