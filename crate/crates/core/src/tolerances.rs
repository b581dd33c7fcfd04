use serde::{Deserialize, Serialize};

/// Numerical tolerances used by the analytic path. Every report carries the
/// values that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute tail tolerance for truncated infinite sums.
    pub sum: f64,
    /// Hard cap on the number of terms of any truncated sum.
    pub term_cap: usize,
    /// Largest Bessel order accepted by [`crate::numerics::bessel_i_scaled`].
    pub bessel_order_cap: usize,
    /// Absolute tolerance of adaptive quadrature.
    pub quadrature: f64,
    /// Allowed probability-mass defect of a busy-period grid.
    pub mass: f64,
    /// Allowed mass lost by truncating the epoch distributions.
    pub truncation: f64,
    /// Initial truncation level of the epoch systems.
    pub truncation_start: usize,
    /// Largest truncation level tried before giving up.
    pub truncation_cap: usize,
    /// L1 stopping threshold of the fixed-point iteration.
    pub fixed_point: f64,
    pub fixed_point_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sum: 1e-12,
            term_cap: 100_000,
            bessel_order_cap: 512,
            quadrature: 1e-10,
            mass: 1e-6,
            truncation: 1e-9,
            truncation_start: 64,
            truncation_cap: 512,
            fixed_point: 1e-12,
            fixed_point_iterations: 100_000,
        }
    }
}
