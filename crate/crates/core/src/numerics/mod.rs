//! Special functions and transient-queue primitives.
//!
//! Everything here is a pure function of its arguments. Quantities that
//! combine exponentially large and small factors (Bessel functions against
//! `e^{-(λ+μ)x}`, Poisson weights at large means) are carried in log form.

mod bessel;
mod busy;
mod poisson;
mod quadrature;
mod transient;

pub use bessel::{bessel_i1_scaled, bessel_i_scaled, log_scaled_bessel_sequence};
pub use busy::{
    busy_arrival_counts, busy_density_at, busy_period_density, convolve_busy, GridDensity, GridSpec,
};
pub use poisson::{
    cond_switchover_given_arrivals, joint_switchover_arrivals, log_poisson_pmf, poisson_pmf,
    poisson_pmf_vec, poisson_transform, poisson_transform_vec,
};
pub use quadrature::{integrate, integrate_vec};
pub use transient::{
    empty_dwell_integrals, expected_queue_from_empty, transient_prob, TransientKernel,
    TransientQueue,
};

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    #[allow(unused_imports)] // inherent when std is linked into the build
    use num_traits::Float;
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(n!)`.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

pub(crate) use transient::dwell_integrals_upto;
