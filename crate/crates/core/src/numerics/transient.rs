//! Transient probabilities of the M/M/1 queue.
//!
//! `P_{j,k}(x)`, the probability that an M/M/1 queue holding `j` messages at
//! time zero holds `k` at time `x`, has the Bessel series
//!
//! ```text
//! P_{j,k}(x) = e^{-(λ+μ)x} [ ρ^{(k-j)/2} I_{k-j}(ax) + ρ^{(k-j-1)/2} I_{k+j+1}(ax)
//!                            + (1-ρ) ρ^k Σ_{l ≥ k+j+2} ρ^{-l/2} I_l(ax) ]
//! ```
//!
//! with `a = 2μ√ρ`. Writing `e^{-(λ+μ)x} I_l(ax) = e^{-(√μ-√λ)² x} e^{-ax} I_l(ax)`
//! and working with logarithms keeps every factor in range.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bessel::log_scaled_bessel_sequence;
use crate::numerics::log_add;
use crate::numerics::quadrature::integrate_vec;
use crate::tolerances::Tolerances;

/// An M/M/1 queue used for transient computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientQueue {
    pub lambda: f64,
    pub mu: f64,
}

impl TransientQueue {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::invalid(
                "transient queue needs positive finite rates",
            ));
        }
        if lambda >= mu {
            return Err(Error::invalid("transient queue needs rho < 1"));
        }
        Ok(TransientQueue { lambda, mu })
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Bessel argument scale `a = 2μ√ρ = 2√(λμ)`.
    pub fn a(&self) -> f64 {
        2.0 * (self.lambda * self.mu).sqrt()
    }

    /// Mean busy period `b / (1 - ρ)`.
    pub fn mean_busy_period(&self) -> f64 {
        1.0 / (self.mu - self.lambda)
    }
}

/// All `P_{j,k}(x)` with `j, k <= max_index` at a fixed `x`.
///
/// Construction costs one Bessel sequence; each probability is then O(1).
#[derive(Debug, Clone)]
pub struct TransientKernel {
    max_index: usize,
    at_zero: bool,
    ln_rho: f64,
    ln_one_minus_rho: f64,
    decay: f64,
    log_bessel: Vec<f64>,
    /// `log_tail[s] = ln Σ_{l≥s} ρ^{-l/2} e^{-ax} I_l(ax)`
    log_tail: Vec<f64>,
}

impl TransientKernel {
    pub fn new(q: &TransientQueue, x: f64, max_index: usize, tol: &Tolerances) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::invalid("transient time must be finite and >= 0"));
        }
        let rho = q.rho();
        let ln_rho = rho.ln();
        let ln_one_minus_rho = (-rho).ln_1p();
        if x == 0.0 {
            return Ok(TransientKernel {
                max_index,
                at_zero: true,
                ln_rho,
                ln_one_minus_rho,
                decay: 0.0,
                log_bessel: Vec::new(),
                log_tail: Vec::new(),
            });
        }
        let decay = (q.mu.sqrt() - q.lambda.sqrt()).powi(2) * x;
        let y = q.a() * x;
        let first_tail = 2 * max_index + 2;
        let mut len = first_tail + (2.0 * q.mu * x).ceil() as usize + 100;
        let ln_tol = tol.sum.ln();
        loop {
            if len > tol.term_cap {
                return Err(Error::ToleranceNotReached {
                    what: "transient probability tail",
                    achieved: f64::NAN,
                });
            }
            let log_bessel = log_scaled_bessel_sequence(y, len + 1);
            let term = |l: usize| -0.5 * l as f64 * ln_rho + log_bessel[l];
            // terms decay geometrically once I_{l+1}/I_l < √ρ; the tail is then
            // bounded by t_len · q / (1 - q)
            let ratio = (log_bessel[len + 1] - log_bessel[len] - 0.5 * ln_rho).exp();
            let converged = ratio < 1.0 && {
                let bound = ln_one_minus_rho - decay + term(len) + (ratio / (1.0 - ratio)).ln();
                bound < ln_tol
            };
            if converged {
                let mut log_tail = vec![f64::NEG_INFINITY; len + 2];
                for l in (0..=len).rev() {
                    log_tail[l] = log_add(log_tail[l + 1], term(l));
                }
                return Ok(TransientKernel {
                    max_index,
                    at_zero: false,
                    ln_rho,
                    ln_one_minus_rho,
                    decay,
                    log_bessel,
                    log_tail,
                });
            }
            len *= 2;
        }
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    /// `P_{j,k}(x)`, clamped to `[0, 1]`.
    pub fn prob(&self, j: usize, k: usize) -> f64 {
        debug_assert!(j <= self.max_index && k <= self.max_index);
        if self.at_zero {
            return if j == k { 1.0 } else { 0.0 };
        }
        let diff = k as f64 - j as f64;
        let order = k.abs_diff(j);
        let t1 = 0.5 * diff * self.ln_rho + self.log_bessel[order] - self.decay;
        let t2 = 0.5 * (diff - 1.0) * self.ln_rho + self.log_bessel[k + j + 1] - self.decay;
        let t3 =
            self.ln_one_minus_rho + k as f64 * self.ln_rho + self.log_tail[k + j + 2] - self.decay;
        (t1.exp() + t2.exp() + t3.exp()).clamp(0.0, 1.0)
    }
}

/// `P_{j,k}(x)` for a single triple.
pub fn transient_prob(
    q: &TransientQueue,
    j: usize,
    k: usize,
    x: f64,
    tol: &Tolerances,
) -> Result<f64> {
    Ok(TransientKernel::new(q, x, j.max(k), tol)?.prob(j, k))
}

/// Smallest `K` with `(K+1)ρ^{K+1} + ρ^{K+2}/(1-ρ) < tol`.
///
/// From an empty start the queue length is stochastically below its
/// geometric stationary law, so this bounds `E[N; N > K]`.
pub(crate) fn geometric_cutoff(rho: f64, tol: f64, cap: usize) -> Result<usize> {
    let mut k = 0usize;
    loop {
        let bound =
            (k as f64 + 1.0) * rho.powi(k as i32 + 1) + rho.powi(k as i32 + 2) / (1.0 - rho);
        if bound < tol {
            return Ok(k);
        }
        k += 1;
        if k > cap {
            return Err(Error::ToleranceNotReached {
                what: "queue-length tail",
                achieved: bound,
            });
        }
    }
}

/// Mean queue length at time `t` of an M/M/1 queue started empty,
/// `q(t) = Σ_k k P_{0,k}(t)`.
pub fn expected_queue_from_empty(q: &TransientQueue, t: f64, tol: &Tolerances) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let cutoff = geometric_cutoff(q.rho(), tol.sum, tol.term_cap)?;
    let kernel = TransientKernel::new(q, t, cutoff, tol)?;
    Ok((1..=cutoff).map(|k| k as f64 * kernel.prob(0, k)).sum())
}

/// `(∫_0^T P_{k0,0}(x) dx, ∫_0^T x P_{k0,0}(x) dx)`.
pub fn empty_dwell_integrals(
    q: &TransientQueue,
    k0: usize,
    horizon: f64,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    let (m0, m1) = dwell_integrals_upto(q, k0, horizon, tol)?;
    Ok((m0[k0], m1[k0]))
}

/// Dwell integrals for every initial queue length `0..=k_max` at once.
pub(crate) fn dwell_integrals_upto(
    q: &TransientQueue,
    k_max: usize,
    horizon: f64,
    tol: &Tolerances,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("dwell horizon must be finite and >= 0"));
    }
    let dim = k_max + 1;
    let mut failure = None;
    let values = integrate_vec(
        |x, out: &mut [f64]| match TransientKernel::new(q, x, k_max, tol) {
            Ok(kernel) => {
                for k in 0..dim {
                    let p = kernel.prob(k, 0);
                    out[k] = p;
                    out[dim + k] = x * p;
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
                out.iter_mut().for_each(|o| *o = 0.0);
            }
        },
        2 * dim,
        0.0,
        horizon,
        tol.quadrature,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (m0, m1) = values.split_at(dim);
    Ok((m0.to_vec(), m1.to_vec()))
}
