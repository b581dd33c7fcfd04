//! Poisson probabilities and their mixtures over switchover distributions.
//!
//! `poisson_transform(F, λ, j, false) = ∫ e^{-λx} (λx)^j / j! dF(x)` is the
//! probability of `j` Poisson arrivals during a switchover drawn from `F`; the
//! weighted variant inserts a factor `x`. Every family has a closed form.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::SwitchoverSpec;
use crate::numerics::{ln_factorial, log_add};

/// Conditioning events below this probability are rejected.
const DEGENERATE: f64 = 1e-300;

/// `ln P(Poisson(mean) = n)`.
pub fn log_poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * mean.ln() - mean - ln_factorial(n)
}

pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    log_poisson_pmf(mean, n).exp()
}

/// `P(Poisson(mean) = n)` for `n = 0..=n_max`.
pub fn poisson_pmf_vec(mean: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| poisson_pmf(mean, n)).collect()
}

/// Logarithm of the (optionally `x`-weighted) Poisson transform.
pub(crate) fn log_poisson_transform(
    f: &SwitchoverSpec,
    lambda: f64,
    j: usize,
    weighted: bool,
) -> f64 {
    let jf = j as f64;
    let ln_or_zero = |v: f64| if j == 0 { 0.0 } else { jf * v.ln() };
    match f {
        SwitchoverSpec::Deterministic { value } => log_point(*value, lambda, j, weighted),
        SwitchoverSpec::Exponential { rate } => {
            let s = (lambda + rate).ln();
            if weighted {
                rate.ln() + ln_or_zero(lambda) + (jf + 1.0).ln() - (jf + 2.0) * s
            } else {
                rate.ln() + ln_or_zero(lambda) - (jf + 1.0) * s
            }
        }
        SwitchoverSpec::Gamma { shape, rate } => {
            let w = if weighted { 1.0 } else { 0.0 };
            shape * rate.ln() + ln_or_zero(lambda) + libm::lgamma(shape + jf + w)
                - libm::lgamma(*shape)
                - ln_factorial(j)
                - (shape + jf + w) * (lambda + rate).ln()
        }
        SwitchoverSpec::Mixture { points } => points
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|&(v, w)| w.ln() + log_point(v, lambda, j, weighted))
            .fold(f64::NEG_INFINITY, log_add),
    }
}

fn log_point(value: f64, lambda: f64, j: usize, weighted: bool) -> f64 {
    let base = log_poisson_pmf(lambda * value, j);
    if weighted {
        base + value.ln()
    } else {
        base
    }
}

/// `∫ e^{-λx} (λx)^j / j! dF(x)`, or `∫ x e^{-λx} (λx)^j / j! dF(x)` when
/// `weighted`.
pub fn poisson_transform(f: &SwitchoverSpec, lambda: f64, j: usize, weighted: bool) -> f64 {
    log_poisson_transform(f, lambda, j, weighted).exp()
}

/// [`poisson_transform`] for `j = 0..=j_max`.
pub fn poisson_transform_vec(
    f: &SwitchoverSpec,
    lambda: f64,
    j_max: usize,
    weighted: bool,
) -> Vec<f64> {
    (0..=j_max)
        .map(|j| poisson_transform(f, lambda, j, weighted))
        .collect()
}

/// `E[R | j arrivals at rate λ during R]` for `R ~ F`.
pub fn cond_switchover_given_arrivals(f: &SwitchoverSpec, lambda: f64, j: usize) -> Result<f64> {
    let log_p = log_poisson_transform(f, lambda, j, false);
    if !(log_p >= DEGENERATE.ln()) {
        return Err(Error::DegenerateCondition {
            log_probability: log_p,
        });
    }
    Ok((log_poisson_transform(f, lambda, j, true) - log_p).exp())
}

/// Joint law of the arrival counts at two stations during one switchover:
/// entry `[m][j]` is `P(m arrivals at rate λa and j at rate λb)` for
/// `m + j <= total_max`.
pub fn joint_switchover_arrivals(
    f: &SwitchoverSpec,
    lambda_a: f64,
    lambda_b: f64,
    total_max: usize,
) -> Vec<Vec<f64>> {
    let total_rate = lambda_a + lambda_b;
    let (ln_pa, ln_pb) = ((lambda_a / total_rate).ln(), (lambda_b / total_rate).ln());
    (0..=total_max)
        .map(|m| {
            (0..=total_max - m)
                .map(|j| {
                    let n = m + j;
                    let ln_binom = ln_factorial(n) - ln_factorial(m) - ln_factorial(j);
                    let split = ln_binom
                        + if m == 0 { 0.0 } else { m as f64 * ln_pa }
                        + if j == 0 { 0.0 } else { j as f64 * ln_pb };
                    (log_poisson_transform(f, total_rate, n, false) + split).exp()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn point_mass_is_poisson() {
        let f = SwitchoverSpec::Deterministic { value: 1.5 };
        for j in 0..6 {
            let want = poisson_pmf(0.9, j);
            assert!((poisson_transform(&f, 0.6, j, false) - want).abs() < 1e-15);
            assert!((cond_switchover_given_arrivals(&f, 0.6, j).unwrap() - 1.5).abs() < 1e-13);
        }
    }

    #[test]
    fn exponential_closed_form() {
        let f = SwitchoverSpec::Exponential { rate: 1.0 };
        let p0 = poisson_transform(&f, 1.0, 0, false);
        assert!((p0 - 0.5).abs() < 1e-15);
        let r = cond_switchover_given_arrivals(&f, 1.0, 0).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_length_switchover() {
        let f = SwitchoverSpec::Deterministic { value: 0.0 };
        assert_eq!(poisson_transform(&f, 2.0, 0, false), 1.0);
        assert_eq!(poisson_transform(&f, 2.0, 1, false), 0.0);
        assert_eq!(poisson_transform(&f, 2.0, 0, true), 0.0);
        assert!(matches!(
            cond_switchover_given_arrivals(&f, 2.0, 3),
            Err(Error::DegenerateCondition { .. })
        ));
    }

    #[test]
    fn joint_marginal_matches_single_rate() {
        let f = SwitchoverSpec::Mixture {
            points: vec![(0.0, 0.5), (2.0, 0.5)],
        };
        let joint = joint_switchover_arrivals(&f, 0.7, 0.4, 60);
        for (m, row) in joint.iter().enumerate().take(10) {
            let marginal: f64 = row.iter().sum();
            assert!((marginal - poisson_transform(&f, 0.7, m, false)).abs() < 1e-12);
        }
    }
}
