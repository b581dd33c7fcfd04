use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;

/// Below this argument the power series is used directly.
const SERIES_LIMIT: f64 = 1e-2;

/// `e^{-x} I_k(x)` for `x >= 0`, with `I_{-k} = I_k`.
///
/// `|k|` must not exceed `order_cap`.
pub fn bessel_i_scaled(k: i64, x: f64, order_cap: usize) -> Result<f64> {
    let order = k.unsigned_abs() as usize;
    if order > order_cap {
        return Err(Error::invalid("Bessel order exceeds the configured cap"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid("Bessel argument must be finite and >= 0"));
    }
    let logs = log_scaled_bessel_sequence(x, order);
    Ok(logs[order].exp())
}

/// Above this argument [`bessel_i1_scaled`] uses the asymptotic expansion.
const I1_ASYMPTOTIC: f64 = 40.0;

/// `e^{-y} I_1(y)` for `y >= 0`, to about 1e-15 relative.
///
/// Power series up to `y = 40`, Hankel's asymptotic expansion beyond.
pub fn bessel_i1_scaled(y: f64) -> f64 {
    if y <= I1_ASYMPTOTIC {
        let q = 0.25 * y * y;
        let mut term = 0.5 * y * (-y).exp();
        let mut sum = term;
        let mut m = 0.0;
        while term > 1e-17 * sum {
            m += 1.0;
            term *= q / (m * (m + 1.0));
            sum += term;
        }
        return sum;
    }
    let mut a = 1.0f64;
    let mut sum = 1.0;
    let mut k = 0.0;
    while a.abs() > 1e-17 {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        a *= -(4.0 - odd * odd) / (8.0 * k * y);
        sum += a;
    }
    sum / (2.0 * core::f64::consts::PI * y).sqrt()
}

/// `ln(e^{-y} I_l(y))` for `l = 0..=max_order`.
///
/// Uses Miller's backward recurrence on the ratios `I_l / I_{l-1}`, normalised
/// through `e^{-y} (I_0 + 2 Σ_{l≥1} I_l) = 1`. Working with ratios and logs
/// keeps every order representable, including those far below `f64::MIN`.
pub fn log_scaled_bessel_sequence(y: f64, max_order: usize) -> Vec<f64> {
    if y == 0.0 {
        let mut out = vec![f64::NEG_INFINITY; max_order + 1];
        out[0] = 0.0;
        return out;
    }
    if y < SERIES_LIMIT {
        return (0..=max_order).map(|l| log_series(l, y)).collect();
    }

    let start = max_order.max(y.ceil() as usize) + 60 + (4.0 * y.sqrt()).ceil() as usize;
    // ratio[l] = I_l / I_{l-1}, l = 1..=start
    let mut ratio = vec![0.0; start + 2];
    let mut next = 0.0;
    for l in (1..=start).rev() {
        let r = 1.0 / (2.0 * l as f64 / y + next);
        ratio[l] = r;
        next = r;
    }
    // normaliser S = 1 + 2 Σ_l Π_{m≤l} ratio[m]
    let mut prod = 1.0;
    let mut norm = 1.0;
    for r in ratio.iter().take(start + 1).skip(1) {
        prod *= r;
        if prod == 0.0 {
            break;
        }
        norm += 2.0 * prod;
    }
    let mut out = Vec::with_capacity(max_order + 1);
    let mut log_val = -norm.ln();
    out.push(log_val);
    for r in ratio.iter().take(max_order + 1).skip(1) {
        log_val += r.ln();
        out.push(log_val);
    }
    out
}

/// Power series for small `y`: `I_l(y) = Σ_m (y/2)^{l+2m} / ((l+m)! m!)`.
fn log_series(l: usize, y: f64) -> f64 {
    let q = 0.25 * y * y;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..64 {
        term *= q / ((l + m) as f64 * m as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    -y + l as f64 * (0.5 * y).ln() - ln_factorial(l) + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_i_scaled(0, 0.0, 512).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(3, 0.0, 512).unwrap(), 0.0);
    }

    #[test]
    fn negative_order_is_symmetric() {
        for &x in &[0.001, 0.5, 3.0, 40.0] {
            assert_eq!(
                bessel_i_scaled(-3, x, 512).unwrap(),
                bessel_i_scaled(3, x, 512).unwrap()
            );
        }
    }

    #[test]
    fn order_one_at_two() {
        let v = bessel_i_scaled(1, 2.0, 512).unwrap();
        assert!((v - 0.215_269_289_248_937_8).abs() < 1e-14, "{v}");
    }

    #[test]
    fn order_cap_enforced() {
        assert!(bessel_i_scaled(600, 1.0, 512).is_err());
        assert!(bessel_i_scaled(1, -1.0, 512).is_err());
    }

    #[test]
    fn series_and_recurrence_agree_at_the_switch() {
        let below = log_scaled_bessel_sequence(SERIES_LIMIT * 0.999_999, 20);
        let above = log_scaled_bessel_sequence(SERIES_LIMIT * 1.000_001, 20);
        for (a, b) in below.iter().zip(&above) {
            assert!((a - b).abs() < 1e-4, "{a} {b}");
        }
    }

    #[test]
    fn huge_argument_stays_finite() {
        let logs = log_scaled_bessel_sequence(5000.0, 2000);
        assert!(logs.iter().all(|v| v.is_finite()));
        // large-argument asymptote e^{-y} I_0(y) ≈ 1/sqrt(2πy)
        let approx = -(2.0 * core::f64::consts::PI * 5000.0).sqrt().ln();
        assert!((logs[0] - approx).abs() < 1e-4);
    }
}
