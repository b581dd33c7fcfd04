//! Adaptive Gauss-Kronrod (7, 15) quadrature.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> (Vec<f64>, f64)
where
    F: FnMut(f64, &mut [f64]),
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(centre, buf);
    for d in 0..dim {
        kronrod[d] = WGK[7] * buf[d];
        gauss[d] = WG[3] * buf[d];
    }
    for (i, &node) in XGK.iter().enumerate().take(7) {
        for sign in [-1.0, 1.0] {
            f(centre + sign * half * node, buf);
            for d in 0..dim {
                kronrod[d] += WGK[i] * buf[d];
                // odd Kronrod nodes are the Gauss nodes
                if i % 2 == 1 {
                    gauss[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        kronrod[d] *= half;
        gauss[d] *= half;
        err = err.max((kronrod[d] - gauss[d]).abs());
    }
    (kronrod, err)
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// `f(x, out)` writes the `dim` integrand components at `x`. The interval with
/// the largest error is bisected until the summed error estimate (max over
/// components) drops below `abs_tol`.
pub fn integrate_vec<F>(mut f: F, dim: usize, a: f64, b: f64, abs_tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    if b <= a {
        return Ok(vec![0.0; dim]);
    }
    let mut buf = vec![0.0; dim];
    let (value, error) = gk15(&mut f, a, b, dim, &mut buf);
    let mut segments = vec![Segment { a, b, value, error }];
    loop {
        let total: f64 = segments.iter().map(|s| s.error).sum();
        if total <= abs_tol {
            break;
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::ToleranceNotReached {
                what: "adaptive quadrature",
                achieved: total,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::ToleranceNotReached {
                what: "adaptive quadrature",
                achieved: total,
            });
        }
        let (lv, le) = gk15(&mut f, seg.a, mid, dim, &mut buf);
        let (rv, re) = gk15(&mut f, mid, seg.b, dim, &mut buf);
        segments.push(Segment {
            a: seg.a,
            b: mid,
            value: lv,
            error: le,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            value: rv,
            error: re,
        });
    }
    // sum in interval order so results do not depend on refinement history
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = vec![0.0; dim];
    for s in &segments {
        for (o, v) in out.iter_mut().zip(&s.value) {
            *o += v;
        }
    }
    Ok(out)
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x, out: &mut [f64]| out[0] = f(x), 1, a, b, abs_tol).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() < 1e-8, "{v} {exact}");
    }

    #[test]
    fn vector_components() {
        let v = integrate_vec(
            |x, out: &mut [f64]| {
                out[0] = (-x).exp();
                out[1] = x * (-x).exp();
            },
            2,
            0.0,
            2.0,
            1e-12,
        )
        .unwrap();
        assert!((v[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
        assert!((v[1] - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-10).unwrap(), 0.0);
    }
}
