//! Busy-period distributions of the M/M/1 queue.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bessel::bessel_i1_scaled;
use crate::numerics::transient::TransientQueue;
use crate::tolerances::Tolerances;

/// Markov bound on the busy-period mass beyond the grid end.
const GRID_TAIL: f64 = 1e-9;
/// Largest number of grid cells before giving up.
const MAX_CELLS: usize = 4_000_000;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Busy-period density `g(x) = √(μ/λ) e^{-(λ+μ)x} I_1(2√(λμ)x) / x`.
pub fn busy_density_at(q: &TransientQueue, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return q.mu;
    }
    let decay = (q.mu.sqrt() - q.lambda.sqrt()).powi(2);
    (q.mu / q.lambda).sqrt() * (-decay * x).exp() * bessel_i1_scaled(q.a() * x) / x
}

/// Grid request for [`busy_period_density`]; `None` selects the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lattice spacing; default `b / 200`.
    pub step: Option<f64>,
    /// Grid end; default grows by doubling until the tail bound holds.
    pub x_max: Option<f64>,
}

/// A distribution on the lattice `{0, h, 2h, …}` plus an explicit atom at 0.
///
/// `values[m] * step` is the probability mass placed at `m * step`; the atom
/// models the empty sum of busy periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub step: f64,
    pub values: Vec<f64>,
    pub atom_at_zero: f64,
}

impl GridDensity {
    pub fn mass(&self) -> f64 {
        self.atom_at_zero + self.step * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        let h = self.step;
        self.values
            .iter()
            .enumerate()
            .map(|(m, v)| m as f64 * h * v * h)
            .sum()
    }

    pub fn x_max(&self) -> f64 {
        self.step * self.values.len().saturating_sub(1) as f64
    }

    /// `E[f(X)]` under the lattice distribution.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let h = self.step;
        let lattice: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(m, v)| v * h * f(m as f64 * h))
            .sum();
        self.atom_at_zero * f(0.0) + lattice
    }

    fn lattice_masses(&self) -> Vec<f64> {
        let mut masses: Vec<f64> = self.values.iter().map(|v| v * self.step).collect();
        if masses.is_empty() {
            masses.push(0.0);
        }
        masses[0] += self.atom_at_zero;
        masses
    }
}

/// Spreads the mass of each cell onto its two end points so that both the
/// mass and the mean of the continuous density are kept. Extends `masses`
/// (which covers the first `masses.len() - 1` cells) to `cells` cells.
fn extend_lattice_masses(q: &TransientQueue, step: f64, masses: &mut Vec<f64>, cells: usize) {
    let done = masses.len().saturating_sub(1);
    masses.resize(cells + 1, 0.0);
    for m in done..cells {
        let left = m as f64 * step;
        for (node, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let u = 0.5 * (node + 1.0);
            let g = busy_density_at(q, left + u * step) * 0.5 * w * step;
            masses[m] += g * (1.0 - u);
            masses[m + 1] += g * u;
        }
    }
}

/// Busy-period density on a lattice grid.
pub fn busy_period_density(
    q: &TransientQueue,
    grid: GridSpec,
    tol: &Tolerances,
) -> Result<GridDensity> {
    let mean = q.mean_busy_period();
    let step = grid.step.unwrap_or(1.0 / (200.0 * q.mu));
    if !(step > 0.0) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let mut x_max = grid.x_max.unwrap_or(20.0 * mean);
    let mut masses = Vec::new();
    loop {
        let cells = (x_max / step).ceil() as usize;
        if cells > MAX_CELLS {
            return Err(Error::GridTooCoarse {
                mass_error: f64::NAN,
                mean_error: f64::NAN,
            });
        }
        extend_lattice_masses(q, step, &mut masses, cells);
        if grid.x_max.is_some() {
            break;
        }
        let grid_mean: f64 = masses
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * step * p)
            .sum();
        let end = cells as f64 * step;
        if (mean - grid_mean).max(0.0) / end < GRID_TAIL {
            break;
        }
        x_max *= 2.0;
    }
    let density = GridDensity {
        step,
        values: masses.iter().map(|p| p / step).collect(),
        atom_at_zero: 0.0,
    };
    let mass_error = (1.0 - density.mass()).abs();
    let mean_error = (density.mean() - mean).abs();
    if mass_error > tol.mass || mean_error > tol.mass * mean {
        return Err(Error::GridTooCoarse {
            mass_error,
            mean_error,
        });
    }
    Ok(density)
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// `n`-fold convolution of a grid density with itself.
///
/// `n = 0` gives the unit atom at zero. The lattice grows so no mass is cut.
pub fn convolve_busy(g: &GridDensity, n: usize) -> GridDensity {
    if n == 0 {
        return GridDensity {
            step: g.step,
            values: vec![0.0; g.values.len()],
            atom_at_zero: 1.0,
        };
    }
    let base = g.lattice_masses();
    let mut acc = base.clone();
    for _ in 1..n {
        acc = convolve(&acc, &base);
    }
    let atom = g.atom_at_zero.powi(n as i32);
    acc[0] -= atom;
    GridDensity {
        step: g.step,
        values: acc.into_iter().map(|p| p.max(0.0) / g.step).collect(),
        atom_at_zero: atom,
    }
}

/// Distribution of the number of Poisson(`other_rate`) arrivals during one
/// busy period of `q`, for counts `0..=n_max`.
///
/// The generating function `φ(z)` solves
/// `λφ² − (λ + μ + λ_o(1 − z))φ + μ = 0`; matching powers of `z` gives a
/// recursion with nonnegative terms only.
pub fn busy_arrival_counts(q: &TransientQueue, other_rate: f64, n_max: usize) -> Vec<f64> {
    let (lam, mu, lo) = (q.lambda, q.mu, other_rate);
    let s = lam + mu + lo;
    let disc = (s * s - 4.0 * lam * mu).sqrt();
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(2.0 * mu / (s + disc));
    for m in 1..=n_max {
        let conv: f64 = (1..m).map(|i| h[i] * h[m - i]).sum();
        h.push((lam * conv + lo * h[m - 1]) / disc);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_zero_is_service_rate() {
        let q = TransientQueue::new(0.5, 1.0).unwrap();
        assert_eq!(busy_density_at(&q, 0.0), 1.0);
        assert!(busy_density_at(&q, 1e-12) <= 1.0);
    }

    #[test]
    fn zero_fold_is_an_atom() {
        let q = TransientQueue::new(0.5, 1.0).unwrap();
        let g = busy_period_density(&q, GridSpec::default(), &Tolerances::default()).unwrap();
        let g0 = convolve_busy(&g, 0);
        assert_eq!(g0.atom_at_zero, 1.0);
        assert!(g0.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn arrival_counts_sum_to_one_and_match_mean() {
        let q = TransientQueue::new(0.5, 2.0).unwrap();
        let h = busy_arrival_counts(&q, 0.3, 200);
        let total: f64 = h.iter().sum();
        let mean: f64 = h.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!((mean - 0.3 * q.mean_busy_period()).abs() < 1e-12);
        let none = busy_arrival_counts(&q, 0.0, 3);
        assert!((none[0] - 1.0).abs() < 1e-15 && none[1] == 0.0);
    }
}
