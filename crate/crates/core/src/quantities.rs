//! Per-station waiting quantities.
//!
//! For every station the delay formulas need `f_i` (server waiting time per
//! cycle), `w_i` (time since the server arrived, seen from a uniform instant
//! of waiting) and `r~_i` (mean of the switchover out of `i`, seen from a
//! uniform instant of waiting at the next station).

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Strategy, ValidatedModel};
use crate::numerics::dwell_integrals_upto;
use crate::numerics::{
    cond_switchover_given_arrivals, empty_dwell_integrals, expected_queue_from_empty,
    poisson_transform, TransientQueue,
};
use crate::steady_state::{epoch_distributions_with, EpochDistributions, Epochs};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationQuantities {
    /// Expected waiting (idle, not switching) time per cycle.
    pub f: f64,
    /// Expected time since the server arrived, at a uniform waiting instant.
    pub w: f64,
    /// Conditional mean of the switchover out of this station.
    pub r_tilde: f64,
    /// Expected sojourn time per cycle.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySet {
    pub strategy: Strategy,
    pub stations: Vec<StationQuantities>,
    pub f0: f64,
    pub c0: f64,
    pub mean_cycle: f64,
    /// Probability of finding each station empty on arrival (two-station
    /// strategies II and IV only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub empty_on_arrival: Option<Vec<f64>>,
    /// Truncation level of the epoch systems, when they were solved.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truncation: Option<usize>,
}

impl QuantitySet {
    pub fn f(&self, i: usize) -> f64 {
        self.stations[i].f
    }

    pub fn w(&self, i: usize) -> f64 {
        self.stations[i].w
    }

    pub fn r_tilde(&self, i: usize) -> f64 {
        self.stations[i].r_tilde
    }

    pub fn c(&self, i: usize) -> f64 {
        self.stations[i].c
    }

    fn assemble(
        model: &ValidatedModel,
        strategy: Strategy,
        stations: Vec<StationQuantities>,
        epochs: Option<&EpochDistributions>,
    ) -> Self {
        let f0 = stations.iter().map(|s| s.f).sum();
        let c0 = stations.iter().map(|s| s.c).sum();
        QuantitySet {
            strategy,
            stations,
            f0,
            c0,
            mean_cycle: cycle_time(model, f0),
            empty_on_arrival: epochs.map(|e| e.arrival.iter().map(|p| p.probs[0]).collect()),
            truncation: epochs.map(|e| e.truncation),
        }
    }
}

/// `E C = (r0 + f0) / (1 - ρ0)`.
pub fn mean_cycle_time(s: &QuantitySet, model: &ValidatedModel) -> f64 {
    cycle_time(model, s.f0)
}

fn cycle_time(model: &ValidatedModel, f0: f64) -> f64 {
    (model.r0() + f0) / (1.0 - model.rho0())
}

/// Quantities for the model's own strategy.
pub fn quantities(model: &ValidatedModel, tol: &Tolerances) -> Result<QuantitySet> {
    model.require_analytic()?;
    match model.strategy() {
        Strategy::Exhaustive => Ok(exhaustive_quantities(model)),
        Strategy::MinimumSojourn => quantities_strategy_ii(model, tol),
        Strategy::IdleSojourn => quantities_strategy_iii(model, tol),
        Strategy::EmptyArrivalTimer => quantities_strategy_iv(model, tol),
        Strategy::IdleCredit => Err(Error::unsupported("strategy I")),
    }
}

/// No waiting anywhere: `f = w = 0`, `r~ = r`, `c_i = ρ_i E C`.
pub fn exhaustive_quantities(model: &ValidatedModel) -> QuantitySet {
    let cycle = cycle_time(model, 0.0);
    let stations = (0..model.station_count())
        .map(|i| StationQuantities {
            f: 0.0,
            w: 0.0,
            r_tilde: model.r(i),
            c: model.rho(i) * cycle,
        })
        .collect();
    QuantitySet::assemble(model, Strategy::Exhaustive, stations, None)
}

fn queue(model: &ValidatedModel, i: usize) -> Result<TransientQueue> {
    TransientQueue::new(model.lambda(i), model.mu(i)?)
}

/// Strategy III for any number of stations.
///
/// Sojourn times solve `c_i = s_i (r0 + c0 - c_i) + T_i + q_i(T_i) β_i` with
/// `s_i = ρ_i/(1-ρ_i)` and `β_i = b_i/(1-ρ_i)`; `f_i = ∫_0^{T_i} P_00`.
pub fn quantities_strategy_iii(model: &ValidatedModel, tol: &Tolerances) -> Result<QuantitySet> {
    let n = model.station_count();
    let mut dwell = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let t = model.timer(i);
        let q = queue(model, i)?;
        let (m0, m1) = empty_dwell_integrals(&q, 0, t, tol)?;
        let q_t = expected_queue_from_empty(&q, t, tol)?;
        let rho = model.rho(i);
        let s = rho / (1.0 - rho);
        rhs.push(s * model.r0() + t + q_t * model.b(i) / (1.0 - rho));
        dwell.push((m0, m1));
    }
    let mut matrix = Vec::with_capacity(n * n);
    for i in 0..n {
        let s = model.rho(i) / (1.0 - model.rho(i));
        for j in 0..n {
            matrix.push(if i == j { 1.0 } else { -s });
        }
    }
    let c = solve_linear(matrix, rhs)?;
    let c0: f64 = c.iter().sum();
    let stations = (0..n)
        .map(|i| {
            let (m0, m1) = dwell[i];
            let s = model.rho(i) / (1.0 - model.rho(i));
            let w = if m0 > 0.0 {
                s * (model.r0() + c0 - c[i]) + m1 / m0
            } else {
                0.0
            };
            StationQuantities {
                f: m0,
                w,
                r_tilde: model.r(i),
                c: c[i],
            }
        })
        .collect();
    Ok(QuantitySet::assemble(
        model,
        Strategy::IdleSojourn,
        stations,
        None,
    ))
}

/// Gaussian elimination with partial pivoting on a row-major square matrix.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-14 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    Ok(x)
}

fn epochs_for(model: &ValidatedModel) -> Epochs {
    if model.all_switchovers_deterministic() {
        Epochs::Arrival
    } else {
        Epochs::Departure
    }
}

fn require_two(model: &ValidatedModel, strategy: Strategy) -> Result<()> {
    if model.station_count() != 2 {
        return Err(Error::unsupported(format!(
            "strategy {strategy} needs two stations"
        )));
    }
    Ok(())
}

/// Strategy II for two stations.
pub fn quantities_strategy_ii(model: &ValidatedModel, tol: &Tolerances) -> Result<QuantitySet> {
    require_two(model, Strategy::MinimumSojourn)?;
    let epochs = epoch_distributions_with(model, Strategy::MinimumSojourn, epochs_for(model), tol)?;
    let mut per = Vec::with_capacity(2);
    // (f, w, c, dwell weights π_k m0_k / f)
    for i in 0..2 {
        let t = model.timer(i);
        let q = queue(model, i)?;
        let pi = &epochs.arrival[i].probs;
        let k_max = pi.len() - 1;
        let (m0, m1) = dwell_integrals_upto(&q, k_max, t, tol)?;
        let f: f64 = pi.iter().zip(&m0).map(|(p, m)| p * m).sum();
        let w = if f > 0.0 {
            pi.iter().zip(&m1).map(|(p, m)| p * m).sum::<f64>() / f
        } else {
            0.0
        };
        // E[L_T | k] = k + (λ-μ)T + μ ∫_0^T P_{k,0}
        let mean_left: f64 = pi
            .iter()
            .zip(&m0)
            .enumerate()
            .map(|(k, (p, m))| p * (k as f64 + (q.lambda - q.mu) * t + q.mu * m))
            .sum();
        let c = t + mean_left * model.b(i) / (1.0 - model.rho(i));
        let weights: Vec<f64> = pi
            .iter()
            .zip(&m0)
            .map(|(p, m)| if f > 0.0 { p * m / f } else { 0.0 })
            .collect();
        per.push((f, w, c, weights));
    }
    let mut stations = Vec::with_capacity(2);
    for v in 0..2 {
        let u = 1 - v;
        let sw = model.switchover(v);
        let r_tilde = if sw.is_deterministic() {
            model.r(v)
        } else if per[u].0 == 0.0 {
            // no waiting at u; the T_u → 0 limit puts all weight on k = 0
            cond_switchover_given_arrivals(sw, model.lambda(u), 0)?
        } else {
            let nu = epochs
                .departure
                .as_ref()
                .ok_or_else(|| Error::invalid("departure-epoch law missing"))?;
            conditional_switchover_ii(&nu[v].probs, &per[u].3, sw, model.lambda(u))
        };
        let (f, w, c, _) = per[v];
        stations.push(StationQuantities { f, w, r_tilde, c });
    }
    Ok(QuantitySet::assemble(
        model,
        Strategy::MinimumSojourn,
        stations,
        Some(&epochs),
    ))
}

/// `Σ_k p_k E[R | C_k]` with
/// `E[R | C_k] = Σ_j ν_{k-j} E[R 1_{B_j}] / Σ_j ν_{k-j} P(B_j)`.
fn conditional_switchover_ii(
    nu: &[f64],
    weights: &[f64],
    sw: &crate::model::SwitchoverSpec,
    lambda: f64,
) -> f64 {
    let k_max = weights.len() - 1;
    let p_b: Vec<f64> = (0..=k_max)
        .map(|j| poisson_transform(sw, lambda, j, false))
        .collect();
    let x_b: Vec<f64> = (0..=k_max)
        .map(|j| poisson_transform(sw, lambda, j, true))
        .collect();
    let mut total = 0.0;
    for (k, &p) in weights.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..=k {
            let a = nu.get(k - j).copied().unwrap_or(0.0);
            num += a * x_b[j];
            den += a * p_b[j];
        }
        if den > 0.0 {
            total += p * num / den;
        }
    }
    total
}

/// `w = E[min(E,T)²] / (2 E[min(E,T)]) = 1/λ − T/(e^{λT} − 1)`.
pub(crate) fn residual_of_truncated_exponential(lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    if x == 0.0 {
        0.0
    } else if x < 1e-4 {
        t * (0.5 - x / 12.0 + x * x * x / 720.0)
    } else {
        1.0 / lambda - t / x.exp_m1()
    }
}

/// Strategy IV for two stations.
pub fn quantities_strategy_iv(model: &ValidatedModel, tol: &Tolerances) -> Result<QuantitySet> {
    require_two(model, Strategy::EmptyArrivalTimer)?;
    let epochs =
        epoch_distributions_with(model, Strategy::EmptyArrivalTimer, epochs_for(model), tol)?;
    let cycle_f: Vec<f64> = (0..2)
        .map(|i| {
            let (lambda, t) = (model.lambda(i), model.timer(i));
            epochs.arrival[i].probs[0] * -(-lambda * t).exp_m1() / lambda
        })
        .collect();
    let f0: f64 = cycle_f.iter().sum();
    let cycle = cycle_time(model, f0);
    let mut stations = Vec::with_capacity(2);
    for (i, &f) in cycle_f.iter().enumerate() {
        let next = 1 - i;
        let w = if f > 0.0 {
            residual_of_truncated_exponential(model.lambda(i), model.timer(i))
        } else {
            0.0
        };
        let r_tilde = cond_switchover_given_arrivals(model.switchover(i), model.lambda(next), 0)?;
        stations.push(StationQuantities {
            f,
            w,
            r_tilde,
            c: model.rho(i) * cycle + f,
        });
    }
    Ok(QuantitySet::assemble(
        model,
        Strategy::EmptyArrivalTimer,
        stations,
        Some(&epochs),
    ))
}
