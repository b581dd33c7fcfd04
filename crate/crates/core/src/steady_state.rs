//! Queue lengths at server arrival and departure epochs for two stations.
//!
//! Let `u` be the station being visited and `v` the other one. Everything is
//! built from the visit kernel `W_u[k][n]`: the probability that `n` messages
//! arrive at `v` during a visit to `u` that starts with `k` messages waiting.
//! Counting arrivals directly (rather than integrating Poisson weights against
//! busy-period densities) uses the exact law of the number of `v`-arrivals in
//! one busy period of `u`, see [`busy_arrival_counts`].
//!
//! * Arrival epochs (deterministic switchovers only):
//!   `π^{(v)}_n = Σ_k π^{(u)}_k (Pois(λ_v r0) * W_u[k])_n`.
//! * Departure epochs, where `ν^{(u)}_n` is the probability that `n` messages
//!   wait at `v` when the server leaves `u`:
//!   `ν^{(u)}_n = Σ_k ν^{(v)}_k Σ_{m,j} J_v(m, j) W_u[k+m][n-j]`, with
//!   `J_v(m, j)` the joint law of arrivals at `u` and `v` during `R_v`.
//!   Arrival-epoch laws follow as `π^{(u)} = ν^{(v)} * U_v` where `U_v` counts
//!   arrivals at `u` during `R_v`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Strategy, ValidatedModel};
use crate::numerics::{
    busy_arrival_counts, joint_switchover_arrivals, log_poisson_pmf, poisson_pmf_vec,
    poisson_transform, poisson_transform_vec, TransientKernel, TransientQueue,
};
use crate::tolerances::Tolerances;

/// Probability mass below which Poisson-type tails are dropped.
const COUNT_TAIL: f64 = 1e-14;

/// A probability vector over `n = 0..=truncation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueLengthDist {
    pub probs: Vec<f64>,
    pub truncation: usize,
    /// Estimated mass beyond `truncation`.
    pub tail_mass_bound: f64,
}

impl QueueLengthDist {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Which embedded epochs an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epochs {
    /// Server arrival instants; valid for deterministic switchovers.
    Arrival,
    /// Server departure instants; valid for any switchover law.
    Departure,
}

/// How the server behaves during one visit.
#[derive(Debug, Clone, Copy, PartialEq)]
enum VisitRule {
    Exhaustive,
    MinimumSojourn(f64),
    EmptyArrivalTimer(f64),
}

impl VisitRule {
    fn for_station(model: &ValidatedModel, strategy: Strategy, u: usize) -> Result<Self> {
        let t = model.timer(u);
        Ok(match strategy {
            _ if t == 0.0 => VisitRule::Exhaustive,
            Strategy::Exhaustive => VisitRule::Exhaustive,
            Strategy::MinimumSojourn => VisitRule::MinimumSojourn(t),
            Strategy::EmptyArrivalTimer => VisitRule::EmptyArrivalTimer(t),
            other => {
                return Err(Error::unsupported(alloc::format!(
                    "no epoch system for strategy {other}"
                )))
            }
        })
    }
}

/// Column-stochastic (up to truncation) map between epoch distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedOperator {
    pub epochs: Epochs,
    /// Station whose epoch law is the input.
    pub from_station: usize,
    /// Station whose epoch law is the output.
    pub to_station: usize,
    pub size: usize,
    /// Row-major `(size+1) × (size+1)` entries, `[n][k]` at `n * (size+1) + k`.
    pub entries: Vec<f64>,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.size + 1
    }

    pub fn entry(&self, n: usize, k: usize) -> f64 {
        self.entries[n * self.dim() + k]
    }

    /// `1 - Σ_n A[n][k]` for each column.
    pub fn column_deficits(&self) -> Vec<f64> {
        let d = self.dim();
        let mut sums = vec![0.0; d];
        for row in self.entries.chunks_exact(d) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums.into_iter().map(|s| (1.0 - s).max(0.0)).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.entries
            .chunks_exact(d)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Mass lost in one application to `x`.
    pub fn weighted_deficit(&self, x: &[f64]) -> f64 {
        self.column_deficits()
            .iter()
            .zip(x)
            .map(|(d, p)| d * p)
            .sum()
    }
}

fn convolve_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let n_max = out.len();
    for (i, &x) in a.iter().enumerate().take(n_max) {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

fn convolve_trunc(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    convolve_into(a, b, &mut out);
    out
}

/// Smallest `n` beyond which the distribution given by `pmf` has mass below
/// `COUNT_TAIL`.
fn count_cutoff<F: FnMut(usize) -> f64>(mut pmf: F, cap: usize) -> Result<usize> {
    let mut acc = 0.0;
    for n in 0..=cap {
        acc += pmf(n);
        if 1.0 - acc < COUNT_TAIL {
            return Ok(n);
        }
    }
    Err(Error::ToleranceNotReached {
        what: "arrival-count tail",
        achieved: 1.0 - acc,
    })
}

fn poisson_cutoff(mean: f64) -> usize {
    (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize
}

/// `W_u[k][n]` for `k = 0..=k_max`, `n = 0..=n_max`: arrivals at the other
/// station during a visit to `u` that starts with `k` messages waiting.
pub fn visit_arrivals(
    model: &ValidatedModel,
    strategy: Strategy,
    u: usize,
    k_max: usize,
    n_max: usize,
    tol: &Tolerances,
) -> Result<Vec<Vec<f64>>> {
    check_two_exponential(model)?;
    let rule = VisitRule::for_station(model, strategy, u)?;
    let v = 1 - u;
    let (lu, lv) = (model.lambda(u), model.lambda(v));
    let queue = TransientQueue::new(lu, model.mu(u)?)?;
    let len = n_max + 1;
    let h = busy_arrival_counts(&queue, lv, n_max);
    let powers = |l_max: usize| {
        let mut out = Vec::with_capacity(l_max + 1);
        let mut unit = vec![0.0; len];
        unit[0] = 1.0;
        out.push(unit);
        for l in 1..=l_max {
            let next = convolve_trunc(&out[l - 1], &h, len);
            out.push(next);
        }
        out
    };
    match rule {
        VisitRule::Exhaustive => Ok(powers(k_max)),
        VisitRule::EmptyArrivalTimer(t) => {
            let mut w = powers(k_max);
            w[0] = idle_then_busy(lu, lv, t, &h, len);
            Ok(w)
        }
        VisitRule::MinimumSojourn(t) => {
            let l_max = k_max + poisson_cutoff(lu * t);
            let hp = powers(l_max);
            let kernel = TransientKernel::new(&queue, t, l_max, tol)?;
            let during_timer = poisson_pmf_vec(lv * t, n_max);
            let mut w = Vec::with_capacity(k_max + 1);
            let mut mix = vec![0.0; len];
            for k in 0..=k_max {
                mix.iter_mut().for_each(|m| *m = 0.0);
                for (l, hl) in hp.iter().enumerate() {
                    let p = kernel.prob(k, l);
                    if p == 0.0 {
                        continue;
                    }
                    for (m, x) in mix.iter_mut().zip(hl) {
                        *m += p * x;
                    }
                }
                w.push(convolve_trunc(&during_timer, &mix, len));
            }
            Ok(w)
        }
    }
}

/// Strategy IV visit to an empty station: wait up to `t` for the first arrival
/// (rate `lu`), then one busy period. Arrivals at the other station have rate
/// `lv`.
fn idle_then_busy(lu: f64, lv: f64, t: f64, h: &[f64], len: usize) -> Vec<f64> {
    // Z_n = ∫_0^t lu e^{-lu y} Pois_n(lv y) dy
    //     = lu lv^n / (lu+lv)^{n+1} · P(Poisson((lu+lv) t) > n)
    let s = lu + lv;
    let top = (len + poisson_cutoff(s * t)).max(len);
    let pmf: Vec<f64> = (0..=top).map(|i| log_poisson_pmf(s * t, i).exp()).collect();
    let mut upper = vec![0.0; top + 2];
    for i in (0..=top).rev() {
        upper[i] = upper[i + 1] + pmf[i];
    }
    let z: Vec<f64> = (0..len)
        .map(|n| {
            let ln_front = lu.ln() + n as f64 * (lv / s).ln() - s.ln();
            ln_front.exp() * upper[n + 1]
        })
        .collect();
    let mut w = convolve_trunc(&z, h, len);
    let never = (-lu * t).exp();
    for (o, p) in w.iter_mut().zip(poisson_pmf_vec(lv * t, len - 1)) {
        *o += never * p;
    }
    w
}

fn check_two_exponential(model: &ValidatedModel) -> Result<()> {
    if model.station_count() != 2 {
        return Err(Error::unsupported(
            "epoch systems are defined for two stations",
        ));
    }
    model.mu(0)?;
    model.mu(1)?;
    Ok(())
}

/// Operator between epoch laws of `from` and `to` under `strategy`.
fn build_operator(
    model: &ValidatedModel,
    strategy: Strategy,
    epochs: Epochs,
    from: usize,
    to: usize,
    size: usize,
    tol: &Tolerances,
) -> Result<TruncatedOperator> {
    check_two_exponential(model)?;
    if from > 1 || to > 1 || from == to {
        return Err(Error::invalid("operators map between stations 0 and 1"));
    }
    let d = size + 1;
    let mut entries = vec![0.0; d * d];
    match epochs {
        Epochs::Arrival => {
            if !model.all_switchovers_deterministic() {
                return Err(Error::invalid(
                    "arrival-epoch operators need deterministic switchovers",
                ));
            }
            // visit at `from`, then arrivals at `to` over both switchovers
            let u = from;
            let w = visit_arrivals(model, strategy, u, size, size, tol)?;
            let switching = poisson_pmf_vec(model.lambda(to) * model.r0(), size);
            let mut col = vec![0.0; d];
            for (k, wk) in w.iter().enumerate() {
                convolve_into(&switching, wk, &mut col);
                for n in 0..d {
                    entries[n * d + k] = col[n];
                }
            }
        }
        Epochs::Departure => {
            // input: departure from `from`; switchover R_from, then visit `to`
            let (u, v) = (to, from);
            let rate = model.lambda(u) + model.lambda(v);
            let sw = model.switchover(v);
            let total = count_cutoff(|n| poisson_transform(sw, rate, n, false), tol.term_cap)?;
            let joint = joint_switchover_arrivals(sw, model.lambda(u), model.lambda(v), total);
            let w = visit_arrivals(model, strategy, u, size + total, size, tol)?;
            let mut col = vec![0.0; d];
            for k in 0..d {
                col.iter_mut().for_each(|c| *c = 0.0);
                for (m, row) in joint.iter().enumerate() {
                    let wk = &w[k + m];
                    for (j, &p) in row.iter().enumerate().take(d) {
                        if p == 0.0 {
                            continue;
                        }
                        for (c, x) in col[j..].iter_mut().zip(wk) {
                            *c += p * x;
                        }
                    }
                }
                for n in 0..d {
                    entries[n * d + k] = col[n];
                }
            }
        }
    }
    Ok(TruncatedOperator {
        epochs,
        from_station: from,
        to_station: to,
        size,
        entries,
    })
}

/// Strategy II operator (arrival epochs `A`, or departure epochs `Ã`).
pub fn build_arrival_operator_ii(
    model: &ValidatedModel,
    epochs: Epochs,
    from: usize,
    to: usize,
    size: usize,
    tol: &Tolerances,
) -> Result<TruncatedOperator> {
    build_operator(model, Strategy::MinimumSojourn, epochs, from, to, size, tol)
}

/// Strategy IV operator (arrival epochs `A`, or departure epochs `Ã`).
pub fn build_arrival_operator_iv(
    model: &ValidatedModel,
    epochs: Epochs,
    from: usize,
    to: usize,
    size: usize,
    tol: &Tolerances,
) -> Result<TruncatedOperator> {
    build_operator(
        model,
        Strategy::EmptyArrivalTimer,
        epochs,
        from,
        to,
        size,
        tol,
    )
}

/// Fixed point of `x ↦ B(Ax)` by renormalised power iteration, started from
/// an empty queue.
pub fn solve_cycle_fixed_point(
    a: &TruncatedOperator,
    b: &TruncatedOperator,
    tol: &Tolerances,
) -> Result<(QueueLengthDist, QueueLengthDist)> {
    let mut start = vec![0.0; a.dim()];
    start[0] = 1.0;
    solve_cycle_fixed_point_from(a, b, &start, tol).map(|(x, y, _)| (x, y))
}

/// As [`solve_cycle_fixed_point`] from a given start vector; also returns the
/// iteration count.
pub fn solve_cycle_fixed_point_from(
    a: &TruncatedOperator,
    b: &TruncatedOperator,
    start: &[f64],
    tol: &Tolerances,
) -> Result<(QueueLengthDist, QueueLengthDist, usize)> {
    if a.size != b.size || a.to_station != b.from_station || b.to_station != a.from_station {
        return Err(Error::invalid("operators do not compose into a cycle"));
    }
    if start.len() != a.dim() {
        return Err(Error::invalid("start vector has the wrong length"));
    }
    let mut x = normalized(start.to_vec())?;
    let mut residual = f64::INFINITY;
    for it in 1..=tol.fixed_point_iterations {
        let y = normalized(a.apply(&x))?;
        let next = normalized(b.apply(&y))?;
        residual = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).sum();
        x = next;
        if residual < tol.fixed_point {
            // the mass a map sends past the truncation estimates the tail of
            // the law it produces
            let y = normalized(a.apply(&x))?;
            let y_tail = a.weighted_deficit(&x);
            let x_tail = b.weighted_deficit(&y);
            let wrap = |probs, tail_mass_bound| QueueLengthDist {
                probs,
                truncation: a.size,
                tail_mass_bound,
            };
            return Ok((wrap(x, x_tail), wrap(y, y_tail), it));
        }
    }
    Err(Error::NoConvergence {
        iterations: tol.fixed_point_iterations,
        residual,
    })
}

fn normalized(mut x: Vec<f64>) -> Result<Vec<f64>> {
    let s: f64 = x.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    x.iter_mut().for_each(|p| *p /= s);
    Ok(x)
}

/// Epoch laws of both stations at one truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDistributions {
    pub epochs: Epochs,
    /// `π^{(i)}`: messages found at station `i` when the server arrives.
    pub arrival: [QueueLengthDist; 2],
    /// `ν^{(i)}`: messages waiting at the other station when the server
    /// leaves `i`. Present for departure-epoch solutions.
    pub departure: Option<[QueueLengthDist; 2]>,
    pub truncation: usize,
    pub iterations: usize,
}

fn solve_at(
    model: &ValidatedModel,
    strategy: Strategy,
    epochs: Epochs,
    size: usize,
    tol: &Tolerances,
) -> Result<EpochDistributions> {
    match epochs {
        Epochs::Arrival => {
            let a = build_operator(model, strategy, epochs, 1, 0, size, tol)?;
            let b = build_operator(model, strategy, epochs, 0, 1, size, tol)?;
            let mut start = vec![0.0; size + 1];
            start[0] = 1.0;
            let (pi1, pi0, iterations) = solve_cycle_fixed_point_from(&a, &b, &start, tol)?;
            Ok(EpochDistributions {
                epochs,
                arrival: [pi0, pi1],
                departure: None,
                truncation: size,
                iterations,
            })
        }
        Epochs::Departure => {
            // a: ν^{(1)} → ν^{(0)}, b: ν^{(0)} → ν^{(1)}
            let a = build_operator(model, strategy, epochs, 1, 0, size, tol)?;
            let b = build_operator(model, strategy, epochs, 0, 1, size, tol)?;
            let mut start = vec![0.0; size + 1];
            start[0] = 1.0;
            let (nu1, nu0, iterations) = solve_cycle_fixed_point_from(&a, &b, &start, tol)?;
            let pi0 = arrival_from_departure(model, 0, &nu1);
            let pi1 = arrival_from_departure(model, 1, &nu0);
            Ok(EpochDistributions {
                epochs,
                arrival: [pi0, pi1],
                departure: Some([nu0, nu1]),
                truncation: size,
                iterations,
            })
        }
    }
}

/// `π^{(u)}_n = Σ_{k ≤ n} ν^{(v)}_k U(n-k)` with `U` the arrivals at `u`
/// during the switchover out of `v`.
fn arrival_from_departure(
    model: &ValidatedModel,
    u: usize,
    nu_v: &QueueLengthDist,
) -> QueueLengthDist {
    let v = 1 - u;
    let len = nu_v.probs.len();
    let u_counts = poisson_transform_vec(model.switchover(v), model.lambda(u), len - 1, false);
    let probs = convolve_trunc(&nu_v.probs, &u_counts, len);
    let lost = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    QueueLengthDist {
        probs,
        truncation: nu_v.truncation,
        tail_mass_bound: nu_v.tail_mass_bound + lost,
    }
}

/// Epoch laws for the model's own strategy with adaptive truncation.
///
/// Arrival epochs are used when every switchover is deterministic, departure
/// epochs otherwise.
pub fn epoch_distributions(model: &ValidatedModel, tol: &Tolerances) -> Result<EpochDistributions> {
    let epochs = if model.all_switchovers_deterministic() {
        Epochs::Arrival
    } else {
        Epochs::Departure
    };
    epoch_distributions_with(model, model.strategy(), epochs, tol)
}

/// Epoch laws with an explicit strategy and epoch choice.
///
/// The truncation doubles from `tol.truncation_start` until the estimated tail
/// mass and the change against the doubled level are both below
/// `tol.truncation`; the finer solution is returned.
pub fn epoch_distributions_with(
    model: &ValidatedModel,
    strategy: Strategy,
    epochs: Epochs,
    tol: &Tolerances,
) -> Result<EpochDistributions> {
    let mut size = tol.truncation_start.max(2);
    let mut coarse = solve_at(model, strategy, epochs, size, tol)?;
    loop {
        let next = size * 2;
        if next > tol.truncation_cap {
            let deficit = tail_of(&coarse);
            if deficit <= tol.truncation {
                return Ok(coarse);
            }
            return Err(Error::TruncationInsufficient { size, deficit });
        }
        let fine = solve_at(model, strategy, epochs, next, tol)?;
        let change = (0..2)
            .flat_map(|i| {
                let (c, f) = (&coarse.arrival[i].probs, &fine.arrival[i].probs);
                c.iter().zip(f).map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max);
        if tail_of(&coarse) <= tol.truncation && change <= tol.truncation {
            return Ok(fine);
        }
        coarse = fine;
        size = next;
    }
}

fn tail_of(d: &EpochDistributions) -> f64 {
    d.arrival
        .iter()
        .map(|p| p.tail_mass_bound)
        .fold(0.0, f64::max)
}
