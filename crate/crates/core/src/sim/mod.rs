//! Discrete-event simulation of the polling model.
//!
//! A run is a single deterministic function of its [`SimConfig`]: every
//! (station, purpose) pair draws from its own ChaCha8 stream derived from the
//! seed, and simultaneous events are handled in the fixed order service
//! completion, timer expiry, arrival, switchover completion.
//!
//! Delays are service start minus arrival. After a warmup fraction of the
//! horizon the remainder is cut into batches; intervals are batch-means
//! intervals at 99 % confidence.

mod engine;
mod stats;
mod trace;

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked into the build
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PollingModel, ValidatedModel};
use engine::{Engine, Recorder};
use stats::{batch_half_width, batch_means, Tally};

pub use stats::{normal_quantile, student_t_quantile, Interval, CONFIDENCE};
pub use trace::{trace, TraceEvent, TraceKind};

/// Messages that every batch must contain on average.
pub const MESSAGES_PER_BATCH: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Number of handled events.
    Events(u64),
    /// Simulated time.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: PollingModel,
    pub seed: u64,
    pub horizon: Horizon,
    /// Fraction of the horizon discarded before statistics start, in `[0, 0.5)`.
    pub warmup: f64,
    /// Number of batches for the confidence intervals, at least 10.
    pub batches: usize,
}

impl SimConfig {
    pub const DEFAULT_WARMUP: f64 = 0.1;
    pub const DEFAULT_BATCHES: usize = 30;

    pub fn new(model: PollingModel, seed: u64, horizon: Horizon) -> Self {
        SimConfig {
            model,
            seed,
            horizon,
            warmup: Self::DEFAULT_WARMUP,
            batches: Self::DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<ValidatedModel> {
        let positive = match self.horizon {
            Horizon::Events(n) => n > 0,
            Horizon::Time(t) => t.is_finite() && t > 0.0,
        };
        if !positive {
            return Err(Error::invalid("simulation horizon must be positive"));
        }
        if !(self.warmup >= 0.0 && self.warmup < 0.5) {
            return Err(Error::invalid("warmup fraction must lie in [0, 0.5)"));
        }
        if self.batches < 10 {
            return Err(Error::invalid("at least 10 batches are required"));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationEstimate {
    /// Messages whose service started after the warmup.
    pub served: u64,
    /// Mean queueing delay `E D_i`.
    pub delay: Interval,
    /// Mean idle waiting per visit.
    pub f: f64,
    /// Mean time since the server arrived, sampled uniformly while waiting.
    /// `None` if the server never waited here.
    pub w: Option<f64>,
    /// Mean length of this station's outgoing switchover, sampled uniformly
    /// while the server waits at the next station. `None` if it never did.
    pub r_tilde: Option<f64>,
    /// Time-average number of messages at the station, including the one in
    /// service.
    pub mean_in_system: f64,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub seed: u64,
    /// `Σ (ρ_i/ρ0) E D_i`.
    pub d_bar: Interval,
    pub stations: Vec<StationEstimate>,
    /// Mean time between server arrivals at station 1.
    pub mean_cycle: f64,
    /// Time-average unfinished work.
    pub mean_workload: f64,
    pub cycles: u64,
    pub events: u64,
    /// Simulated time after the warmup.
    pub observed_time: f64,
    pub batches: usize,
}

/// Waiting quantities measured by a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredQuantities {
    pub f: f64,
    pub w: Option<f64>,
    pub r_tilde: Option<f64>,
}

struct Collector {
    n: usize,
    horizon: Horizon,
    warmup_events: u64,
    warmup_time: f64,
    batches: usize,
    active: bool,
    start_time: f64,
    batch: usize,
    delays: Vec<Vec<Tally>>,
    totals: Vec<Tally>,
    visits: Vec<u64>,
    wait_time: Vec<f64>,
    wait_age: Vec<f64>,
    /// Indexed by the station whose outgoing switchover is measured.
    switch_weighted: Vec<f64>,
    switch_time: Vec<f64>,
    first_cycle_start: Option<f64>,
    last_cycle_start: f64,
    cycle_starts: u64,
    workload_integral: f64,
    in_system_integral: Vec<f64>,
    observed: f64,
}

impl Collector {
    fn new(n: usize, config: &SimConfig) -> Self {
        let (warmup_events, warmup_time) = match config.horizon {
            Horizon::Events(e) => ((config.warmup * e as f64) as u64, f64::INFINITY),
            Horizon::Time(t) => (u64::MAX, config.warmup * t),
        };
        Collector {
            n,
            horizon: config.horizon,
            warmup_events,
            warmup_time,
            batches: config.batches,
            active: false,
            start_time: 0.0,
            batch: 0,
            delays: (0..config.batches)
                .map(|_| alloc::vec![Tally::default(); n])
                .collect(),
            totals: alloc::vec![Tally::default(); n],
            visits: alloc::vec![0; n],
            wait_time: alloc::vec![0.0; n],
            wait_age: alloc::vec![0.0; n],
            switch_weighted: alloc::vec![0.0; n],
            switch_time: alloc::vec![0.0; n],
            first_cycle_start: None,
            last_cycle_start: 0.0,
            cycle_starts: 0,
            workload_integral: 0.0,
            in_system_integral: alloc::vec![0.0; n],
            observed: 0.0,
        }
    }

    fn activate(&mut self, now: f64) {
        self.active = true;
        self.start_time = now;
    }
}

impl Recorder for Collector {
    fn on_event(&mut self, index: u64, now: f64) {
        match self.horizon {
            Horizon::Events(total) => {
                if !self.active && index >= self.warmup_events {
                    self.activate(now);
                }
                if self.active {
                    let span = (total - self.warmup_events).max(1);
                    let b =
                        (index - self.warmup_events) as u128 * self.batches as u128 / span as u128;
                    self.batch = (b as usize).min(self.batches - 1);
                }
            }
            Horizon::Time(total) => {
                if self.active {
                    let span = total - self.warmup_time;
                    let b = ((now - self.warmup_time) / span * self.batches as f64) as usize;
                    self.batch = b.min(self.batches - 1);
                }
            }
        }
    }

    fn on_advance(&mut self, dt: f64, workload: f64, serving: bool, in_system: &[u64]) {
        if !self.active {
            return;
        }
        self.observed += dt;
        let used = if serving { dt.min(workload) } else { 0.0 };
        self.workload_integral += workload * dt - 0.5 * used * used;
        for (acc, &k) in self.in_system_integral.iter_mut().zip(in_system) {
            *acc += k as f64 * dt;
        }
    }

    fn on_visit(&mut self, now: f64, station: usize) {
        if !self.active {
            return;
        }
        self.visits[station] += 1;
        if station == 0 {
            self.first_cycle_start.get_or_insert(now);
            self.last_cycle_start = now;
            self.cycle_starts += 1;
        }
    }

    fn on_service_start(&mut self, station: usize, delay: f64) {
        if self.active {
            self.delays[self.batch][station].add(delay);
            self.totals[station].add(delay);
        }
    }

    fn on_wait(&mut self, station: usize, visit_start: f64, from: f64, to: f64, prev_switch: f64) {
        if !self.active {
            return;
        }
        let from = from.max(self.start_time);
        if to <= from {
            return;
        }
        let d = to - from;
        let (a, b) = (from - visit_start, to - visit_start);
        self.wait_time[station] += d;
        self.wait_age[station] += 0.5 * (b * b - a * a);
        let prev = (station + self.n - 1) % self.n;
        self.switch_weighted[prev] += prev_switch * d;
        self.switch_time[prev] += d;
    }
}

fn drive(engine: &mut Engine<'_, Collector>, horizon: Horizon) {
    match horizon {
        Horizon::Events(total) => while engine.events() < total && engine.step() {},
        Horizon::Time(total) => {
            let warm = engine.recorder.warmup_time;
            while engine.next_time().is_some_and(|t| t <= warm) {
                engine.step();
            }
            engine.advance(warm);
            engine.recorder.activate(warm);
            while engine.next_time().is_some_and(|t| t <= total) {
                engine.step();
            }
            engine.advance(total);
        }
    }
}

/// Runs one replication and summarises it.
pub fn run(config: &SimConfig) -> Result<SimEstimate> {
    let model = config.validate()?;
    let n = model.station_count();
    let mut engine = Engine::new(&model, config.seed, Collector::new(n, config))?;
    drive(&mut engine, config.horizon);
    let events = engine.events();
    let c = engine.recorder;

    let served: u64 = c.totals.iter().map(|t| t.count).sum();
    let required = config.batches as u64 * MESSAGES_PER_BATCH;
    if served < required {
        return Err(Error::HorizonTooSmall { served, required });
    }

    let weights: Vec<f64> = (0..n).map(|i| model.rho(i) / model.rho0()).collect();
    let station_means: Vec<f64> = c.totals.iter().map(|t| t.mean().unwrap_or(0.0)).collect();
    let per_station_batches: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let column: Vec<Tally> = c.delays.iter().map(|b| b[i]).collect();
            batch_means(&column, station_means[i])
        })
        .collect();
    let d_bar_batches: Vec<f64> = (0..config.batches)
        .map(|b| (0..n).map(|i| weights[i] * per_station_batches[i][b]).sum())
        .collect();
    let d_bar = Interval {
        mean: (0..n).map(|i| weights[i] * station_means[i]).sum(),
        half_width: batch_half_width(&d_bar_batches).unwrap_or(f64::INFINITY),
    };

    let observed = c.observed;
    let stations = (0..n)
        .map(|i| {
            let next = (i + 1) % n;
            StationEstimate {
                served: c.totals[i].count,
                delay: Interval {
                    mean: station_means[i],
                    half_width: batch_half_width(&per_station_batches[i]).unwrap_or(f64::INFINITY),
                },
                f: if c.visits[i] > 0 {
                    c.wait_time[i] / c.visits[i] as f64
                } else {
                    0.0
                },
                w: (c.wait_time[i] > 0.0).then(|| c.wait_age[i] / c.wait_time[i]),
                r_tilde: (c.switch_time[i] > 0.0 && c.wait_time[next] > 0.0)
                    .then(|| c.switch_weighted[i] / c.switch_time[i]),
                mean_in_system: if observed > 0.0 {
                    c.in_system_integral[i] / observed
                } else {
                    0.0
                },
                visits: c.visits[i],
            }
        })
        .collect();
    let cycles = c.cycle_starts.saturating_sub(1);
    let mean_cycle = match c.first_cycle_start {
        Some(first) if cycles > 0 => (c.last_cycle_start - first) / cycles as f64,
        _ => f64::NAN,
    };
    Ok(SimEstimate {
        seed: config.seed,
        d_bar,
        stations,
        mean_cycle,
        mean_workload: if observed > 0.0 {
            c.workload_integral / observed
        } else {
            0.0
        },
        cycles,
        events,
        observed_time: observed,
        batches: config.batches,
    })
}

/// `(f̂_i, ŵ_i, r̃̂_i)` per station. Stations where the server never waited
/// report `f̂ = 0` and no `ŵ`.
pub fn measure_quantities(config: &SimConfig) -> Result<Vec<MeasuredQuantities>> {
    let est = run(config)?;
    Ok(est
        .stations
        .iter()
        .map(|s| MeasuredQuantities {
            f: s.f,
            w: s.w,
            r_tilde: s.r_tilde,
        })
        .collect())
}

/// Merges independent replications of the same model. Means are weighted by
/// the amount of data behind them (observed time, served messages, visits,
/// waiting time); half-widths combine as independent errors.
pub fn pool(estimates: &[SimEstimate]) -> Result<SimEstimate> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::invalid("nothing to pool"))?;
    let n = first.stations.len();
    if estimates.iter().any(|e| e.stations.len() != n) {
        return Err(Error::invalid(
            "replications disagree on the number of stations",
        ));
    }
    let interval = |parts: &mut dyn Iterator<Item = (f64, Interval)>| {
        let (mut w, mut m, mut v) = (0.0, 0.0, 0.0);
        for (wk, iv) in parts {
            w += wk;
            m += wk * iv.mean;
            v += wk * wk * iv.half_width * iv.half_width;
        }
        if w > 0.0 {
            Interval {
                mean: m / w,
                half_width: v.sqrt() / w,
            }
        } else {
            Interval {
                mean: f64::NAN,
                half_width: f64::INFINITY,
            }
        }
    };
    let weighted = |parts: &mut dyn Iterator<Item = (f64, f64)>| {
        let (mut w, mut m) = (0.0, 0.0);
        for (wk, x) in parts {
            w += wk;
            m += wk * x;
        }
        (w > 0.0).then(|| m / w)
    };
    let waited = |e: &SimEstimate, i: usize| e.stations[i].f * e.stations[i].visits as f64;
    fn at(e: &SimEstimate, i: usize) -> &StationEstimate {
        &e.stations[i]
    }

    let d_bar = interval(&mut estimates.iter().map(|e| (e.observed_time, e.d_bar)));
    let stations = (0..n)
        .map(|i| {
            let next = (i + 1) % n;
            StationEstimate {
                served: estimates.iter().map(|e| at(e, i).served).sum(),
                delay: interval(
                    &mut estimates
                        .iter()
                        .map(|e| (at(e, i).served as f64, at(e, i).delay)),
                ),
                f: weighted(
                    &mut estimates
                        .iter()
                        .map(|e| (at(e, i).visits as f64, at(e, i).f)),
                )
                .unwrap_or(0.0),
                w: weighted(
                    &mut estimates
                        .iter()
                        .filter_map(|e| at(e, i).w.map(|w| (waited(e, i), w))),
                ),
                r_tilde: weighted(
                    &mut estimates
                        .iter()
                        .filter_map(|e| at(e, i).r_tilde.map(|r| (waited(e, next), r))),
                ),
                mean_in_system: weighted(
                    &mut estimates
                        .iter()
                        .map(|e| (e.observed_time, at(e, i).mean_in_system)),
                )
                .unwrap_or(0.0),
                visits: estimates.iter().map(|e| at(e, i).visits).sum(),
            }
        })
        .collect();
    Ok(SimEstimate {
        seed: first.seed,
        d_bar,
        stations,
        mean_cycle: weighted(&mut estimates.iter().map(|e| (e.cycles as f64, e.mean_cycle)))
            .unwrap_or(f64::NAN),
        mean_workload: weighted(&mut estimates.iter().map(|e| (e.observed_time, e.mean_workload)))
            .unwrap_or(0.0),
        cycles: estimates.iter().map(|e| e.cycles).sum(),
        events: estimates.iter().map(|e| e.events).sum(),
        observed_time: estimates.iter().map(|e| e.observed_time).sum(),
        batches: estimates.iter().map(|e| e.batches).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ServiceSpec, StationSpec, Strategy, SwitchoverSpec};
    use alloc::vec;

    fn model(strategy: Strategy, timers: [f64; 2]) -> PollingModel {
        let st = |lambda: f64, timer: f64| StationSpec {
            lambda,
            service: ServiceSpec::Exponential { rate: 1.0 },
            switchover: SwitchoverSpec::Deterministic { value: 0.5 },
            timer,
        };
        PollingModel::new(vec![st(0.3, timers[0]), st(0.2, timers[1])], strategy)
    }

    #[test]
    fn config_bounds() {
        let mut c = SimConfig::new(
            model(Strategy::Exhaustive, [0.0; 2]),
            1,
            Horizon::Events(10),
        );
        assert!(c.validate().is_ok());
        c.warmup = 0.5;
        assert!(c.validate().is_err());
        c.warmup = 0.1;
        c.batches = 9;
        assert!(c.validate().is_err());
        c.batches = 10;
        c.horizon = Horizon::Time(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_horizon_is_rejected() {
        let c = SimConfig::new(
            model(Strategy::Exhaustive, [0.0; 2]),
            1,
            Horizon::Events(1000),
        );
        assert!(matches!(run(&c), Err(Error::HorizonTooSmall { .. })));
    }

    #[test]
    fn same_seed_same_estimate() {
        let c = SimConfig::new(
            model(Strategy::IdleSojourn, [1.0, 0.0]),
            7,
            Horizon::Events(200_000),
        );
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
        let other = run(&SimConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a.d_bar.mean, other.d_bar.mean);
    }

    #[test]
    fn zero_timer_means_no_waiting() {
        for s in [
            Strategy::IdleCredit,
            Strategy::MinimumSojourn,
            Strategy::IdleSojourn,
            Strategy::EmptyArrivalTimer,
        ] {
            let c = SimConfig::new(model(s, [0.0; 2]), 3, Horizon::Events(200_000));
            let q = measure_quantities(&c).unwrap();
            assert!(q.iter().all(|m| m.f == 0.0 && m.w.is_none()));
        }
    }

    #[test]
    fn time_horizon_runs() {
        let c = SimConfig::new(
            model(Strategy::MinimumSojourn, [1.0, 1.0]),
            3,
            Horizon::Time(200_000.0),
        );
        let e = run(&c).unwrap();
        assert!((e.observed_time - 180_000.0).abs() < 1e-6 * 180_000.0);
        assert!(e.stations[0].f > 0.0);
    }

    #[test]
    fn pooling_one_replication_is_the_identity_and_two_narrow_the_interval() {
        let m = model(Strategy::IdleSojourn, [1.0, 0.5]);
        let a = run(&SimConfig::new(m.clone(), 1, Horizon::Events(200_000))).unwrap();
        let b = run(&SimConfig::new(m, 2, Horizon::Events(200_000))).unwrap();
        let solo = pool(core::slice::from_ref(&a)).unwrap();
        assert_eq!(solo.d_bar.mean, a.d_bar.mean);
        assert!((solo.d_bar.half_width - a.d_bar.half_width).abs() < 1e-15);
        let both = pool(&[a.clone(), b.clone()]).unwrap();
        assert!(both.d_bar.half_width < a.d_bar.half_width.max(b.d_bar.half_width));
        assert_eq!(both.events, a.events + b.events);
        assert!(pool(&[]).is_err());
    }
}
