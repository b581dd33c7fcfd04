//! Event-level semantics of each strategy, conservation laws and agreement
//! with the analytic delay.

use pollinglab_core::sim::{run, trace, TraceEvent, TraceKind};
use pollinglab_core::{
    analyze, Horizon, PollingModel, ServiceSpec, SimConfig, StationSpec, Strategy, SwitchoverSpec,
    Tolerances,
};

fn model(
    strategy: Strategy,
    lambda: [f64; 2],
    timers: [f64; 2],
    sw: SwitchoverSpec,
) -> PollingModel {
    let st = |lambda: f64, timer: f64| StationSpec {
        lambda,
        service: ServiceSpec::Exponential { rate: 1.0 },
        switchover: sw.clone(),
        timer,
    };
    PollingModel::new(
        vec![st(lambda[0], timers[0]), st(lambda[1], timers[1])],
        strategy,
    )
}

fn det(v: f64) -> SwitchoverSpec {
    SwitchoverSpec::Deterministic { value: v }
}

/// One stay of the server at a station, rebuilt from a trace.
#[derive(Debug, Default)]
struct Visit {
    station: usize,
    start: f64,
    queue_on_arrival: usize,
    /// `(start, until, end, ended_by_timer)` per idle wait.
    waits: Vec<(f64, f64, f64, bool)>,
    service_ends: Vec<f64>,
    /// End of the first service that left the station empty.
    first_emptied: Option<f64>,
    depart: f64,
    queue_on_departure: usize,
}

fn visits(events: &[TraceEvent]) -> Vec<Visit> {
    let mut out = Vec::new();
    let mut current: Option<Visit> = None;
    let mut pending: Option<(f64, f64)> = None;
    let mut expired = false;
    for e in events {
        match e.kind {
            TraceKind::ServerArrives => {
                current = Some(Visit {
                    station: e.station,
                    start: e.time,
                    queue_on_arrival: e.queue,
                    ..Visit::default()
                });
            }
            TraceKind::Arrival => {}
            _ => {
                let Some(v) = current.as_mut() else { continue };
                assert_eq!(
                    e.station, v.station,
                    "server event away from the server: {e}"
                );
                match e.kind {
                    TraceKind::WaitStart { until } => {
                        pending = Some((e.time, until));
                        expired = false;
                    }
                    TraceKind::TimerExpired => expired = true,
                    TraceKind::WaitEnd => {
                        let (s, u) = pending.take().expect("wait ends without starting");
                        v.waits.push((s, u, e.time, expired));
                    }
                    TraceKind::ServiceEnd => {
                        v.service_ends.push(e.time);
                        if e.queue == 0 && v.first_emptied.is_none() {
                            v.first_emptied = Some(e.time);
                        }
                    }
                    TraceKind::Depart { .. } => {
                        let mut v = current.take().unwrap();
                        v.depart = e.time;
                        v.queue_on_departure = e.queue;
                        out.push(v);
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

fn traced(strategy: Strategy, lambda: [f64; 2], timers: [f64; 2], seed: u64) -> Vec<Visit> {
    let config = SimConfig::new(
        model(strategy, lambda, timers, det(0.3)),
        seed,
        Horizon::Events(1),
    );
    let v = visits(&trace(&config, 20_000).unwrap());
    assert!(v.len() > 200);
    v
}

const EPS: f64 = 1e-9;

#[test]
fn exhaustive_never_waits_and_leaves_empty() {
    for v in traced(Strategy::Exhaustive, [0.4, 0.3], [2.0, 2.0], 1) {
        assert!(v.waits.is_empty());
        assert_eq!(v.queue_on_departure, 0);
    }
}

#[test]
fn idle_credit_is_spent_at_most_once_per_visit() {
    let timers = [1.0, 0.7];
    for v in traced(Strategy::IdleCredit, [0.4, 0.3], timers, 2) {
        let t = timers[v.station];
        let spent: f64 = v.waits.iter().map(|w| w.2 - w.0).sum();
        assert!(spent <= t + EPS, "{v:?}");
        if v.waits.last().is_some_and(|w| w.3) {
            assert!((spent - t).abs() < EPS, "{v:?}");
            assert!((v.depart - v.waits.last().unwrap().2).abs() < EPS);
        }
        assert_eq!(v.queue_on_departure, 0);
    }
}

#[test]
fn minimum_sojourn_stays_at_least_the_timer() {
    let timers = [1.5, 0.5];
    for v in traced(Strategy::MinimumSojourn, [0.4, 0.3], timers, 3) {
        let last_service = v.service_ends.last().copied().unwrap_or(v.start);
        let expected = (v.start + timers[v.station]).max(last_service);
        assert!((v.depart - expected).abs() < EPS, "{v:?}");
        for w in &v.waits {
            assert!((w.1 - (v.start + timers[v.station])).abs() < EPS);
        }
        assert_eq!(v.queue_on_departure, 0);
    }
}

#[test]
fn idle_sojourn_counts_from_the_first_idle_instant() {
    let timers = [1.5, 0.5];
    for v in traced(Strategy::IdleSojourn, [0.4, 0.3], timers, 4) {
        let t = timers[v.station];
        let first_idle = if v.queue_on_arrival == 0 {
            v.start
        } else {
            v.first_emptied.unwrap()
        };
        let last_service = v.service_ends.last().copied().unwrap_or(v.start);
        let expected = (first_idle + t).max(last_service);
        assert!((v.depart - expected).abs() < EPS, "{v:?}");
        for w in &v.waits {
            assert!((w.1 - (first_idle + t)).abs() < EPS, "{v:?}");
        }
    }
}

#[test]
fn idle_sojourn_without_traffic_departs_exactly_after_the_timer() {
    for v in traced(Strategy::IdleSojourn, [1e-12, 1e-12], [1.25, 0.75], 5) {
        let t = [1.25, 0.75][v.station];
        assert!(v.service_ends.is_empty());
        assert!((v.depart - v.start - t).abs() < EPS, "{v:?}");
    }
}

#[test]
fn empty_arrival_timer_waits_only_on_an_empty_arrival() {
    let timers = [1.5, 0.5];
    let all = traced(Strategy::EmptyArrivalTimer, [0.4, 0.3], timers, 6);
    let mut waited = 0;
    for v in &all {
        if v.queue_on_arrival > 0 {
            assert!(v.waits.is_empty(), "{v:?}");
        } else {
            assert_eq!(v.waits.len(), 1, "{v:?}");
            let w = v.waits[0];
            assert!((w.0 - v.start).abs() < EPS && (w.1 - v.start - timers[v.station]).abs() < EPS);
            // After the wait: either nothing came, or a busy period that
            // ends the visit without a second wait.
            let end = v.service_ends.last().copied().unwrap_or(w.2);
            assert!((v.depart - end).abs() < EPS, "{v:?}");
            waited += 1;
        }
        assert_eq!(v.queue_on_departure, 0);
    }
    assert!(waited > 0 && waited < all.len());
}

fn long_run(strategy: Strategy, seed: u64, events: u64) -> pollinglab_core::SimEstimate {
    let m = model(strategy, [0.3, 0.2], [1.0, 0.5], det(0.5));
    run(&SimConfig::new(m, seed, Horizon::Events(events))).unwrap()
}

#[test]
fn conservation_laws_hold_in_simulation() {
    let lambda = [0.3, 0.2];
    for s in Strategy::ALL {
        let est = long_run(s, 11, 2_000_000);
        // Little: L_i = λ_i (E D_i + E S_i).
        for (i, st) in est.stations.iter().enumerate() {
            let little = lambda[i] * (st.delay.mean + 1.0);
            assert!(
                (st.mean_in_system - little).abs() < 0.02 * little,
                "{s} station {i}"
            );
        }
        // E C = (r0 + Σ f_i) / (1 - ρ0).
        let f: f64 = est.stations.iter().map(|s| s.f).sum();
        let cycle = (1.0 + f) / 0.5;
        assert!(
            (est.mean_cycle - cycle).abs() < 0.01 * cycle,
            "{s}: {} vs {cycle}",
            est.mean_cycle
        );
        // E V = ρ0 D̄ + Σ λ_i E S_i² / 2.
        let work = 0.5 * est.d_bar.mean + (0.3 + 0.2);
        assert!(
            (est.mean_workload - work).abs() < 0.02 * work,
            "{s}: {} vs {work}",
            est.mean_workload
        );
    }
}

#[test]
fn runs_are_reproducible() {
    let a = long_run(Strategy::IdleSojourn, 7, 300_000);
    let b = long_run(Strategy::IdleSojourn, 7, 300_000);
    let c = long_run(Strategy::IdleSojourn, 8, 300_000);
    assert_eq!(a, b);
    assert_ne!(a.d_bar, c.d_bar);
}

#[test]
fn simulation_brackets_the_analytic_delay() {
    let tol = Tolerances::default();
    for s in [
        Strategy::Exhaustive,
        Strategy::MinimumSojourn,
        Strategy::IdleSojourn,
        Strategy::EmptyArrivalTimer,
    ] {
        let m = model(s, [0.3, 0.2], [1.0, 0.5], det(0.5));
        let exact = analyze(&m.validate().unwrap(), &tol).unwrap().report.d_bar;
        let est = run(&SimConfig::new(m, 100, Horizon::Events(3_000_000))).unwrap();
        // The 99% interval misses 1% of the time; a fixed seed makes the
        // outcome reproducible and the 1.5 factor keeps it clear of the edge.
        assert!(
            (est.d_bar.mean - exact).abs() <= 1.5 * est.d_bar.half_width,
            "{s}: {} ± {} vs {exact}",
            est.d_bar.mean,
            est.d_bar.half_width
        );
    }
}

#[test]
fn short_horizons_are_refused() {
    let m = model(Strategy::Exhaustive, [0.3, 0.2], [0.0, 0.0], det(0.5));
    let err = run(&SimConfig::new(m, 1, Horizon::Events(1000))).unwrap_err();
    assert_eq!(err.kind(), pollinglab_core::ErrorKind::Validation);
}
