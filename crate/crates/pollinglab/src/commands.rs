//! The work behind each subcommand, independent of argument parsing.
//!
//! Every function returns the artifact it would emit; rendering to JSON or
//! CSV is left to the caller. Parallel work runs on the current rayon pool.

use pollinglab_core::decision::{
    consistent, optimize_timers_with, worth_waiting, OptimizerOptions, TimerOptimum, TimerSearch,
};
use pollinglab_core::sim::{self, TraceEvent};
use pollinglab_core::{
    analyze as analyze_model, Analysis, Horizon, Scenario, SimConfig, SimEstimate, Strategy,
    ValidatedModel, WorthWaitingVerdict,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{unix_now, Envelope, RunManifest};
use crate::parallel::RayonEvaluator;
use crate::sweep::{timers_with_t1, Sweep, SweepRange, SweepRow};

/// Options shared by every command.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock timestamps in the manifest. Off by default so that
    /// repeated runs produce identical bytes.
    pub timestamps: bool,
}

impl RunOptions {
    fn start(&self) -> Option<f64> {
        self.timestamps.then(unix_now)
    }
}

fn model_for(config: &LoadedConfig, strategy: Option<Strategy>) -> CliResult<ValidatedModel> {
    let mut model = config.model();
    if let Some(s) = strategy {
        model.strategy = s;
    }
    Ok(model.validate()?)
}

pub fn analyze(
    config: &LoadedConfig,
    strategy: Option<Strategy>,
    run: &RunOptions,
) -> CliResult<Envelope<Analysis>> {
    let started = run.start();
    let model = model_for(config, strategy)?;
    let result = analyze_model(&model, &config.tolerances())?;
    let mut manifest = RunManifest::new("analyze", config, Vec::new());
    manifest.stamp(started);
    Ok(Envelope { manifest, result })
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub strategy: Option<Strategy>,
    pub seed: u64,
    pub horizon: Horizon,
    pub warmup: f64,
    pub batches: usize,
    /// Independent runs with seeds `seed, seed + 1, ...`, pooled.
    pub replications: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            strategy: None,
            seed: 1,
            horizon: Horizon::Events(1_000_000),
            warmup: 0.1,
            batches: 30,
            replications: 1,
        }
    }
}

impl SimulateOptions {
    fn sim_config(&self, config: &LoadedConfig, seed: u64) -> CliResult<SimConfig> {
        let mut model = config.model();
        if let Some(s) = self.strategy {
            model.strategy = s;
        }
        let c = SimConfig {
            model,
            seed,
            horizon: self.horizon,
            warmup: self.warmup,
            batches: self.batches,
        };
        c.validate()?;
        Ok(c)
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64)
            .map(|k| self.seed.wrapping_add(k))
            .collect()
    }
}

pub fn simulate(
    config: &LoadedConfig,
    opts: &SimulateOptions,
    run: &RunOptions,
) -> CliResult<Envelope<SimEstimate>> {
    let started = run.start();
    if opts.replications == 0 {
        return Err(CliError::usage("at least one replication is needed"));
    }
    let seeds = opts.seeds();
    let configs = seeds
        .iter()
        .map(|&s| opts.sim_config(config, s))
        .collect::<CliResult<Vec<_>>>()?;
    let runs = configs
        .par_iter()
        .map(sim::run)
        .collect::<Result<Vec<_>, _>>()?;
    let result = if runs.len() == 1 {
        runs.into_iter().next().unwrap()
    } else {
        sim::pool(&runs)?
    };
    let mut manifest = RunManifest::new("simulate", config, seeds);
    manifest.stamp(started);
    Ok(Envelope { manifest, result })
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub scenario: Option<Scenario>,
    /// Strategies to judge; empty means the config's strategy when it has a
    /// criterion, otherwise II, III and IV.
    pub strategies: Vec<Strategy>,
    /// Also run the optimizer and report whether it agrees.
    pub confirm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub verdict: WorthWaitingVerdict,
    /// Optimum over the scenario's timer axis, without its search trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<TimerOptimum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
}

const CRITERION_STRATEGIES: [Strategy; 3] = [
    Strategy::MinimumSojourn,
    Strategy::IdleSojourn,
    Strategy::EmptyArrivalTimer,
];

pub fn check(
    config: &LoadedConfig,
    opts: &CheckOptions,
    run: &RunOptions,
) -> CliResult<Envelope<Vec<CheckOutcome>>> {
    let started = run.start();
    let model = config.model().validate()?;
    let tol = config.tolerances();
    let scenario = opts.scenario.unwrap_or_else(|| {
        let all_zero_but_first = (1..model.station_count()).all(|i| model.timer(i) == 0.0);
        if all_zero_but_first {
            Scenario::T2Zero
        } else {
            Scenario::SymmetricEqualTimers
        }
    });
    let strategies = if !opts.strategies.is_empty() {
        opts.strategies.clone()
    } else if CRITERION_STRATEGIES.contains(&model.strategy()) {
        vec![model.strategy()]
    } else {
        CRITERION_STRATEGIES.to_vec()
    };
    let options = OptimizerOptions {
        search: TimerSearch::for_scenario(scenario),
        ..OptimizerOptions::default()
    };
    let mut result = Vec::with_capacity(strategies.len());
    for s in strategies {
        let verdict = worth_waiting(&model, s, scenario)?;
        let (optimum, agrees) = if opts.confirm {
            let mut o = optimize_timers_with(&model, s, &options, &tol, &RayonEvaluator)?;
            o.trace.clear();
            let agrees = consistent(&verdict, &o);
            (Some(o), Some(agrees))
        } else {
            (None, None)
        };
        result.push(CheckOutcome {
            verdict,
            optimum,
            consistent: agrees,
        });
    }
    let mut manifest = RunManifest::new("check", config, Vec::new());
    manifest.stamp(started);
    Ok(Envelope { manifest, result })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OptimizeOptions {
    pub strategy: Option<Strategy>,
    /// Defaults to both timers for two stations and one common timer
    /// otherwise.
    pub search: Option<TimerSearch>,
    pub grid_points: Option<usize>,
    pub upper: Option<f64>,
    pub rel_tol: Option<f64>,
}

pub fn optimize(
    config: &LoadedConfig,
    opts: &OptimizeOptions,
    run: &RunOptions,
) -> CliResult<Envelope<TimerOptimum>> {
    let started = run.start();
    let model = config.model().validate()?;
    let strategy = opts.strategy.unwrap_or(model.strategy());
    let defaults = OptimizerOptions::default();
    let search = opts.search.unwrap_or(if model.station_count() == 2 {
        TimerSearch::Both
    } else {
        TimerSearch::Equal
    });
    let options = OptimizerOptions {
        search,
        grid_points: opts.grid_points.unwrap_or(defaults.grid_points),
        upper: opts.upper,
        rel_tol: opts.rel_tol.unwrap_or(defaults.rel_tol),
        ..defaults
    };
    let tol = config.tolerances();
    let result = optimize_timers_with(&model, strategy, &options, &tol, &RayonEvaluator)?;
    let mut manifest = RunManifest::new("optimize", config, Vec::new());
    manifest.stamp(started);
    Ok(Envelope { manifest, result })
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub range: SweepRange,
    /// Curves to compute; duplicates are dropped and the output follows the
    /// order exhaustive, I, II, III, IV.
    pub strategies: Vec<Strategy>,
    /// Seed and horizon of the Strategy I simulations.
    pub seed: u64,
    pub events: u64,
}

pub fn sweep(config: &LoadedConfig, opts: &SweepOptions, run: &RunOptions) -> CliResult<Sweep> {
    let started = run.start();
    opts.range.check()?;
    if opts.strategies.is_empty() {
        return Err(CliError::usage("no strategies to sweep"));
    }
    let strategies: Vec<Strategy> = Strategy::ALL
        .into_iter()
        .filter(|s| opts.strategies.contains(s))
        .collect();
    let base = config.model().validate()?;
    let tol = config.tolerances();
    let jobs: Vec<(f64, Strategy)> = opts
        .range
        .values()
        .into_iter()
        .flat_map(|t| strategies.iter().map(move |&s| (t, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(t1, strategy)| -> CliResult<SweepRow> {
            let model = base
                .with_strategy(strategy)?
                .with_timers(&timers_with_t1(&base, t1))?;
            if strategy == Strategy::IdleCredit {
                let c = SimConfig::new(
                    model.model().clone(),
                    opts.seed,
                    Horizon::Events(opts.events),
                );
                let est = sim::run(&c)?;
                Ok(SweepRow {
                    t1,
                    strategy,
                    dbar: est.d_bar.mean,
                    ci_lo: Some(est.d_bar.lo()),
                    ci_hi: Some(est.d_bar.hi()),
                })
            } else {
                let d = analyze_model(&model, &tol)?.report.d_bar;
                Ok(SweepRow {
                    t1,
                    strategy,
                    dbar: d,
                    ci_lo: None,
                    ci_hi: None,
                })
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let seeds = if strategies.contains(&Strategy::IdleCredit) {
        vec![opts.seed]
    } else {
        Vec::new()
    };
    let mut manifest = RunManifest::new("sweep", config, seeds);
    manifest.stamp(started);
    Ok(Sweep { manifest, rows })
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub strategy: Option<Strategy>,
    pub seed: u64,
    pub max_events: usize,
}

pub fn trace(
    config: &LoadedConfig,
    opts: &TraceOptions,
    run: &RunOptions,
) -> CliResult<(RunManifest, Vec<TraceEvent>)> {
    let started = run.start();
    let mut model = config.model();
    if let Some(s) = opts.strategy {
        model.strategy = s;
    }
    let c = SimConfig::new(model, opts.seed, Horizon::Events(opts.max_events as u64));
    let events = sim::trace(&c, opts.max_events)?;
    let mut manifest = RunManifest::new("trace", config, vec![opts.seed]);
    manifest.stamp(started);
    Ok((manifest, events))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

/// The event log as text: manifest comment first, then one event per line.
pub fn trace_text(manifest: &RunManifest, events: &[TraceEvent]) -> String {
    let mut out = format!(
        "# manifest {}\n",
        serde_json::to_string(manifest).expect("manifest serializes")
    );
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
