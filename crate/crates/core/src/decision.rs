//! Whether waiting pays off, and which timers minimise the delay.
//!
//! The closed-form verdicts cover two stations in two scenarios: only station
//! 1 waits (`T_2 = 0`), or both wait equally long in a symmetric model. The
//! optimizer answers the general question numerically.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::delay::{analyze, exhaustive_delay};
use crate::error::{Error, Result};
use crate::model::{PollingModel, Strategy, ValidatedModel};
use crate::numerics::cond_switchover_given_arrivals;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Only station 1 may wait.
    T2Zero,
    /// Symmetric model with `T_1 = T_2`.
    SymmetricEqualTimers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorthWaitingVerdict {
    pub strategy: Strategy,
    pub scenario: Scenario,
    pub criterion_value: f64,
    /// `criterion_value > 0`.
    pub worth_waiting: bool,
    pub note: Option<String>,
}

impl WorthWaitingVerdict {
    fn new(strategy: Strategy, scenario: Scenario, value: f64, note: Option<&str>) -> Self {
        WorthWaitingVerdict {
            strategy,
            scenario,
            criterion_value: value,
            worth_waiting: value > 0.0,
            note: note.map(ToString::to_string),
        }
    }
}

fn require_two(model: &ValidatedModel) -> Result<()> {
    if model.station_count() == 2 {
        Ok(())
    } else {
        Err(Error::unsupported("worth-waiting criteria need N = 2"))
    }
}

fn require_criterion_strategy(strategy: Strategy) -> Result<()> {
    match strategy {
        Strategy::MinimumSojourn | Strategy::IdleSojourn | Strategy::EmptyArrivalTimer => Ok(()),
        other => Err(Error::unsupported(format!(
            "no worth-waiting criterion for strategy {other}"
        ))),
    }
}

/// `E[R_2 | no arrival at station 1 during R_2]`.
fn r_tilde_2_iv(model: &ValidatedModel) -> Result<f64> {
    cond_switchover_given_arrivals(model.switchover(1), model.lambda(0), 0)
}

const DETERMINISTIC_NOTE: &str = "deterministic switchovers: reduces to rho_1 > rho_2";

/// Worth waiting at station 1 with `T_2 = 0`.
pub fn worth_waiting_t2_zero(
    model: &ValidatedModel,
    strategy: Strategy,
) -> Result<WorthWaitingVerdict> {
    require_two(model)?;
    require_criterion_strategy(strategy)?;
    let (rho0, rho1, rho2) = (model.rho0(), model.rho(0), model.rho(1));
    let (r0, r02) = (model.r0(), model.r02());
    let scenario = Scenario::T2Zero;
    if r0 <= 0.0 {
        return Err(Error::ZeroSwitchover);
    }
    if strategy == Strategy::IdleSojourn {
        let value = r02 / (2.0 * r0 * r0) - rho2 * (1.0 - rho2) / (rho0 * (1.0 - rho0));
        return Ok(WorthWaitingVerdict::new(strategy, scenario, value, None));
    }
    if model.all_switchovers_deterministic() {
        // r0^(2) = r0^2 and r~_2 = r_2: the criterion is exactly (ρ1 - ρ2) / (2ρ0).
        let value = (rho1 - rho2) / (2.0 * rho0);
        return Ok(WorthWaitingVerdict::new(
            strategy,
            scenario,
            value,
            Some(DETERMINISTIC_NOTE),
        ));
    }
    let value = r02 / (2.0 * r0 * (model.r(0) + r_tilde_2_iv(model)?)) - rho2 / rho0;
    Ok(WorthWaitingVerdict::new(strategy, scenario, value, None))
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Worth waiting with `T_1 = T_2` in a symmetric two-station model.
///
/// Strategy III only needs `ρ_1 = ρ_2`; Strategies II and IV need identical
/// stations.
pub fn worth_waiting_symmetric(
    model: &ValidatedModel,
    strategy: Strategy,
) -> Result<WorthWaitingVerdict> {
    require_two(model)?;
    require_criterion_strategy(strategy)?;
    let scenario = Scenario::SymmetricEqualTimers;
    let (rho0, rho1) = (model.rho0(), model.rho(0));
    if !same(rho1, model.rho(1)) {
        return Err(Error::AsymmetricModel(format!(
            "rho_1 = {rho1} differs from rho_2 = {}",
            model.rho(1)
        )));
    }
    let (r0, r02) = (model.r0(), model.r02());
    if r0 <= 0.0 {
        return Err(Error::ZeroSwitchover);
    }
    if strategy == Strategy::IdleSojourn {
        let value = r02 / (r0 * r0) - (1.0 - rho1) / (1.0 - rho0);
        return Ok(WorthWaitingVerdict::new(strategy, scenario, value, None));
    }
    let (a, b) = (&model.stations()[0], &model.stations()[1]);
    if !(same(a.lambda, b.lambda) && a.service == b.service && a.switchover == b.switchover) {
        return Err(Error::AsymmetricModel(
            "strategies II and IV need identical arrival rates, service and switchover distributions".into(),
        ));
    }
    if model.all_switchovers_deterministic() {
        let note = "deterministic switchovers: never worth waiting";
        return Ok(WorthWaitingVerdict::new(
            strategy,
            scenario,
            0.0,
            Some(note),
        ));
    }
    let value = r02 / (r0 * (model.r(0) + r_tilde_2_iv(model)?)) - 1.0;
    Ok(WorthWaitingVerdict::new(strategy, scenario, value, None))
}

/// Evaluates either criterion.
pub fn worth_waiting(
    model: &ValidatedModel,
    strategy: Strategy,
    scenario: Scenario,
) -> Result<WorthWaitingVerdict> {
    match scenario {
        Scenario::T2Zero => worth_waiting_t2_zero(model, strategy),
        Scenario::SymmetricEqualTimers => worth_waiting_symmetric(model, strategy),
    }
}

/// Which timers the optimizer varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerSearch {
    /// `(T_1, T_2)` independently; two stations only.
    Both,
    /// `T_1` with every other timer zero.
    FirstOnly,
    /// One common timer for all stations.
    Equal,
}

impl TimerSearch {
    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::T2Zero => TimerSearch::FirstOnly,
            Scenario::SymmetricEqualTimers => TimerSearch::Equal,
        }
    }

    fn dims(self) -> usize {
        match self {
            TimerSearch::Both => 2,
            _ => 1,
        }
    }

    fn timers(self, x: &[f64], n: usize) -> Vec<f64> {
        match self {
            TimerSearch::Both => x.to_vec(),
            TimerSearch::FirstOnly => {
                let mut t = vec![0.0; n];
                t[0] = x[0];
                t
            }
            TimerSearch::Equal => vec![x[0]; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub search: TimerSearch,
    /// Grid points per axis, including 0 and the upper bound.
    pub grid_points: usize,
    /// Upper bound of every timer; defaults to `10 E C^exh`.
    pub upper: Option<f64>,
    /// Relative tolerance of the golden-section refinement.
    pub rel_tol: f64,
    /// Times the bound is doubled while the grid minimum sits on it.
    pub max_doublings: usize,
    /// Cap on refinement evaluations.
    pub max_refine_evaluations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            search: TimerSearch::Both,
            grid_points: 41,
            upper: None,
            rel_tol: 1e-4,
            max_doublings: 3,
            max_refine_evaluations: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Grid,
    Refine,
}

/// One evaluated point. Failed points carry the error and no delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub stage: Stage,
    pub timers: Vec<f64>,
    pub d_bar: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimerOptimum {
    pub strategy: Strategy,
    pub search: TimerSearch,
    pub argmin: Vec<f64>,
    pub d_min: f64,
    pub d_exhaustive: f64,
    /// `D̄^exh - d_min`, or 0 when no timer beats exhaustive service.
    pub improvement: f64,
    /// Final upper bound of the search box.
    pub upper: f64,
    /// Whether the minimum sits on the final upper bound.
    pub at_boundary: bool,
    pub evaluations: usize,
    pub failures: usize,
    pub trace: Vec<SearchPoint>,
}

/// Evaluates `D̄` at a batch of timer vectors. Front ends may parallelise;
/// results must come back in input order.
pub trait PointEvaluator {
    fn evaluate(
        &self,
        model: &ValidatedModel,
        tol: &Tolerances,
        points: &[Vec<f64>],
    ) -> Vec<Result<f64>>;
}

/// Evaluates points one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialEvaluator;

impl PointEvaluator for SerialEvaluator {
    fn evaluate(
        &self,
        model: &ValidatedModel,
        tol: &Tolerances,
        points: &[Vec<f64>],
    ) -> Vec<Result<f64>> {
        points.iter().map(|t| delay_at(model, t, tol)).collect()
    }
}

/// Analytic `D̄` of `model` with the given timers.
pub fn delay_at(model: &ValidatedModel, timers: &[f64], tol: &Tolerances) -> Result<f64> {
    let m = model.with_timers(timers)?;
    Ok(analyze(&m, tol)?.report.d_bar)
}

/// Grid search plus cyclic golden-section refinement with the serial
/// evaluator.
pub fn optimize_timers(
    model: &ValidatedModel,
    strategy: Strategy,
    options: &OptimizerOptions,
    tol: &Tolerances,
) -> Result<TimerOptimum> {
    optimize_timers_with(model, strategy, options, tol, &SerialEvaluator)
}

/// Relative gain below which a minimum counts as "no improvement".
const NO_GAIN: f64 = 1e-12;

struct Search<'a, E: PointEvaluator + ?Sized> {
    model: &'a ValidatedModel,
    tol: &'a Tolerances,
    evaluator: &'a E,
    search: TimerSearch,
    trace: Vec<SearchPoint>,
    failures: usize,
    refine_evaluations: usize,
}

impl<E: PointEvaluator + ?Sized> Search<'_, E> {
    fn eval_batch(&mut self, stage: Stage, xs: &[Vec<f64>]) -> Vec<Option<f64>> {
        let n = self.model.station_count();
        let timers: Vec<Vec<f64>> = xs.iter().map(|x| self.search.timers(x, n)).collect();
        let results = self.evaluator.evaluate(self.model, self.tol, &timers);
        let mut out = Vec::with_capacity(xs.len());
        for (t, r) in timers.into_iter().zip(results) {
            let (d_bar, error) = match r {
                Ok(d) if d.is_finite() => (Some(d), None),
                Ok(d) => (None, Some(format!("non-finite delay {d}"))),
                Err(e) => (None, Some(e.to_string())),
            };
            if error.is_some() {
                self.failures += 1;
            }
            out.push(d_bar);
            self.trace.push(SearchPoint {
                stage,
                timers: t,
                d_bar,
                error,
            });
        }
        out
    }

    fn eval_one(&mut self, x: &[f64]) -> f64 {
        self.refine_evaluations += 1;
        self.eval_batch(Stage::Refine, &[x.to_vec()])[0].unwrap_or(f64::INFINITY)
    }

    /// Best grid point on `[0, upper]^dims`.
    fn grid(&mut self, points: usize, upper: f64) -> Option<(Vec<f64>, f64)> {
        let axis: Vec<f64> = (0..points)
            .map(|k| upper * k as f64 / (points - 1) as f64)
            .collect();
        let xs: Vec<Vec<f64>> = match self.search.dims() {
            1 => axis.iter().map(|&a| vec![a]).collect(),
            _ => axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
                .collect(),
        };
        let values = self.eval_batch(Stage::Grid, &xs);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for (x, v) in xs.into_iter().zip(values) {
            if let Some(v) = v {
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((x, v));
                }
            }
        }
        best
    }

    /// Golden-section minimisation of coordinate `axis` on `[lo, hi]`.
    fn golden(
        &mut self,
        x: &mut [f64],
        fx: &mut f64,
        axis: usize,
        (lo, hi): (f64, f64),
        rel_tol: f64,
        cap: usize,
    ) {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let scale = x[axis].abs().max(hi - lo);
        let (mut a, mut b) = (lo, hi);
        let mut probe = x.to_vec();
        let mut at = |s: &mut Self, t: f64| {
            probe[axis] = t;
            (s.eval_one(&probe), t)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, _) = at(self, c);
        let (mut fd, _) = at(self, d);
        while b - a > rel_tol * scale && self.refine_evaluations < cap {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = at(self, c).0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = at(self, d).0;
            }
        }
        let (t, ft) = if fc <= fd { (c, fc) } else { (d, fd) };
        if ft < *fx {
            x[axis] = t;
            *fx = ft;
        }
    }
}

/// As [`optimize_timers`] with a caller-supplied evaluator for the grid and
/// refinement points.
pub fn optimize_timers_with<E: PointEvaluator + ?Sized>(
    model: &ValidatedModel,
    strategy: Strategy,
    options: &OptimizerOptions,
    tol: &Tolerances,
    evaluator: &E,
) -> Result<TimerOptimum> {
    let model = model.with_strategy(strategy)?;
    model.require_analytic()?;
    if options.search == TimerSearch::Both && model.station_count() != 2 {
        return Err(Error::unsupported(
            "a two-dimensional timer search needs N = 2",
        ));
    }
    if options.grid_points < 3 {
        return Err(Error::invalid(
            "the optimizer grid needs at least 3 points per axis",
        ));
    }
    let d_exhaustive = exhaustive_delay(&model);
    let mut upper = match options.upper {
        Some(u) if u.is_finite() && u > 0.0 => u,
        Some(u) => return Err(Error::invalid(format!("timer upper bound {u}"))),
        None => 10.0 * model.r0() / (1.0 - model.rho0()),
    };
    let mut s = Search {
        model: &model,
        tol,
        evaluator,
        search: options.search,
        trace: Vec::new(),
        failures: 0,
        refine_evaluations: 0,
    };

    let mut doublings = 0;
    let (mut x, mut fx) = loop {
        let best = s.grid(options.grid_points, upper);
        let Some((x, fx)) = best else {
            return Err(Error::NoConvergence {
                iterations: s.trace.len(),
                residual: f64::INFINITY,
            });
        };
        let on_bound = x.iter().any(|&v| v >= upper);
        if on_bound && doublings < options.max_doublings {
            doublings += 1;
            upper *= 2.0;
            continue;
        }
        break (x, fx);
    };

    let step = upper / (options.grid_points - 1) as f64;
    let mut half = step;
    let cap = options.max_refine_evaluations;
    while half > options.rel_tol * x.iter().fold(step, |m, v| m.max(v.abs())) * 0.5
        && s.refine_evaluations < cap
    {
        let before = fx;
        for axis in 0..x.len() {
            let lo = (x[axis] - half).max(0.0);
            let hi = (x[axis] + half).min(upper);
            s.golden(&mut x, &mut fx, axis, (lo, hi), options.rel_tol, cap);
        }
        if x.len() == 1 || before - fx <= NO_GAIN * before.abs() {
            break;
        }
        half *= 0.5;
    }

    let at_boundary = x.iter().any(|&v| v >= upper * (1.0 - options.rel_tol));
    let (argmin, d_min, improvement) = if d_exhaustive - fx > NO_GAIN * d_exhaustive {
        (
            options.search.timers(&x, model.station_count()),
            fx,
            d_exhaustive - fx,
        )
    } else {
        (vec![0.0; model.station_count()], d_exhaustive, 0.0)
    };
    Ok(TimerOptimum {
        strategy,
        search: options.search,
        argmin,
        d_min,
        d_exhaustive,
        improvement,
        upper,
        at_boundary: improvement > 0.0 && at_boundary,
        evaluations: s.trace.len(),
        failures: s.failures,
        trace: s.trace,
    })
}

/// Result of searching for a symmetric model in which waiting pays off under
/// Strategies II and IV but not under Strategy III.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingContrast {
    pub found: bool,
    pub model: Option<PollingModel>,
    /// Verdicts for III, II and IV on the exhibited model.
    pub verdicts: Vec<WorthWaitingVerdict>,
    /// Equal-timer optima for III, II and IV on the exhibited model.
    pub optima: Vec<TimerOptimum>,
    /// Every optimizer result agrees with its verdict.
    pub confirmed: bool,
    pub candidates_checked: usize,
}

/// Scans `candidates` for the first symmetric model where the II and IV
/// verdicts are true and the III verdict is false, then confirms it with
/// the equal-timer optimizer. Candidates that fail the symmetry checks are
/// skipped.
pub fn find_waiting_contrast(
    candidates: &[ValidatedModel],
    options: &OptimizerOptions,
    tol: &Tolerances,
) -> Result<WaitingContrast> {
    const ORDER: [Strategy; 3] = [
        Strategy::IdleSojourn,
        Strategy::MinimumSojourn,
        Strategy::EmptyArrivalTimer,
    ];
    let mut checked = 0;
    for model in candidates {
        checked += 1;
        let verdicts: Result<Vec<_>> = ORDER
            .iter()
            .map(|&s| worth_waiting_symmetric(model, s))
            .collect();
        let Ok(verdicts) = verdicts else { continue };
        if verdicts[0].worth_waiting || !verdicts[1].worth_waiting || !verdicts[2].worth_waiting {
            continue;
        }
        let opts = OptimizerOptions {
            search: TimerSearch::Equal,
            ..*options
        };
        let optima = ORDER
            .iter()
            .map(|&s| optimize_timers(model, s, &opts, tol))
            .collect::<Result<Vec<_>>>()?;
        let confirmed = verdicts
            .iter()
            .zip(&optima)
            .all(|(v, o)| v.worth_waiting == (o.improvement > CONSISTENCY * o.d_exhaustive));
        return Ok(WaitingContrast {
            found: true,
            model: Some(model.model().clone()),
            verdicts,
            optima,
            confirmed,
            candidates_checked: checked,
        });
    }
    Ok(WaitingContrast {
        found: false,
        model: None,
        verdicts: Vec::new(),
        optima: Vec::new(),
        confirmed: false,
        candidates_checked: checked,
    })
}

/// Relative improvement that counts as "the optimizer found a gain" when
/// comparing against a verdict.
pub const CONSISTENCY: f64 = 1e-6;

/// Whether a verdict and an optimum agree: a positive criterion goes with a
/// relative improvement above [`CONSISTENCY`].
pub fn consistent(verdict: &WorthWaitingVerdict, optimum: &TimerOptimum) -> bool {
    verdict.worth_waiting == (optimum.improvement > CONSISTENCY * optimum.d_exhaustive)
}
