//! Mean average queueing delay `D̄ = Σ (ρ_i/ρ0) E D_i`.
//!
//! Two closed forms are implemented: one for Strategy III with any number of
//! stations, and one for two stations under Strategies II to IV. Both are
//! evaluated term by term so that reports show which summand moved.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PollingModel, Strategy, ValidatedModel};
use crate::quantities::{quantities, QuantitySet};
use crate::tolerances::Tolerances;

/// Largest accepted gap between the two routes to `D̄ - D̄^exh`.
const RECONCILIATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// No waiting: the pseudo-conservation closed form.
    Exhaustive,
    /// Strategy III with `N` stations.
    GeneralStations,
    /// Two stations, Strategies II to IV.
    TwoStations,
}

/// One named summand of a delay formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

fn term(name: &str, value: f64) -> Term {
    Term {
        name: name.to_string(),
        value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `E V = ρ0 D̄ + Σ ρ_i b_i^(2) / (2 b_i)`.
    pub expected_workload: f64,
    /// `q = r0 / (r0 + f0)`: probability the server is switching given idle.
    pub switching_given_idle: f64,
    pub mean_cycle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub strategy: Strategy,
    pub formula: Formula,
    pub d_bar: f64,
    pub terms: Vec<Term>,
    pub d_exhaustive: f64,
    /// `D̄ - D̄^exh`.
    pub delta: f64,
    pub diagnostics: Diagnostics,
}

/// Everything an analytic evaluation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub model: PollingModel,
    pub quantities: QuantitySet,
    pub report: DelayReport,
    pub tolerances: Tolerances,
}

/// Quantities and delay for the model's own strategy.
pub fn analyze(model: &ValidatedModel, tol: &Tolerances) -> Result<Analysis> {
    model.require_analytic()?;
    let s = quantities(model, tol)?;
    let report = match model.strategy() {
        Strategy::Exhaustive | Strategy::IdleSojourn => delay_strategy_iii(model, &s)?,
        Strategy::MinimumSojourn | Strategy::EmptyArrivalTimer => delay_two_station(model, &s)?,
        Strategy::IdleCredit => return Err(Error::unsupported("strategy I")),
    };
    Ok(Analysis {
        model: model.model().clone(),
        quantities: s,
        report,
        tolerances: *tol,
    })
}

fn load_square_sum(model: &ValidatedModel) -> f64 {
    (0..model.station_count())
        .map(|i| model.rho(i) * model.rho(i))
        .sum()
}

fn service_term(model: &ValidatedModel) -> f64 {
    let sum: f64 = (0..model.station_count())
        .map(|i| model.lambda(i) * model.b2(i))
        .sum();
    sum / (2.0 * (1.0 - model.rho0()))
}

/// `D̄^exh = Σλ_i b_i^(2) / (2(1-ρ0)) + r0(ρ0² - Σρ_i²) / (2ρ0(1-ρ0)) + r0^(2) / (2 r0)`.
pub fn exhaustive_delay(model: &ValidatedModel) -> f64 {
    let (rho0, r0) = (model.rho0(), model.r0());
    service_term(model)
        + r0 * (rho0 * rho0 - load_square_sum(model)) / (2.0 * rho0 * (1.0 - rho0))
        + model.r02() / (2.0 * r0)
}

fn check_shape(model: &ValidatedModel, s: &QuantitySet) -> Result<()> {
    if s.stations.len() != model.station_count() {
        return Err(Error::invalid("quantity set does not match the model"));
    }
    if model.r0() <= 0.0 {
        return Err(Error::unsupported("analytic delay requires r0 > 0"));
    }
    Ok(())
}

/// Strategy III delay for `N` stations. With all `f_i = 0` it is the
/// exhaustive delay.
pub fn delay_strategy_iii(model: &ValidatedModel, s: &QuantitySet) -> Result<DelayReport> {
    check_shape(model, s)?;
    let n = model.station_count();
    let (rho0, r0, f0) = (model.rho0(), model.r0(), s.f0);
    let rho = |i: usize| model.rho(i);
    let waiting: f64 = (0..n).map(|i| s.f(i) * (rho0 - rho(i))).sum();
    let mut pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            pairs += s.f(i) * s.f(j) * (rho0 - rho(i) - rho(j));
        }
    }
    let recurrence: f64 = (0..n).map(|i| s.f(i) * s.w(i) * (rho0 - rho(i))).sum();
    let correction: f64 = (0..n).map(|i| s.f(i) * rho(i) * (rho0 - rho(i))).sum();
    let terms = alloc::vec![
        term("service", service_term(model)),
        term(
            "cycle_load",
            (r0 + f0) * (rho0 * rho0 - load_square_sum(model)) / (2.0 * rho0 * (1.0 - rho0)),
        ),
        term(
            "switching",
            (0.5 * rho0 * model.r02() + r0 * waiting) / (rho0 * (r0 + f0)),
        ),
        term("waiting", (recurrence + pairs) / (rho0 * (r0 + f0))),
        term("correction", -correction / (rho0 * (1.0 - rho0))),
    ];
    let formula = if f0 == 0.0 && model.strategy() == Strategy::Exhaustive {
        Formula::Exhaustive
    } else {
        Formula::GeneralStations
    };
    finish(model, s, formula, terms)
}

/// Two-station delay for Strategies II to IV (also valid for III).
pub fn delay_two_station(model: &ValidatedModel, s: &QuantitySet) -> Result<DelayReport> {
    check_shape(model, s)?;
    if model.station_count() != 2 {
        return Err(Error::unsupported("the two-station formula needs N = 2"));
    }
    let (rho0, r0, f0) = (model.rho0(), model.r0(), s.f0);
    let (rho1, rho2) = (model.rho(0), model.rho(1));
    let terms = alloc::vec![
        term("service", service_term(model)),
        term("cycle_load", r0 * rho1 * rho2 / (rho0 * (1.0 - rho0))),
        term("switching", model.r02() / (2.0 * (r0 + f0))),
        term("waiting_1", wait_term_1(model, s)),
        term("waiting_2", wait_term_2(model, s)),
    ];
    finish(model, s, Formula::TwoStations, terms)
}

fn wait_term_1(model: &ValidatedModel, s: &QuantitySet) -> f64 {
    model.rho(1) * s.f(0) * (model.r(0) + s.r_tilde(1) + s.w(0))
        / (model.rho0() * (model.r0() + s.f0))
}

fn wait_term_2(model: &ValidatedModel, s: &QuantitySet) -> f64 {
    model.rho(0) * s.f(1) * (s.r_tilde(0) + model.r(1) + s.w(1))
        / (model.rho0() * (model.r0() + s.f0))
}

fn finish(
    model: &ValidatedModel,
    s: &QuantitySet,
    formula: Formula,
    terms: Vec<Term>,
) -> Result<DelayReport> {
    let d_bar: f64 = terms.iter().map(|t| t.value).sum();
    let d_exhaustive = exhaustive_delay(model);
    let delta = if model.station_count() == 2 {
        delta_delay(model, s, d_bar - d_exhaustive)?
    } else {
        d_bar - d_exhaustive
    };
    Ok(DelayReport {
        strategy: s.strategy,
        formula,
        d_bar,
        terms,
        d_exhaustive,
        delta,
        diagnostics: workload_diagnostics(model, s, d_bar),
    })
}

/// Two-station `ΔD̄` from its own closed form, checked against `expected`
/// (normally `D̄ - D̄^exh`).
pub fn delta_delay(model: &ValidatedModel, s: &QuantitySet, expected: f64) -> Result<f64> {
    if model.station_count() != 2 {
        return Err(Error::unsupported("the delay decomposition needs N = 2"));
    }
    let (r0, r02) = (model.r0(), model.r02());
    let delta = -r02 / (2.0 * r0)
        + r02 / (2.0 * (r0 + s.f0))
        + wait_term_1(model, s)
        + wait_term_2(model, s);
    if (delta - expected).abs() > RECONCILIATION * expected.abs().max(1.0) {
        return Err(Error::ReconciliationFailure {
            left: delta,
            right: expected,
        });
    }
    Ok(delta)
}

/// Workload identity and idle-time split for a computed delay.
pub fn workload_diagnostics(model: &ValidatedModel, s: &QuantitySet, d_bar: f64) -> Diagnostics {
    let residual: f64 = (0..model.station_count())
        .map(|i| model.rho(i) * model.b2(i) / (2.0 * model.b(i)))
        .sum();
    Diagnostics {
        expected_workload: model.rho0() * d_bar + residual,
        switching_given_idle: model.r0() / (model.r0() + s.f0),
        mean_cycle: s.mean_cycle,
    }
}
