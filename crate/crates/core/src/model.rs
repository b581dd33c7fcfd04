//! Polling-system specifications.
//!
//! A [`PollingModel`] is a cyclic list of stations plus a wait-and-see
//! strategy. [`PollingModel::validate`] checks stability and fills in the
//! derived loads and switchover moments; [`ValidatedModel::require_analytic`]
//! additionally checks that the closed-form machinery covers the model.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Message length distribution of a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceSpec {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl ServiceSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceSpec::Exponential { rate } => 1.0 / rate,
            ServiceSpec::Deterministic { value } => value,
            ServiceSpec::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            ServiceSpec::Exponential { rate } => 2.0 / (rate * rate),
            ServiceSpec::Deterministic { value } => value * value,
            ServiceSpec::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
        }
    }

    /// Service rate when the distribution is exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match *self {
            ServiceSpec::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ServiceSpec::Exponential { rate } => rate.is_finite() && rate > 0.0,
            ServiceSpec::Deterministic { value } => value.is_finite() && value >= 0.0,
            ServiceSpec::Gamma { shape, rate } => {
                shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("service distribution {self:?}")))
        }
    }
}

/// Switchover time distribution out of a station.
///
/// The family is closed so that every Poisson transform
/// `∫ e^{-λx} (λx)^j / j! dF(x)` has a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchoverSpec {
    Deterministic {
        value: f64,
    },
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Finite distribution given as `(value, weight)` pairs.
    Mixture {
        points: Vec<(f64, f64)>,
    },
}

impl SwitchoverSpec {
    pub fn mean(&self) -> f64 {
        match self {
            SwitchoverSpec::Deterministic { value } => *value,
            SwitchoverSpec::Exponential { rate } => 1.0 / rate,
            SwitchoverSpec::Gamma { shape, rate } => shape / rate,
            SwitchoverSpec::Mixture { points } => points.iter().map(|&(v, w)| v * w).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            SwitchoverSpec::Deterministic { value } => value * value,
            SwitchoverSpec::Exponential { rate } => 2.0 / (rate * rate),
            SwitchoverSpec::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
            SwitchoverSpec::Mixture { points } => points.iter().map(|&(v, w)| v * v * w).sum(),
        }
    }

    /// True when the distribution is a point mass.
    pub fn is_deterministic(&self) -> bool {
        match self {
            SwitchoverSpec::Deterministic { .. } => true,
            SwitchoverSpec::Mixture { points } => {
                let mut support = points.iter().filter(|p| p.1 > 0.0).map(|p| p.0);
                match support.next() {
                    Some(first) => support.all(|v| v == first),
                    None => true,
                }
            }
            _ => false,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            SwitchoverSpec::Deterministic { value } => value.is_finite() && *value >= 0.0,
            SwitchoverSpec::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            SwitchoverSpec::Gamma { shape, rate } => {
                shape.is_finite() && rate.is_finite() && *shape > 0.0 && *rate > 0.0
            }
            SwitchoverSpec::Mixture { points } => {
                let total: f64 = points.iter().map(|p| p.1).sum();
                !points.is_empty()
                    && points
                        .iter()
                        .all(|&(v, w)| v.is_finite() && w.is_finite() && v >= 0.0 && w >= 0.0)
                    && (total - 1.0).abs() <= 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("switchover distribution {self:?}")))
        }
    }
}

/// Wait-and-see strategy shared by all stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Serve until empty, then switch. Timers are ignored.
    #[serde(rename = "exhaustive", alias = "Exhaustive")]
    Exhaustive,
    /// Strategy I: an idle credit of `T_i` per visit, spendable in pieces.
    #[serde(rename = "I")]
    IdleCredit,
    /// Strategy II: stay at least `T_i` after arriving at the station.
    #[serde(rename = "II")]
    MinimumSojourn,
    /// Strategy III: stay at least `T_i` after first becoming idle.
    #[serde(rename = "III")]
    IdleSojourn,
    /// Strategy IV: wait at most `T_i` for one message, only when the
    /// station was empty on arrival.
    #[serde(rename = "IV")]
    EmptyArrivalTimer,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Exhaustive,
        Strategy::IdleCredit,
        Strategy::MinimumSojourn,
        Strategy::IdleSojourn,
        Strategy::EmptyArrivalTimer,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::IdleCredit => "I",
            Strategy::MinimumSojourn => "II",
            Strategy::IdleSojourn => "III",
            Strategy::EmptyArrivalTimer => "IV",
        }
    }

    /// Parses the labels produced by [`Strategy::label`] (case-insensitive).
    pub fn from_label(s: &str) -> Option<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.label().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    /// Poisson arrival rate.
    pub lambda: f64,
    pub service: ServiceSpec,
    /// Switchover from this station to the next one.
    pub switchover: SwitchoverSpec,
    /// Wait-and-see parameter `T_i`.
    #[serde(default)]
    pub timer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollingModel {
    pub stations: Vec<StationSpec>,
    pub strategy: Strategy,
}

impl PollingModel {
    pub fn new(stations: Vec<StationSpec>, strategy: Strategy) -> Self {
        PollingModel { stations, strategy }
    }

    /// Checks parameters and stability and computes the derived scalars.
    pub fn validate(&self) -> Result<ValidatedModel> {
        if self.stations.is_empty() {
            return Err(Error::invalid("a polling model needs at least one station"));
        }
        let mut rho = Vec::with_capacity(self.stations.len());
        for (i, st) in self.stations.iter().enumerate() {
            if !(st.lambda.is_finite() && st.lambda > 0.0) {
                return Err(Error::invalid(format!(
                    "station {i}: arrival rate must be > 0"
                )));
            }
            if !(st.timer.is_finite() && st.timer >= 0.0) {
                return Err(Error::invalid(format!("station {i}: timer must be >= 0")));
            }
            st.service.check()?;
            st.switchover.check()?;
            let rho_i = st.lambda * st.service.mean();
            if rho_i >= 1.0 {
                return Err(Error::Unstable {
                    rho0: rho_i.max(self.total_load()),
                });
            }
            rho.push(rho_i);
        }
        let rho0: f64 = rho.iter().sum();
        if rho0 >= 1.0 {
            return Err(Error::Unstable { rho0 });
        }
        if rho0 <= 0.0 {
            return Err(Error::invalid("total load is zero"));
        }
        let (r0, r02) = switchover_moments(&self.stations);
        let waits =
            self.strategy != Strategy::Exhaustive && self.stations.iter().any(|s| s.timer > 0.0);
        if r0 <= 0.0 && waits {
            return Err(Error::ZeroSwitchover);
        }
        Ok(ValidatedModel {
            model: self.clone(),
            rho,
            rho0,
            r0,
            r02,
        })
    }

    /// Validation plus the restrictions of the analytic delay formulas.
    pub fn validate_analytic(&self) -> Result<ValidatedModel> {
        let m = self.validate()?;
        m.require_analytic()?;
        Ok(m)
    }

    fn total_load(&self) -> f64 {
        self.stations
            .iter()
            .map(|s| s.lambda * s.service.mean())
            .sum()
    }
}

/// `(r0, r0^(2))` from the per-station switchover moments.
fn switchover_moments(stations: &[StationSpec]) -> (f64, f64) {
    let means: Vec<f64> = stations.iter().map(|s| s.switchover.mean()).collect();
    let r0: f64 = means.iter().sum();
    let second: f64 = stations.iter().map(|s| s.switchover.second_moment()).sum();
    let cross = r0 * r0 - means.iter().map(|r| r * r).sum::<f64>();
    (r0, second + cross)
}

/// A checked model with its derived loads and switchover moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    model: PollingModel,
    rho: Vec<f64>,
    rho0: f64,
    r0: f64,
    r02: f64,
}

impl ValidatedModel {
    pub fn model(&self) -> &PollingModel {
        &self.model
    }

    pub fn stations(&self) -> &[StationSpec] {
        &self.model.stations
    }

    pub fn station_count(&self) -> usize {
        self.model.stations.len()
    }

    pub fn strategy(&self) -> Strategy {
        self.model.strategy
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.model.stations[i].lambda
    }

    pub fn service(&self, i: usize) -> &ServiceSpec {
        &self.model.stations[i].service
    }

    pub fn switchover(&self, i: usize) -> &SwitchoverSpec {
        &self.model.stations[i].switchover
    }

    /// Mean message length `b_i`.
    pub fn b(&self, i: usize) -> f64 {
        self.model.stations[i].service.mean()
    }

    pub fn b2(&self, i: usize) -> f64 {
        self.model.stations[i].service.second_moment()
    }

    pub fn r(&self, i: usize) -> f64 {
        self.model.stations[i].switchover.mean()
    }

    pub fn r2(&self, i: usize) -> f64 {
        self.model.stations[i].switchover.second_moment()
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r02(&self) -> f64 {
        self.r02
    }

    /// Effective timer: always zero under the exhaustive strategy.
    pub fn timer(&self, i: usize) -> f64 {
        match self.model.strategy {
            Strategy::Exhaustive => 0.0,
            _ => self.model.stations[i].timer,
        }
    }

    /// Service rate `mu_i`; requires exponential service.
    pub fn mu(&self, i: usize) -> Result<f64> {
        self.service(i)
            .exponential_rate()
            .ok_or_else(|| Error::unsupported(format!("station {i} has non-exponential service")))
    }

    pub fn all_switchovers_deterministic(&self) -> bool {
        self.model
            .stations
            .iter()
            .all(|s| s.switchover.is_deterministic())
    }

    pub fn is_exhaustive_in_effect(&self) -> bool {
        (0..self.station_count()).all(|i| self.timer(i) == 0.0)
    }

    /// Same stations, different timers.
    pub fn with_timers(&self, timers: &[f64]) -> Result<ValidatedModel> {
        if timers.len() != self.station_count() {
            return Err(Error::invalid("one timer per station required"));
        }
        let mut model = self.model.clone();
        for (st, &t) in model.stations.iter_mut().zip(timers) {
            st.timer = t;
        }
        model.validate()
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Result<ValidatedModel> {
        let mut model = self.model.clone();
        model.strategy = strategy;
        model.validate()
    }

    /// Checks that the closed-form quantities exist for this model.
    pub fn require_analytic(&self) -> Result<()> {
        let n = self.station_count();
        let strategy = self.strategy();
        if strategy == Strategy::IdleCredit {
            return Err(Error::unsupported(
                "strategy I has no analytic evaluation here; use the simulator",
            ));
        }
        if self.r0 <= 0.0 {
            return Err(Error::unsupported("analytic delay requires r0 > 0"));
        }
        if matches!(
            strategy,
            Strategy::MinimumSojourn | Strategy::EmptyArrivalTimer
        ) && n != 2
        {
            return Err(Error::unsupported(format!(
                "strategy {strategy} is evaluated for two stations only (got {n})"
            )));
        }
        if matches!(
            strategy,
            Strategy::MinimumSojourn | Strategy::IdleSojourn | Strategy::EmptyArrivalTimer
        ) {
            if let Some(i) = (0..n).find(|&i| self.service(i).exponential_rate().is_none()) {
                return Err(Error::unsupported(format!(
                    "strategy {strategy} requires exponential service (station {i})"
                )));
            }
        }
        Ok(())
    }
}
