//! Mean queueing delay of cyclic polling systems whose server may idle at an
//! empty station ("wait-and-see") before switching on.
//!
//! The crate is `no_std` and only needs `alloc`. It contains
//!
//! - [`model`]: polling-system specifications and their validation,
//! - [`numerics`]: Bessel functions, transient M/M/1 probabilities, busy-period
//!   densities, quadrature and Poisson transforms of switchover distributions,
//! - [`steady_state`]: queue-length distributions at server arrival and
//!   departure epochs for two-station systems,
//! - [`quantities`]: the per-station waiting quantities `(f_i, w_i, r~_i)`,
//! - [`delay`]: the mean average queueing delay and its diagnostics,
//! - [`decision`]: worth-waiting criteria and timer optimisation,
//! - [`sim`]: a seedable discrete-event simulator used as an oracle.
//!
//! IO, file formats and the command line live in the `pollinglab` crate.

#![no_std]
#![forbid(unsafe_code)]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Approximation coefficients are kept exactly as published.
#![allow(clippy::excessive_precision)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod decision;
pub mod delay;
mod error;
pub mod model;
pub mod numerics;
pub mod quantities;
pub mod sim;
pub mod steady_state;
mod tolerances;

pub use decision::{
    find_waiting_contrast, optimize_timers, worth_waiting_symmetric, worth_waiting_t2_zero,
    OptimizerOptions, Scenario, TimerOptimum, TimerSearch, WaitingContrast, WorthWaitingVerdict,
};
pub use delay::{analyze, Analysis, DelayReport, Diagnostics, Formula, Term};
pub use error::{Error, ErrorKind, Result};
pub use model::{PollingModel, ServiceSpec, StationSpec, Strategy, SwitchoverSpec, ValidatedModel};
pub use quantities::{QuantitySet, StationQuantities};
pub use sim::{Horizon, SimConfig, SimEstimate};
pub use tolerances::Tolerances;
