//! File formats, run manifests and the command layer behind the
//! `pollinglab` binary.
//!
//! Every artifact embeds a [`RunManifest`]: JSON results are wrapped in an
//! [`Envelope`], CSV sweeps and text traces carry it in a `#` comment line.
//! Analytic outputs depend only on the config bytes, the flags and the tool
//! version.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod parallel;
pub mod sweep;

pub use config::{ConfigFile, LoadedConfig};
pub use error::{CliError, CliResult};
pub use manifest::{Envelope, RunManifest};
pub use parallel::{thread_pool, RayonEvaluator, THREADS_ENV};
pub use sweep::{Sweep, SweepRange, SweepRow};
