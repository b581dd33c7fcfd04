//! Thread-pool plumbing.

use pollinglab_core::decision::{delay_at, PointEvaluator};
use pollinglab_core::{Result, Tolerances, ValidatedModel};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "POLLINGLAB_THREADS";

/// Evaluates optimizer points on the current rayon pool. Results keep the
/// order of `points`, so optima do not depend on scheduling.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonEvaluator;

impl PointEvaluator for RayonEvaluator {
    fn evaluate(
        &self,
        model: &ValidatedModel,
        tol: &Tolerances,
        points: &[Vec<f64>],
    ) -> Vec<Result<f64>> {
        points.par_iter().map(|t| delay_at(model, t, tol)).collect()
    }
}

/// A pool sized by [`THREADS_ENV`], or by rayon's default when unset.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::usage(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))
        })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker threads: {e}")))
}
