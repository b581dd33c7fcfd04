//! Delay curves over the first timer, written as CSV.
//!
//! The file starts with `#` comment lines carrying the schema version and
//! the run manifest as one-line JSON, followed by the header
//! `t1,strategy,dbar,ci_lo,ci_hi`. Analytic rows leave the interval columns
//! empty; simulated rows fill them with the 99% confidence bounds.

use std::io::{BufRead, BufReader, Read};

use pollinglab_core::{Strategy, ValidatedModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const CSV_SCHEMA: &str = "pollinglab-sweep/1";
pub const CSV_HEADER: [&str; 5] = ["t1", "strategy", "dbar", "ci_lo", "ci_hi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t1: f64,
    pub strategy: Strategy,
    pub dbar: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub manifest: RunManifest,
    pub rows: Vec<SweepRow>,
}

/// `count` evenly spaced values from `start` to `stop`, both included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepRange {
    /// Parses `start:stop:count`.
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || CliError::usage(format!("range must look like start:stop:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let range = SweepRange {
            start: a.trim().parse().map_err(|_| bad())?,
            stop: b.trim().parse().map_err(|_| bad())?,
            count: n.trim().parse().map_err(|_| bad())?,
        };
        range.check()?;
        Ok(range)
    }

    pub fn check(&self) -> CliResult<()> {
        let finite = self.start.is_finite() && self.stop.is_finite();
        if !finite || self.start < 0.0 || self.stop < self.start {
            return Err(CliError::usage("range needs 0 <= start <= stop"));
        }
        if self.count == 0 || (self.count == 1 && self.stop > self.start) {
            return Err(CliError::usage(
                "range needs at least one point, and two unless start = stop",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.stop
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }
}

/// Timers with `T_1` replaced by `t1`.
pub(crate) fn timers_with_t1(model: &ValidatedModel, t1: f64) -> Vec<f64> {
    let mut timers: Vec<f64> = (0..model.station_count()).map(|i| model.timer(i)).collect();
    timers[0] = t1;
    timers
}

impl Sweep {
    pub fn to_csv(&self) -> CliResult<String> {
        let manifest = serde_json::to_string(&self.manifest).expect("manifest serializes");
        let mut out = format!("# {CSV_SCHEMA}\n# manifest {manifest}\n");
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row).map_err(csv_error)?;
        }
        if self.rows.is_empty() {
            writer.write_record(CSV_HEADER).map_err(csv_error)?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| CliError::io("<csv>", e.into_error()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
        Ok(out)
    }

    /// Reads back what [`Sweep::to_csv`] wrote.
    pub fn from_csv(input: impl Read) -> CliResult<Self> {
        let mut reader = BufReader::new(input);
        let mut manifest = None;
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader
                .read_line(&mut line)
                .map_err(|e| CliError::io("<csv>", e))?
                == 0
            {
                break;
            }
            match line.strip_prefix('#') {
                Some(comment) => {
                    if let Some(json) = comment.trim().strip_prefix("manifest ") {
                        let m = serde_json::from_str(json)
                            .map_err(|e| CliError::Config(format!("manifest line: {e}")))?;
                        manifest = Some(m);
                    }
                }
                None => body.push_str(&line),
            }
        }
        let manifest =
            manifest.ok_or_else(|| CliError::Config("sweep file has no manifest line".into()))?;
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        let header = csv.headers().map_err(csv_error)?;
        if header.iter().ne(CSV_HEADER) {
            return Err(CliError::Config(format!(
                "unexpected sweep header {header:?}"
            )));
        }
        let rows = csv
            .deserialize()
            .collect::<Result<Vec<SweepRow>, _>>()
            .map_err(csv_error)?;
        Ok(Sweep { manifest, rows })
    }
}

fn csv_error(e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io("<csv>", io),
            _ => unreachable!(),
        }
    } else {
        CliError::Config(e.to_string())
    }
}
