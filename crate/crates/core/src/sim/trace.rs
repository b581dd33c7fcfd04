//! Human-readable event logs for checking strategy semantics.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::engine::{Engine, Recorder};
use super::SimConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Arrival,
    ServerArrives,
    ServiceStart,
    ServiceEnd,
    WaitStart { until: f64 },
    WaitEnd,
    TimerExpired,
    Depart { switchover: f64 },
}

/// One handled event. `station` is 0-based; `queue` counts waiting messages
/// (not the one in service) after the event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub station: usize,
    pub kind: TraceKind,
    pub queue: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>14.6}  station {}  queue {:>3}  ",
            self.time,
            self.station + 1,
            self.queue
        )?;
        match self.kind {
            TraceKind::Arrival => f.write_str("message arrives"),
            TraceKind::ServerArrives => f.write_str("server arrives"),
            TraceKind::ServiceStart => f.write_str("service starts"),
            TraceKind::ServiceEnd => f.write_str("service ends"),
            TraceKind::WaitStart { until } => write!(f, "server waits until {until:.6}"),
            TraceKind::WaitEnd => f.write_str("waiting ends"),
            TraceKind::TimerExpired => f.write_str("timer expires"),
            TraceKind::Depart { switchover } => {
                write!(f, "server departs (switchover {switchover:.6})")
            }
        }
    }
}

struct Tracer {
    events: Vec<TraceEvent>,
}

impl Recorder for Tracer {
    const TRACING: bool = true;

    fn on_trace(&mut self, event: TraceEvent) {
        self.events.push(event);
    }
}

/// The first `max_events` handled events of a run, in order. Entries are
/// finer grained than heap events: one arrival may start a service too.
pub fn trace(config: &SimConfig, max_events: usize) -> Result<Vec<TraceEvent>> {
    let model = config.model.validate()?;
    let mut engine = Engine::new(&model, config.seed, Tracer { events: Vec::new() })?;
    while engine.recorder.events.len() < max_events && engine.step() {}
    let mut events = engine.recorder.events;
    events.truncate(max_events);
    Ok(events)
}
