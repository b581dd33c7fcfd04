//! Event loop shared by estimation runs and traces.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::model::{ServiceSpec, Strategy, SwitchoverSpec, ValidatedModel};

use super::trace::{TraceEvent, TraceKind};

/// Ties are broken by this rank, then by insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    ServiceDone,
    Timer { generation: u64 },
    Arrival { station: usize },
    SwitchDone,
}

impl Kind {
    fn rank(self) -> u8 {
        match self {
            Kind::ServiceDone => 0,
            Kind::Timer { .. } => 1,
            Kind::Arrival { .. } => 2,
            Kind::SwitchDone => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: `BinaryHeap` is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

enum Sampler {
    Fixed(f64),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    /// Cumulative weights with their values.
    Discrete(Vec<(f64, f64)>),
}

impl Sampler {
    fn service(spec: &ServiceSpec) -> Result<Self> {
        Ok(match *spec {
            ServiceSpec::Exponential { rate } => Sampler::Exp(exp(rate)?),
            ServiceSpec::Deterministic { value } => Sampler::Fixed(value),
            ServiceSpec::Gamma { shape, rate } => Sampler::Gamma(gamma(shape, rate)?),
        })
    }

    fn switchover(spec: &SwitchoverSpec) -> Result<Self> {
        Ok(match spec {
            SwitchoverSpec::Deterministic { value } => Sampler::Fixed(*value),
            SwitchoverSpec::Exponential { rate } => Sampler::Exp(exp(*rate)?),
            SwitchoverSpec::Gamma { shape, rate } => Sampler::Gamma(gamma(*shape, *rate)?),
            SwitchoverSpec::Mixture { points } => {
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(points.len());
                for &(value, weight) in points {
                    acc += weight;
                    cum.push((acc, value));
                }
                Sampler::Discrete(cum)
            }
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Fixed(v) => *v,
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Discrete(cum) => {
                let total = cum.last().map_or(1.0, |c| c.0);
                let u: f64 = rng.random::<f64>() * total;
                cum.iter()
                    .find(|c| u < c.0)
                    .unwrap_or(&cum[cum.len() - 1])
                    .1
            }
        }
    }
}

fn exp(rate: f64) -> Result<Exp<f64>> {
    Exp::new(rate).map_err(|_| Error::invalid("exponential rate"))
}

fn gamma(shape: f64, rate: f64) -> Result<Gamma<f64>> {
    Gamma::new(shape, 1.0 / rate).map_err(|_| Error::invalid("gamma parameters"))
}

/// RNG purposes; each (station, purpose) pair owns one stream.
const ARRIVALS: u64 = 0;
const SERVICE: u64 = 1;
const SWITCHOVER: u64 = 2;
const PURPOSES: u64 = 4;

fn stream(seed: u64, station: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(station as u64 * PURPOSES + purpose);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    Serving,
    Waiting,
    Switching,
    /// `r0 = 0` and the system is empty: the server rests until the next
    /// arrival instead of cycling in zero time.
    Parked,
}

#[derive(Debug, Clone, Copy)]
struct Message {
    arrival: f64,
    service: f64,
}

/// Server position and the per-visit bookkeeping of the strategies.
#[derive(Debug, Clone)]
pub(crate) struct Server {
    pub station: usize,
    pub phase: Phase,
    pub visit_start: f64,
    /// Departure deadline of Strategies II to IV; `INFINITY` when unset.
    pub deadline: f64,
    /// Remaining idle credit of Strategy I.
    pub credit: f64,
    pub first_idle_seen: bool,
    pub empty_on_arrival: bool,
    pub busy_seen: bool,
    pub waiting_since: f64,
    /// Length of the switchover that brought the server here.
    pub prev_switch: f64,
    pending_switch: f64,
}

/// Hooks through which runs observe the dynamics.
pub(crate) trait Recorder {
    /// Whether the engine should build [`TraceEvent`]s.
    const TRACING: bool = false;

    /// Called after time has advanced to `now` and before event `index` is
    /// handled.
    fn on_event(&mut self, _index: u64, _now: f64) {}
    /// Time passes from `now` by `dt` with the given state at the start.
    fn on_advance(&mut self, _dt: f64, _workload: f64, _serving: bool, _in_system: &[u64]) {}
    fn on_visit(&mut self, _now: f64, _station: usize) {}
    fn on_service_start(&mut self, _station: usize, _delay: f64) {}
    fn on_wait(
        &mut self,
        _station: usize,
        _visit_start: f64,
        _from: f64,
        _to: f64,
        _prev_switch: f64,
    ) {
    }
    fn on_trace(&mut self, _event: TraceEvent) {}
}

pub(crate) struct Engine<'a, R: Recorder> {
    model: &'a ValidatedModel,
    pub now: f64,
    heap: BinaryHeap<Event>,
    seq: u64,
    events: u64,
    queues: Vec<VecDeque<Message>>,
    in_system: Vec<u64>,
    workload: f64,
    arrival_rng: Vec<ChaCha8Rng>,
    service_rng: Vec<ChaCha8Rng>,
    switch_rng: Vec<ChaCha8Rng>,
    interarrival: Vec<Exp<f64>>,
    service: Vec<Sampler>,
    switchover: Vec<Sampler>,
    pub server: Server,
    timer_generation: u64,
    pub recorder: R,
}

impl<'a, R: Recorder> Engine<'a, R> {
    /// Empty system with the server arriving at station 0 at time 0.
    pub fn new(model: &'a ValidatedModel, seed: u64, recorder: R) -> Result<Self> {
        let n = model.station_count();
        let mut engine = Engine {
            model,
            now: 0.0,
            heap: BinaryHeap::new(),
            seq: 0,
            events: 0,
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            in_system: alloc::vec![0; n],
            workload: 0.0,
            arrival_rng: (0..n).map(|i| stream(seed, i, ARRIVALS)).collect(),
            service_rng: (0..n).map(|i| stream(seed, i, SERVICE)).collect(),
            switch_rng: (0..n).map(|i| stream(seed, i, SWITCHOVER)).collect(),
            interarrival: (0..n)
                .map(|i| exp(model.lambda(i)))
                .collect::<Result<_>>()?,
            service: (0..n)
                .map(|i| Sampler::service(model.service(i)))
                .collect::<Result<_>>()?,
            switchover: (0..n)
                .map(|i| Sampler::switchover(model.switchover(i)))
                .collect::<Result<_>>()?,
            server: Server {
                station: 0,
                phase: Phase::Switching,
                visit_start: 0.0,
                deadline: f64::INFINITY,
                credit: 0.0,
                first_idle_seen: false,
                empty_on_arrival: true,
                busy_seen: false,
                waiting_since: 0.0,
                prev_switch: 0.0,
                pending_switch: 0.0,
            },
            timer_generation: 0,
            recorder,
        };
        for i in 0..n {
            engine.schedule_arrival(i);
        }
        engine.arrive();
        Ok(engine)
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn next_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    fn push(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn schedule_arrival(&mut self, i: usize) {
        let gap = self.interarrival[i].sample(&mut self.arrival_rng[i]);
        self.push(self.now + gap, Kind::Arrival { station: i });
    }

    fn trace(&mut self, kind: TraceKind, station: usize) {
        if R::TRACING {
            let event = TraceEvent {
                time: self.now,
                station,
                kind,
                queue: self.queues[station].len(),
            };
            self.recorder.on_trace(event);
        }
    }

    /// Moves the clock to `to` without handling an event.
    pub fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        if dt > 0.0 {
            let serving = self.server.phase == Phase::Serving;
            self.recorder
                .on_advance(dt, self.workload, serving, &self.in_system);
            if serving {
                self.workload = (self.workload - dt).max(0.0);
            }
            self.now = to;
        }
    }

    /// Handles the next event. Returns `false` if none is pending.
    pub fn step(&mut self) -> bool {
        let Some(event) = self.heap.pop() else {
            return false;
        };
        self.advance(event.time);
        self.recorder.on_event(self.events, self.now);
        self.events += 1;
        match event.kind {
            Kind::Arrival { station } => self.on_arrival(station),
            Kind::ServiceDone => self.on_service_done(),
            Kind::Timer { generation } => self.on_timer(generation),
            Kind::SwitchDone => {
                let n = self.model.station_count();
                self.server.station = (self.server.station + 1) % n;
                self.arrive();
            }
        }
        true
    }

    fn on_arrival(&mut self, i: usize) {
        let service = self.service[i].sample(&mut self.service_rng[i]);
        self.queues[i].push_back(Message {
            arrival: self.now,
            service,
        });
        self.in_system[i] += 1;
        self.workload += service;
        self.schedule_arrival(i);
        self.trace(TraceKind::Arrival, i);
        if self.server.station == i && self.server.phase == Phase::Waiting {
            self.end_waiting();
            self.start_service();
        } else if self.server.phase == Phase::Parked {
            self.depart();
        }
    }

    fn on_service_done(&mut self) {
        let i = self.server.station;
        self.in_system[i] -= 1;
        self.trace(TraceKind::ServiceEnd, i);
        if self.queues[i].is_empty() {
            self.became_idle();
        } else {
            self.start_service();
        }
    }

    fn on_timer(&mut self, generation: u64) {
        if generation != self.timer_generation || self.server.phase != Phase::Waiting {
            return;
        }
        self.trace(TraceKind::TimerExpired, self.server.station);
        self.end_waiting();
        self.depart();
    }

    fn arrive(&mut self) {
        let i = self.server.station;
        let t = self.model.timer(i);
        let now = self.now;
        let empty = self.queues[i].is_empty();
        let s = &mut self.server;
        s.visit_start = now;
        s.prev_switch = s.pending_switch;
        s.first_idle_seen = false;
        s.busy_seen = false;
        s.empty_on_arrival = empty;
        s.credit = 0.0;
        s.deadline = f64::INFINITY;
        match self.model.strategy() {
            Strategy::Exhaustive => {}
            Strategy::IdleCredit => s.credit = t,
            Strategy::MinimumSojourn => s.deadline = now + t,
            Strategy::IdleSojourn => {}
            Strategy::EmptyArrivalTimer => {
                if empty {
                    s.deadline = now + t;
                }
            }
        }
        self.recorder.on_visit(now, i);
        self.trace(TraceKind::ServerArrives, i);
        if empty {
            self.became_idle();
        } else {
            self.start_service();
        }
    }

    fn start_service(&mut self) {
        let i = self.server.station;
        let Some(msg) = self.queues[i].pop_front() else {
            return;
        };
        self.recorder.on_service_start(i, self.now - msg.arrival);
        self.server.busy_seen = true;
        self.server.phase = Phase::Serving;
        self.trace(TraceKind::ServiceStart, i);
        self.push(self.now + msg.service, Kind::ServiceDone);
    }

    /// The current queue just became (or was found) empty.
    fn became_idle(&mut self) {
        let i = self.server.station;
        let now = self.now;
        let s = &mut self.server;
        let until = match self.model.strategy() {
            Strategy::Exhaustive => None,
            Strategy::IdleCredit => (s.credit > 0.0).then_some(now + s.credit),
            Strategy::MinimumSojourn => (now < s.deadline).then_some(s.deadline),
            Strategy::IdleSojourn => {
                if !s.first_idle_seen {
                    s.first_idle_seen = true;
                    s.deadline = now + self.model.timer(i);
                }
                (now < s.deadline).then_some(s.deadline)
            }
            Strategy::EmptyArrivalTimer => {
                (s.empty_on_arrival && !s.busy_seen && now < s.deadline).then_some(s.deadline)
            }
        };
        match until {
            Some(until) => self.start_waiting(until),
            None => self.depart(),
        }
    }

    fn start_waiting(&mut self, until: f64) {
        self.server.phase = Phase::Waiting;
        self.server.waiting_since = self.now;
        self.timer_generation += 1;
        self.trace(TraceKind::WaitStart { until }, self.server.station);
        self.push(
            until,
            Kind::Timer {
                generation: self.timer_generation,
            },
        );
    }

    fn end_waiting(&mut self) {
        let s = &mut self.server;
        let waited = self.now - s.waiting_since;
        if self.model.strategy() == Strategy::IdleCredit {
            s.credit = (s.credit - waited).max(0.0);
        }
        self.timer_generation += 1;
        let (station, visit_start, since, prev) =
            (s.station, s.visit_start, s.waiting_since, s.prev_switch);
        self.recorder
            .on_wait(station, visit_start, since, self.now, prev);
        self.trace(TraceKind::WaitEnd, station);
    }

    fn depart(&mut self) {
        let i = self.server.station;
        if self.model.r0() == 0.0 && self.queues.iter().all(VecDeque::is_empty) {
            self.server.phase = Phase::Parked;
            return;
        }
        let r = self.switchover[i].sample(&mut self.switch_rng[i]);
        self.server.pending_switch = r;
        self.server.phase = Phase::Switching;
        self.trace(TraceKind::Depart { switchover: r }, i);
        self.push(self.now + r, Kind::SwitchDone);
    }
}
