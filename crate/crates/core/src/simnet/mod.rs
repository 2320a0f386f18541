//! Discrete-event simulation core.
//!
//! Events are ordered by `(at, seq)`; `seq` is assigned at insertion so that
//! simultaneous events run in insertion order. All randomness comes from one
//! seeded ChaCha8 stream owned by the simulator; each frame transmission draws
//! exactly two values from it (loss, then jitter).

mod clock;
mod link;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fmt;
use std::io::Write;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{NodeClock, MAX_DRIFT_PPM};
pub use link::LinkModel;

/// Global simulated time in whole microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: f64) -> Self {
        SimTime((ms * 1000.0).round().max(0.0) as u64)
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    BaseStation,
    Mothership,
    #[serde(rename = "master")]
    MasterFf,
    #[serde(rename = "slave")]
    SlaveFf,
    Debris,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::BaseStation => "base",
            Role::Mothership => "mothership",
            Role::MasterFf => "master",
            Role::SlaveFf => "slave",
            Role::Debris => "debris",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub role: Role,
    pub index: u8,
}

impl NodeId {
    pub const fn new(role: Role, index: u8) -> Self {
        Self { role, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.role.name())?;
        if self.index > 0 {
            write!(f, "{}", self.index)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: NodeId,
    pub bytes: Vec<u8>,
    /// Size on air including the link's framing overhead.
    pub on_air_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind<T> {
    Deliver(Frame),
    Timer { node: NodeId, tag: T },
    PhysicsStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<T> {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind<T>,
}

struct Queued<T>(SimEvent<T>);

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.0.at, self.0.seq) == (other.0.at, other.0.seq)
    }
}
impl<T> Eq for Queued<T> {}
impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Queued<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.at, self.0.seq).cmp(&(other.0.at, other.0.seq))
    }
}

/// Pending events ordered by `(at, seq)`.
pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<Queued<T>>>,
    next_seq: u64,
    cancelled: HashSet<u64>,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), next_seq: 0, cancelled: HashSet::new() }
    }
}

impl<T> EventQueue<T> {
    pub fn push(&mut self, at: SimTime, kind: EventKind<T>) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued(SimEvent { at, seq, kind })));
        seq
    }

    pub fn cancel(&mut self, seq: u64) {
        self.cancelled.insert(seq);
    }

    fn peek_time(&mut self) -> Option<SimTime> {
        while let Some(Reverse(Queued(ev))) = self.heap.peek() {
            if self.cancelled.contains(&ev.seq) {
                let seq = ev.seq;
                self.heap.pop();
                self.cancelled.remove(&seq);
            } else {
                return Some(ev.at);
            }
        }
        None
    }

    fn pop(&mut self) -> Option<SimEvent<T>> {
        self.peek_time()?;
        self.heap.pop().map(|Reverse(Queued(ev))| ev)
    }

    pub fn len(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
    pub retransmitted: u64,
}

impl Counters {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.lost
    }
}

/// Link configuration plus the shared random stream.
pub struct Network {
    pub default_link: LinkModel,
    /// Per-node link overrides, applied to frames sent to or from the node.
    pub overrides: BTreeMap<NodeId, LinkModel>,
    rng: ChaCha8Rng,
    counters: Counters,
}

impl Network {
    pub fn new(default_link: LinkModel, seed: u64) -> Self {
        Self { default_link, overrides: BTreeMap::new(), rng: ChaCha8Rng::seed_from_u64(seed), counters: Counters::default() }
    }

    pub fn link_between(&self, src: NodeId, dst: NodeId) -> &LinkModel {
        self.overrides.get(&src).or_else(|| self.overrides.get(&dst)).unwrap_or(&self.default_link)
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Schedules a frame on `queue` unless the link drops it.
pub fn send_frame<T>(net: &mut Network, queue: &mut EventQueue<T>, src: NodeId, dst: NodeId, bytes: Vec<u8>, now: SimTime) -> Option<SimTime> {
    assert_ne!(src, dst, "frame sent to self");
    let link = *net.link_between(src, dst);
    net.counters.sent += 1;
    match link.transmit(now, &mut net.rng) {
        None => {
            net.counters.lost += 1;
            None
        }
        Some(at) => {
            let on_air_bytes = link.on_air_bytes(bytes.len());
            queue.push(at, EventKind::Deliver(Frame { src, dst, bytes, on_air_bytes }));
            Some(at)
        }
    }
}

/// One dispatched event in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_global: f64,
    pub node: String,
    pub kind: String,
    pub detail: String,
}

pub fn write_jsonl<W: Write>(records: &[LogRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("t_end {t_end_ms} ms is before current time {now_ms} ms")]
    EndInPast { now_ms: f64, t_end_ms: f64 },
    #[error("handler failed at {at_ms} ms on {event}: {reason}")]
    Handler { at_ms: f64, event: String, reason: String },
}

/// View of the simulator handed to event handlers.
pub struct Ctx<'a, T> {
    now: SimTime,
    queue: &'a mut EventQueue<T>,
    net: &'a mut Network,
}

impl<T> Ctx<'_, T> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, at: SimTime, kind: EventKind<T>) -> u64 {
        self.queue.push(at.max(self.now), kind)
    }

    pub fn timer(&mut self, at: SimTime, node: NodeId, tag: T) -> u64 {
        self.schedule(at, EventKind::Timer { node, tag })
    }

    pub fn cancel(&mut self, seq: u64) {
        self.queue.cancel(seq);
    }

    /// Sends a frame over the link between `src` and `dst`; false if lost.
    pub fn send(&mut self, src: NodeId, dst: NodeId, bytes: Vec<u8>) -> bool {
        send_frame(self.net, self.queue, src, dst, bytes, self.now).is_some()
    }

    pub fn note_retransmission(&mut self) {
        self.net.counters.retransmitted += 1;
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.net.rng()
    }
}

pub trait Handler {
    type Tag: fmt::Debug;

    /// Handles one event and returns the log detail line for it.
    fn handle(&mut self, ctx: &mut Ctx<'_, Self::Tag>, event: &SimEvent<Self::Tag>) -> Result<String, String>;
}

/// Event loop: queue, clock, network and log.
pub struct Simulator<T> {
    now: SimTime,
    pub queue: EventQueue<T>,
    pub net: Network,
    log: Vec<LogRecord>,
}

impl<T: fmt::Debug> Simulator<T> {
    pub fn new(net: Network) -> Self {
        Self { now: SimTime::ZERO, queue: EventQueue::default(), net, log: Vec::new() }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    /// Handler context at the current time, for seeding events before a run.
    pub fn ctx(&mut self) -> Ctx<'_, T> {
        Ctx { now: self.now, queue: &mut self.queue, net: &mut self.net }
    }

    /// Dispatches every event with `at <= t_end` in `(at, seq)` order, then
    /// advances the clock to `t_end`.
    pub fn run_until<H: Handler<Tag = T>>(&mut self, handler: &mut H, t_end: SimTime) -> Result<(), SimError> {
        if t_end < self.now {
            return Err(SimError::EndInPast { now_ms: self.now.as_ms(), t_end_ms: t_end.as_ms() });
        }
        while self.queue.peek_time().is_some_and(|t| t <= t_end) {
            let ev = self.queue.pop().expect("peeked");
            debug_assert!(ev.at >= self.now);
            self.now = ev.at;
            let (node, kind) = match &ev.kind {
                EventKind::Deliver(f) => (f.dst.to_string(), "deliver"),
                EventKind::Timer { node, .. } => (node.to_string(), "timer"),
                EventKind::PhysicsStep => (Role::Debris.name().to_string(), "physics"),
            };
            if matches!(ev.kind, EventKind::Deliver(_)) {
                self.net.counters.delivered += 1;
            }
            let mut ctx = Ctx { now: self.now, queue: &mut self.queue, net: &mut self.net };
            let detail = handler.handle(&mut ctx, &ev).map_err(|reason| SimError::Handler {
                at_ms: ev.at.as_ms(),
                event: format!("{:?}", ev.kind),
                reason,
            })?;
            self.log.push(LogRecord { t_global: ev.at.as_ms(), node, kind: kind.to_string(), detail });
        }
        self.now = t_end;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Recorder(Vec<(SimTime, u32)>);

    impl Handler for Recorder {
        type Tag = u32;
        fn handle(&mut self, ctx: &mut Ctx<'_, u32>, ev: &SimEvent<u32>) -> Result<String, String> {
            if let EventKind::Timer { tag, .. } = ev.kind {
                self.0.push((ctx.now(), tag));
                if tag == 99 {
                    return Err("boom".into());
                }
            }
            Ok(String::new())
        }
    }

    fn node() -> NodeId {
        NodeId::new(Role::MasterFf, 0)
    }

    #[test]
    fn empty_queue_advances_time() {
        let mut sim: Simulator<u32> = Simulator::new(Network::new(LinkModel::default(), 0));
        let mut h = Recorder(vec![]);
        sim.run_until(&mut h, SimTime::from_ms(10_000.0)).unwrap();
        assert_eq!(sim.now(), SimTime::from_ms(10_000.0));
        assert!(sim.log().is_empty());
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut sim: Simulator<u32> = Simulator::new(Network::new(LinkModel::default(), 0));
        let t = SimTime::from_ms(5.0);
        sim.queue.push(t, EventKind::Timer { node: node(), tag: 2 });
        sim.queue.push(t, EventKind::Timer { node: node(), tag: 1 });
        sim.queue.push(SimTime::from_ms(1.0), EventKind::Timer { node: node(), tag: 0 });
        let mut h = Recorder(vec![]);
        sim.run_until(&mut h, SimTime::from_ms(10.0)).unwrap();
        assert_eq!(h.0.iter().map(|x| x.1).collect::<Vec<_>>(), [0, 2, 1]);
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut sim: Simulator<u32> = Simulator::new(Network::new(LinkModel::default(), 0));
        let a = sim.queue.push(SimTime::from_ms(1.0), EventKind::Timer { node: node(), tag: 1 });
        sim.queue.push(SimTime::from_ms(2.0), EventKind::Timer { node: node(), tag: 2 });
        sim.queue.cancel(a);
        let mut h = Recorder(vec![]);
        sim.run_until(&mut h, SimTime::from_ms(3.0)).unwrap();
        assert_eq!(h.0.len(), 1);
        assert_eq!(sim.log().len(), 1);
    }

    #[test]
    fn events_after_end_stay_queued() {
        let mut sim: Simulator<u32> = Simulator::new(Network::new(LinkModel::default(), 0));
        sim.queue.push(SimTime::from_ms(20.0), EventKind::Timer { node: node(), tag: 1 });
        let mut h = Recorder(vec![]);
        sim.run_until(&mut h, SimTime::from_ms(10.0)).unwrap();
        assert!(h.0.is_empty());
        assert_eq!(sim.queue.len(), 1);
        assert!(sim.run_until(&mut h, SimTime::from_ms(5.0)).is_err());
    }

    #[test]
    fn handler_error_names_event() {
        let mut sim: Simulator<u32> = Simulator::new(Network::new(LinkModel::default(), 0));
        sim.queue.push(SimTime::from_ms(1.0), EventKind::Timer { node: node(), tag: 99 });
        let err = sim.run_until(&mut Recorder(vec![]), SimTime::from_ms(2.0)).unwrap_err();
        assert!(err.to_string().contains("tag: 99"), "{err}");
    }

    #[test]
    fn frames_are_conserved() {
        let link = LinkModel { loss_prob: 0.3, ..LinkModel::default() };
        let mut sim: Simulator<u32> = Simulator::new(Network::new(link, 9));
        let (a, b) = (node(), NodeId::new(Role::Mothership, 0));
        for i in 0..500 {
            let now = SimTime::from_ms(i as f64);
            send_frame(&mut sim.net, &mut sim.queue, a, b, vec![1, 2, 3], now);
        }
        let c = sim.net.counters();
        assert_eq!(c.sent, 500);
        assert!(c.lost > 100 && c.lost < 200, "{c:?}");
        sim.run_until(&mut Recorder(vec![]), SimTime::from_ms(1000.0)).unwrap();
        let c = sim.net.counters();
        assert_eq!(c.delivered + c.lost, c.sent);
        assert_eq!(c.in_flight(), 0);
    }

    #[test]
    fn node_names() {
        assert_eq!(NodeId::new(Role::BaseStation, 0).to_string(), "base");
        assert_eq!(NodeId::new(Role::SlaveFf, 2).to_string(), "slave2");
    }
}
