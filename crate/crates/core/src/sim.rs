//! Deterministic discrete-event engine.
//!
//! A virtual clock counting integer microseconds, a cancellable timer queue
//! with FIFO ordering among equal timestamps, an opt-in hardware-timer
//! quantization helper, and seeded per-node random streams. Two runs with the
//! same configuration and seed execute the exact same event sequence.

use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Absolute simulation time, integer microseconds since t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

/// A span of simulated time, integer microseconds.
pub type Duration = u64;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn micros(self) -> u64 {
        self.0
    }

    /// Elapsed microseconds since `earlier`. Panics if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> Duration {
        self.0
            .checked_sub(earlier.0)
            .expect("time arithmetic went backwards")
    }
}

impl Add<Duration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: Duration) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<Duration> for SimTime {
    fn add_assign(&mut self, rhs: Duration) {
        self.0 += rhs;
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Round `t` up to the next multiple of `resolution`.
///
/// Models platforms whose timers can only fire on a fixed grid (e.g. a 32 µs
/// tick). `resolution = 1` is the identity; `resolution = 0` is rejected.
pub fn quantize_up(t: SimTime, resolution: Duration) -> Result<SimTime, SimError> {
    if resolution == 0 {
        return Err(SimError::ZeroResolution);
    }
    Ok(SimTime(t.0.div_ceil(resolution) * resolution))
}

/// Token identifying a scheduled event. Unique for the lifetime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventId(u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule an event at t={due} µs: the clock is already at t={now} µs")]
    SchedulePast { due: SimTime, now: SimTime },
    #[error("cannot run to t={target} µs: the clock is already at t={now} µs")]
    RunPast { target: SimTime, now: SimTime },
    #[error("timer resolution must be positive")]
    ZeroResolution,
}

/// Error from [`Scheduler::run_until`]: either an engine error or a fault
/// raised by an event handler, tagged with the offending event and time.
#[derive(Debug, Error)]
pub enum RunError<F> {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("event {id:?} at t={time} µs: {source}")]
    Handler {
        id: EventId,
        time: SimTime,
        source: F,
    },
}

/// An event popped from the queue, ready to be handled.
#[derive(Debug)]
pub struct Firing<E> {
    pub id: EventId,
    pub time: SimTime,
    pub payload: E,
}

struct Entry<E> {
    due: SimTime,
    seq: u64,
    id: EventId,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest (due, seq) first.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (other.due, other.seq).cmp(&(self.due, self.seq))
    }
}

/// Event queue with a monotone clock.
///
/// Events fire in (due time, insertion order): ties on the timestamp are
/// broken FIFO, which keeps runs deterministic even when handlers schedule
/// children at the current instant. Cancelled events never fire.
pub struct Scheduler<E> {
    now: SimTime,
    heap: BinaryHeap<Entry<E>>,
    live: HashSet<u64>,
    next_id: u64,
    next_seq: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            next_id: 0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Enqueue an event for `due`. Scheduling in the past is an error.
    pub fn schedule(&mut self, due: SimTime, payload: E) -> Result<EventId, SimError> {
        if due < self.now {
            return Err(SimError::SchedulePast { due, now: self.now });
        }
        let id = EventId(self.next_id);
        self.next_id += 1;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(id.0);
        self.heap.push(Entry {
            due,
            seq,
            id,
            payload,
        });
        Ok(id)
    }

    /// Schedule at the current instant; fires after the running handler.
    pub fn schedule_now(&mut self, payload: E) -> EventId {
        self.schedule(self.now, payload)
            .expect("scheduling at the current instant cannot fail")
    }

    /// Cancel a pending event. Returns true iff it existed and had not fired.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.live.remove(&id.0)
    }

    /// Pop the next event due at or before `t_end`, advancing the clock to
    /// its timestamp. Returns `None` once nothing is due in the window.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<Firing<E>> {
        loop {
            let head = self.heap.peek()?;
            if head.due > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked entry vanished");
            if !self.live.remove(&entry.id.0) {
                continue; // cancelled
            }
            debug_assert!(entry.due >= self.now, "event queue went back in time");
            self.now = entry.due;
            return Some(Firing {
                id: entry.id,
                time: entry.due,
                payload: entry.payload,
            });
        }
    }

    /// Advance the clock to `t_end` once no more events are due.
    pub fn finish(&mut self, t_end: SimTime) -> Result<(), SimError> {
        if t_end < self.now {
            return Err(SimError::RunPast {
                target: t_end,
                now: self.now,
            });
        }
        self.now = t_end;
        Ok(())
    }

    /// Execute every event due at or before `t_end`, in (due, insertion)
    /// order, leaving the clock at `t_end`. Returns the number executed.
    /// A handler error aborts the run with the offending event attached.
    pub fn run_until<F, EH>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, RunError<EH>>
    where
        F: FnMut(&mut Self, Firing<E>) -> Result<(), EH>,
    {
        if t_end < self.now {
            return Err(SimError::RunPast {
                target: t_end,
                now: self.now,
            }
            .into());
        }
        let mut executed = 0usize;
        while let Some(firing) = self.pop_due(t_end) {
            let (id, time) = (firing.id, firing.time);
            handler(self, firing).map_err(|source| RunError::Handler { id, time, source })?;
            executed += 1;
        }
        self.now = t_end;
        Ok(executed)
    }
}

/// Seeded deterministic random stream.
///
/// ChaCha8 keyed by the run seed, with one independent stream per node, so
/// adding a node never perturbs the draws observed by any other node.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { rng }
    }

    /// Uniform draw from `[0, n)`. `n` must be positive.
    pub fn pick(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.rng.gen_range(0..n)
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn unit(&mut self) -> f64 {
        loop {
            let v: f64 = self.rng.gen();
            if v > 0.0 {
                return v;
            }
        }
    }
}
