//! Broadcast radio model for a single PAN.
//!
//! One collision domain, zero propagation delay, no path loss: a frame is
//! decoded by every node that listened for its entire airtime, unless any
//! other transmission overlapped any part of it, in which case it is
//! corrupted at every listener (no capture effect). Transmission intervals
//! are half-open `[start, end)` so back-to-back frames do not self-collide.
//! The medium also accounts per-node radio-on time, which is the basis of
//! the duty-cycle metric.

use std::fmt;

use crate::fault::Fault;
use crate::sim::{Duration, SimTime};
use crate::trace::Trace;

/// Index of a node within one simulation. The sink is 0, the router 1, and
/// leaves count up from 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Largest MPDU the PHY accepts, in octets.
pub const MAX_MPDU_LEN: u16 = 127;
/// Airtime per octet at 250 kbit/s.
pub const OCTET_AIRTIME_US: Duration = 32;
/// Preamble + SFD + length field sent ahead of the MPDU.
pub const PHY_HEADER_OCTETS: u64 = 6;
/// MPDU length of an acknowledgement frame.
pub const ACK_MPDU_LEN: u8 = 5;
/// MPDU length of a beacon frame.
pub const BEACON_MPDU_LEN: u8 = 13;

/// Airtime of a frame with the given MPDU length: (6 + len) × 32 µs.
pub fn frame_airtime(mpdu_len: u16) -> Result<Duration, Fault> {
    if mpdu_len > MAX_MPDU_LEN {
        return Err(Fault::OversizeMpdu { len: mpdu_len });
    }
    Ok((PHY_HEADER_OCTETS + mpdu_len as u64) * OCTET_AIRTIME_US)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Data,
    Ack,
    Beacon,
    Strobe,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::Beacon => "beacon",
            FrameKind::Strobe => "strobe",
        };
        f.write_str(s)
    }
}

/// Timing advertisement carried by a beacon: the sleeping-period and
/// waiting-period durations of the cycle that just began, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconTiming {
    pub sp_us: u32,
    pub wp_us: u32,
}

impl BeaconTiming {
    /// Payload wire format: sp then wp, unsigned 32-bit little-endian.
    pub fn encode(self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.sp_us.to_le_bytes());
        out[4..].copy_from_slice(&self.wp_us.to_le_bytes());
        out
    }

    pub fn decode(bytes: [u8; 8]) -> Self {
        BeaconTiming {
            sp_us: u32::from_le_bytes(bytes[..4].try_into().unwrap()),
            wp_us: u32::from_le_bytes(bytes[4..].try_into().unwrap()),
        }
    }
}

/// A PHY transmission unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    /// `None` is broadcast.
    pub dst: Option<NodeId>,
    pub mpdu_len: u8,
    pub seq: u8,
    pub beacon: Option<BeaconTiming>,
    /// Harness-level packet this frame carries, when it carries one.
    pub packet_uid: Option<u64>,
}

impl Frame {
    pub fn data(src: NodeId, dst: NodeId, mpdu_len: u8, seq: u8, packet_uid: Option<u64>) -> Frame {
        Frame {
            kind: FrameKind::Data,
            src,
            dst: Some(dst),
            mpdu_len,
            seq,
            beacon: None,
            packet_uid,
        }
    }

    pub fn strobe(src: NodeId, dst: Option<NodeId>, mpdu_len: u8, seq: u8, packet_uid: Option<u64>) -> Frame {
        Frame {
            kind: FrameKind::Strobe,
            src,
            dst,
            mpdu_len,
            seq,
            beacon: None,
            packet_uid,
        }
    }

    pub fn ack(src: NodeId, dst: NodeId, seq: u8) -> Frame {
        Frame {
            kind: FrameKind::Ack,
            src,
            dst: Some(dst),
            mpdu_len: ACK_MPDU_LEN,
            seq,
            beacon: None,
            packet_uid: None,
        }
    }

    pub fn beacon(src: NodeId, seq: u8, timing: BeaconTiming) -> Frame {
        Frame {
            kind: FrameKind::Beacon,
            src,
            dst: None,
            mpdu_len: BEACON_MPDU_LEN,
            seq,
            beacon: Some(timing),
            packet_uid: None,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.dst.is_none()
    }

    pub fn airtime(&self) -> Duration {
        frame_airtime(self.mpdu_len as u16).expect("frame length validated at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioPower {
    Off,
    Listening,
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cca {
    Clear,
    Busy,
}

/// What a node got out of a completed transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOutcome {
    /// Listened for the whole airtime, no overlap: frame decoded.
    Intact,
    /// Listened for the whole airtime but another transmission overlapped.
    Corrupted,
    /// Radio off or only partially listening: nothing decipherable heard.
    Missed,
}

#[derive(Debug, Clone, Copy)]
struct RadioInfo {
    power: RadioPower,
    on_since: Option<SimTime>,
    listening_since: Option<SimTime>,
    accumulated_on: Duration,
}

impl RadioInfo {
    fn new() -> Self {
        RadioInfo {
            power: RadioPower::Off,
            on_since: None,
            listening_since: None,
            accumulated_on: 0,
        }
    }
}

/// An in-flight transmission.
#[derive(Debug, Clone)]
pub struct ActiveTx {
    pub uid: u64,
    pub frame: Frame,
    pub start: SimTime,
    pub end: SimTime,
    corrupted: bool,
}

/// Result of starting a transmission.
#[derive(Debug)]
pub struct TxStart {
    pub uid: u64,
    pub end: SimTime,
}

/// Result of completing a transmission: the frame, whether it was corrupted
/// by overlap, and the per-node reception outcomes (every node except the
/// transmitter, ascending id).
#[derive(Debug)]
pub struct TxDone {
    pub uid: u64,
    pub frame: Frame,
    pub src: NodeId,
    pub start: SimTime,
    pub corrupted: bool,
    pub outcomes: Vec<(NodeId, RxOutcome)>,
}

pub struct Medium {
    radios: Vec<RadioInfo>,
    active: Vec<ActiveTx>,
    next_uid: u64,
}

impl Medium {
    pub fn new(n_nodes: usize) -> Self {
        Medium {
            radios: vec![RadioInfo::new(); n_nodes],
            active: Vec::new(),
            next_uid: 0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.radios.len()
    }

    pub fn power(&self, node: NodeId) -> RadioPower {
        self.radios[node.index()].power
    }

    /// Switch a node's radio. On→off transitions bank the elapsed on-time;
    /// Listening↔Transmitting flips keep the on-interval contiguous.
    pub fn set_radio(&mut self, now: SimTime, node: NodeId, power: RadioPower, trace: &mut Trace) {
        let r = &mut self.radios[node.index()];
        if r.power == power {
            return;
        }
        let was_off = r.power == RadioPower::Off;
        match power {
            RadioPower::Off => {
                if let Some(on_since) = r.on_since.take() {
                    r.accumulated_on += now.since(on_since);
                }
                r.listening_since = None;
                trace.radio_off(now, node);
            }
            RadioPower::Listening => {
                if was_off {
                    r.on_since = Some(now);
                    trace.radio_on(now, node);
                }
                r.listening_since = Some(now);
            }
            RadioPower::Transmitting => {
                if was_off {
                    r.on_since = Some(now);
                    trace.radio_on(now, node);
                }
                r.listening_since = None;
            }
        }
        r.power = power;
    }

    /// Begin transmitting `frame` from `node`. Any temporal overlap with
    /// another transmission corrupts both at every listener.
    pub fn begin_tx(
        &mut self,
        now: SimTime,
        node: NodeId,
        frame: Frame,
        trace: &mut Trace,
    ) -> Result<TxStart, Fault> {
        if self.power(node) == RadioPower::Off {
            return Err(Fault::RadioOff {
                node,
                op: "transmit",
            });
        }
        if self.active.iter().any(|t| t.frame.src == node) {
            return Err(Fault::AlreadyTransmitting { node });
        }
        let airtime = frame.airtime();
        let uid = self.next_uid;
        self.next_uid += 1;
        let end = now + airtime;

        let mut corrupted = false;
        for other in &mut self.active {
            // All active transmissions overlap [now, end) by definition.
            other.corrupted = true;
            corrupted = true;
        }

        self.set_radio(now, node, RadioPower::Transmitting, trace);
        trace.tx_start(now, node, uid, &frame);
        self.active.push(ActiveTx {
            uid,
            frame,
            start: now,
            end,
            corrupted,
        });
        Ok(TxStart { uid, end })
    }

    /// Complete the transmission identified by `uid`, computing what every
    /// other node got out of it. The transmitter's radio returns to
    /// Listening.
    pub fn finish_tx(&mut self, now: SimTime, uid: u64, trace: &mut Trace) -> TxDone {
        let idx = self
            .active
            .iter()
            .position(|t| t.uid == uid)
            .expect("finish_tx for unknown transmission");
        let tx = self.active.swap_remove(idx);
        debug_assert_eq!(tx.end, now, "transmission finished off schedule");
        let src = tx.frame.src;

        let mut outcomes = Vec::with_capacity(self.radios.len() - 1);
        for i in 0..self.radios.len() {
            let node = NodeId(i as u16);
            if node == src {
                continue;
            }
            let r = &self.radios[i];
            let outcome = match (r.power, r.listening_since) {
                (RadioPower::Listening, Some(since)) if since <= tx.start => {
                    if tx.corrupted {
                        RxOutcome::Corrupted
                    } else {
                        RxOutcome::Intact
                    }
                }
                _ => RxOutcome::Missed,
            };
            outcomes.push((node, outcome));
        }

        debug_assert_eq!(self.radios[src.index()].power, RadioPower::Transmitting);
        self.set_radio(now, src, RadioPower::Listening, trace);
        trace.tx_end(now, src, uid);
        for (node, outcome) in &outcomes {
            match outcome {
                RxOutcome::Intact => trace.rx_ok(now, *node, uid),
                RxOutcome::Corrupted => trace.rx_collision(now, *node, uid),
                RxOutcome::Missed => {}
            }
        }

        TxDone {
            uid,
            frame: tx.frame,
            src,
            start: tx.start,
            corrupted: tx.corrupted,
            outcomes,
        }
    }

    /// Clear-channel assessment at the sampling instant. Transmission
    /// intervals are half-open, so a frame ending exactly now reads Clear.
    pub fn cca(&self, now: SimTime, node: NodeId) -> Result<Cca, Fault> {
        match self.power(node) {
            RadioPower::Off => {
                return Err(Fault::RadioOff { node, op: "cca" });
            }
            RadioPower::Transmitting => {
                return Err(Fault::RadioBusy { node, op: "cca" });
            }
            RadioPower::Listening => {}
        }
        Ok(if self.busy_at(now) {
            Cca::Busy
        } else {
            Cca::Clear
        })
    }

    /// Whether any transmission is in progress at `now` (no radio needed).
    pub fn busy_at(&self, now: SimTime) -> bool {
        self.active.iter().any(|t| t.start <= now && now < t.end)
    }

    /// Latest end among in-flight transmissions, if any.
    pub fn busy_until(&self) -> Option<SimTime> {
        self.active.iter().map(|t| t.end).max()
    }

    /// The transmission `node` is currently sending, if any.
    pub fn active_tx_of(&self, node: NodeId) -> Option<&ActiveTx> {
        self.active.iter().find(|t| t.frame.src == node)
    }

    /// Bank on-time for radios still powered at the end of the run.
    pub fn finalize(&mut self, t_end: SimTime) {
        for r in &mut self.radios {
            if let Some(on_since) = r.on_since.take() {
                r.accumulated_on += t_end.since(on_since);
                r.on_since = Some(t_end);
            }
        }
    }

    pub fn accumulated_on(&self, node: NodeId) -> Duration {
        self.radios[node.index()].accumulated_on
    }

    /// Fraction of `total` the node's radio spent powered.
    pub fn duty_cycle(&self, node: NodeId, total: Duration) -> f64 {
        if total == 0 {
            return 0.0;
        }
        self.accumulated_on(node) as f64 / total as f64
    }
}
