//! Unslotted CSMA/CA channel access.
//!
//! Binary exponential backoff, clear-channel assessment, acknowledgement
//! handling with duplicate suppression, and bounded retransmission. Both
//! duty-cycling disciplines sit on top of this machine. The caller owns the
//! radio: it must be listening before a send starts and decides when to
//! power off afterwards.
//!
//! A send walks through per-attempt backoff stages. A busy channel bumps the
//! backoff exponent and stage counter; exhausting the stages is a channel
//! access failure. A transmitted unicast frame waits `ack_wait` for the
//! matching acknowledgement; silence consumes one of the frame attempts and
//! restarts channel access with the exponent reset.

use std::collections::HashMap;
use std::fmt;

use crate::events::Ev;
use crate::fault::Fault;
use crate::radio::{Cca, Frame, NodeId, RadioPower};
use crate::sim::{EventId, RandomSource};
use crate::world::{transmit, Ctx};

#[derive(Debug, Clone)]
pub struct CsmaParams {
    /// Unit of the backoff lattice.
    pub backoff_period: u64,
    pub mac_min_be: u8,
    pub mac_max_be: u8,
    /// Busy-channel stages tolerated per attempt before a channel access
    /// failure.
    pub max_csma_backoffs: u8,
    /// Total transmissions of one frame (first try included).
    pub max_frame_attempts: u8,
    /// How long a transmitter listens for the acknowledgement, measured
    /// from the end of its frame.
    pub ack_wait: u64,
    /// Rx-to-tx turnaround before an acknowledgement goes out.
    pub turnaround: u64,
    /// Whether a channel access failure consumes one attempt and the send
    /// carries on, rather than failing outright.
    pub retry_after_channel_failure: bool,
}

impl Default for CsmaParams {
    fn default() -> Self {
        CsmaParams {
            backoff_period: 320,
            mac_min_be: 3,
            mac_max_be: 5,
            max_csma_backoffs: 4,
            max_frame_attempts: 8,
            ack_wait: 864,
            turnaround: 192,
            retry_after_channel_failure: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Delivered,
    ChannelAccessFailure,
    NoAck,
}

impl fmt::Display for TxOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TxOutcome::Delivered => "delivered",
            TxOutcome::ChannelAccessFailure => "channel_access_failure",
            TxOutcome::NoAck => "no_ack",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendPhase {
    Backoff,
    Transmitting,
    AwaitAck,
}

#[derive(Debug)]
struct CsmaSend {
    frame: Frame,
    be: u8,
    nb: u8,
    attempt: u8,
    txs: u32,
    phase: SendPhase,
    timer: Option<EventId>,
}

#[derive(Debug)]
struct PendingAck {
    dst: NodeId,
    seq: u8,
    timer: EventId,
}

/// Per-node MAC state: outbound sequence counter, the in-flight send if
/// any, a pending acknowledgement, and the last accepted sequence number
/// per source for duplicate suppression.
#[derive(Debug, Default)]
pub struct MacState {
    next_seq: u8,
    send: Option<CsmaSend>,
    pending_ack: Option<PendingAck>,
    dedup: HashMap<NodeId, u8>,
}

impl MacState {
    pub fn alloc_seq(&mut self) -> u8 {
        let s = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        s
    }

    pub fn sending(&self) -> bool {
        self.send.is_some()
    }

    pub fn send_phase(&self) -> Option<SendPhase> {
        self.send.as_ref().map(|s| s.phase)
    }
}

/// Begin a CSMA send. The node's radio must be listening and no other send
/// may be in flight.
pub fn start_send(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    rng: &mut RandomSource,
    frame: Frame,
) -> Result<(), Fault> {
    if mac.send.is_some() {
        return Err(Fault::SendInFlight { node });
    }
    match ctx.medium.power(node) {
        RadioPower::Listening => {}
        RadioPower::Off => return Err(Fault::RadioOff { node, op: "csma send" }),
        RadioPower::Transmitting => return Err(Fault::RadioBusy { node, op: "csma send" }),
    }
    let mut send = CsmaSend {
        frame,
        be: ctx.cfg.csma.mac_min_be,
        nb: 0,
        attempt: 1,
        txs: 0,
        phase: SendPhase::Backoff,
        timer: None,
    };
    arm_backoff(ctx, node, &mut send, rng);
    mac.send = Some(send);
    Ok(())
}

fn arm_backoff(ctx: &mut Ctx<'_>, node: NodeId, send: &mut CsmaSend, rng: &mut RandomSource) {
    let slots = 1u64 << send.be;
    let delay = rng.pick(slots) * ctx.cfg.csma.backoff_period;
    ctx.stats.note_backoff(delay, ctx.cfg.csma.backoff_period);
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!(
            "csma=backoff delay={delay} be={} nb={} attempt={}",
            send.be, send.nb, send.attempt
        ),
    );
    send.phase = SendPhase::Backoff;
    let due = ctx.now() + delay;
    send.timer = Some(ctx.schedule(due, Ev::MacTimer { node }));
}

fn complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    outcome: TxOutcome,
) -> (Frame, TxOutcome) {
    let send = mac.send.take().expect("completing an absent send");
    if let Some(t) = send.timer {
        ctx.sched.cancel(t);
    }
    ctx.stats.note_send_complete(send.txs);
    ctx.trace
        .state(ctx.now(), node, format_args!("csma=done outcome={outcome}"));
    (send.frame, outcome)
}

/// Handle the MAC timer (backoff expiry or ack timeout). Returns the send's
/// completion when this step finished it.
pub fn on_timer(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    rng: &mut RandomSource,
    firing: EventId,
) -> Result<Option<(Frame, TxOutcome)>, Fault> {
    let phase = match mac.send.as_mut() {
        Some(send) if send.timer == Some(firing) => {
            send.timer = None;
            send.phase
        }
        _ => return Ok(None), // stale timer
    };
    match phase {
        SendPhase::Backoff => {
            let cca = crate::world::assess_channel(ctx, node)?;
            let send = mac.send.as_mut().expect("send vanished");
            match cca {
                Cca::Clear => {
                    ctx.trace
                        .state(ctx.now(), node, format_args!("csma=cca result=clear"));
                    send.phase = SendPhase::Transmitting;
                    send.txs += 1;
                    let frame = send.frame.clone();
                    ctx.stats.frames_tx += 1;
                    transmit(ctx, node, frame)?;
                    Ok(None)
                }
                Cca::Busy => {
                    ctx.trace
                        .state(ctx.now(), node, format_args!("csma=cca result=busy"));
                    send.nb += 1;
                    send.be = (send.be + 1).min(ctx.cfg.csma.mac_max_be);
                    if send.nb > ctx.cfg.csma.max_csma_backoffs {
                        ctx.stats.csma_failures += 1;
                        if send.attempt >= ctx.cfg.csma.max_frame_attempts
                            || !ctx.cfg.csma.retry_after_channel_failure
                        {
                            return Ok(Some(complete(
                                ctx,
                                node,
                                mac,
                                TxOutcome::ChannelAccessFailure,
                            )));
                        }
                        send.attempt += 1;
                        send.nb = 0;
                        send.be = ctx.cfg.csma.mac_min_be;
                    }
                    let send = mac.send.as_mut().expect("send vanished");
                    arm_backoff(ctx, node, send, rng);
                    Ok(None)
                }
            }
        }
        SendPhase::AwaitAck => {
            let send = mac.send.as_mut().expect("send vanished");
            if send.attempt >= ctx.cfg.csma.max_frame_attempts {
                return Ok(Some(complete(ctx, node, mac, TxOutcome::NoAck)));
            }
            send.attempt += 1;
            send.nb = 0;
            send.be = ctx.cfg.csma.mac_min_be;
            send.phase = SendPhase::Backoff;
            arm_backoff(ctx, node, send, rng);
            Ok(None)
        }
        SendPhase::Transmitting => Ok(None),
    }
}

/// The node's own data transmission finished. Broadcasts complete here;
/// unicasts start the ack wait.
pub fn on_own_tx_end(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
) -> Option<(Frame, TxOutcome)> {
    let send = mac.send.as_mut()?;
    if send.phase != SendPhase::Transmitting {
        return None;
    }
    if send.frame.is_broadcast() {
        return Some(complete(ctx, node, mac, TxOutcome::Delivered));
    }
    send.phase = SendPhase::AwaitAck;
    let due = ctx.now() + ctx.cfg.csma.ack_wait;
    send.timer = Some(ctx.schedule(due, Ev::MacTimer { node }));
    None
}

/// An intact acknowledgement arrived at this node.
pub fn on_ack_received(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    ack: &Frame,
) -> Option<(Frame, TxOutcome)> {
    let send = mac.send.as_ref()?;
    if send.phase != SendPhase::AwaitAck {
        return None;
    }
    if send.frame.dst != Some(ack.src) || send.frame.seq != ack.seq {
        return None;
    }
    Some(complete(ctx, node, mac, TxOutcome::Delivered))
}

/// An intact unicast frame addressed to this node arrived. Schedules the
/// acknowledgement after the turnaround and reports whether the frame is
/// new (duplicates are acknowledged but not delivered upward again).
pub fn on_unicast_received(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    frame: &Frame,
) -> bool {
    debug_assert_eq!(frame.dst, Some(node));
    let is_new = mac.dedup.get(&frame.src) != Some(&frame.seq);
    mac.dedup.insert(frame.src, frame.seq);

    if let Some(prev) = mac.pending_ack.take() {
        ctx.sched.cancel(prev.timer);
    }
    let due = ctx.now() + ctx.cfg.csma.turnaround;
    let timer = ctx.schedule(due, Ev::MacSendAck { node });
    mac.pending_ack = Some(PendingAck {
        dst: frame.src,
        seq: frame.seq,
        timer,
    });
    is_new
}

/// Turnaround elapsed: transmit the pending acknowledgement. Skipped when
/// the node has since powered down or started transmitting — the sender
/// retries and duplicate suppression absorbs the repeat.
pub fn on_send_ack_timer(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    mac: &mut MacState,
    firing: EventId,
) -> Result<(), Fault> {
    match &mac.pending_ack {
        Some(p) if p.timer == firing => {}
        _ => return Ok(()),
    }
    let p = mac.pending_ack.take().expect("pending ack vanished");
    if ctx.medium.power(node) != RadioPower::Listening {
        return Ok(());
    }
    ctx.trace.ack(ctx.now(), node, p.dst, p.seq);
    ctx.stats.acks_tx += 1;
    transmit(ctx, node, Frame::ack(node, p.dst, p.seq))?;
    Ok(())
}

/// Cancel an in-flight send (e.g. the contention window closed), returning
/// the frame so the caller can requeue it.
pub fn abort_send(ctx: &mut Ctx<'_>, mac: &mut MacState) -> Option<Frame> {
    let send = mac.send.take()?;
    if let Some(t) = send.timer {
        ctx.sched.cancel(t);
    }
    ctx.stats.note_send_complete(send.txs);
    Some(send.frame)
}
