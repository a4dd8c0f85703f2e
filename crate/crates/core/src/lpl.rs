//! Simplified low-power-listening baseline.
//!
//! Receivers sleep and briefly sample the channel at a fixed rate; energy
//! during a check keeps the radio on until the traffic resolves. Senders
//! gain the channel CSMA-style, then strobe the full frame back to back —
//! copies a gap apart, listening for the acknowledgement in each gap — for
//! long enough that any checking receiver must wake into the train. A
//! train without an ack consumes one frame attempt; retries are paced in
//! whole check intervals, mirroring how duty-cycled stacks couple their
//! retransmission timing to the wake-up schedule.
//!
//! Deliberately conservative: no phase lock (a sender never learns the
//! receiver's wake schedule), no fast-sleep shortcuts. Results are labeled
//! "LPL", not ContikiMAC.

use std::collections::VecDeque;

use crate::events::Ev;
use crate::fault::Fault;
use crate::mac::{MacState, TxOutcome};
use crate::radio::{Cca, Frame, NodeId, RadioPower};
use crate::sim::{Duration, EventId, RandomSource, SimTime};
use crate::world::{transmit, Ctx, DropReason, PendingPacket, QueuedPacket, SINK};

#[derive(Debug, Clone)]
pub struct LplParams {
    /// Period of the receiver's channel checks.
    pub check_interval: Duration,
    /// How long each check listens when the channel is quiet.
    pub check_duration: Duration,
    /// Silence between consecutive strobe copies.
    pub strobe_gap: Duration,
    /// Pacing unit for the wait between frame attempts.
    pub attempt_backoff_unit: Duration,
}

impl Default for LplParams {
    fn default() -> Self {
        LplParams {
            check_interval: 125_000,
            check_duration: 1_000,
            strobe_gap: 400,
            attempt_backoff_unit: 125_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxPhase {
    Sleeping,
    /// Mid-check, channel quiet so far.
    Checking,
    /// Energy seen; staying on until the channel resolves.
    RxPending,
}

#[derive(Debug)]
pub struct LplRxState {
    pub phase: RxPhase,
    timer: Option<EventId>,
}

impl LplRxState {
    pub fn new() -> Self {
        LplRxState {
            phase: RxPhase::Sleeping,
            timer: None,
        }
    }
}

impl Default for LplRxState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SendPhase {
    /// Channel access backoff before a strobe train.
    Backoff,
    /// A copy is on the air; the train must end by `deadline`.
    Strobing { deadline: SimTime },
    /// Between copies, listening for the ack.
    GapWait { deadline: SimTime },
    /// Sleeping out the pause before the next frame attempt.
    AttemptWait,
}

#[derive(Debug)]
pub struct LplSend {
    frame: Frame,
    be: u8,
    nb: u8,
    attempt: u8,
    txs: u32,
    phase: SendPhase,
    timer: Option<EventId>,
}

#[derive(Debug, Default)]
pub struct LplLeafState {
    pub pending: VecDeque<PendingPacket>,
    pub send: Option<LplSend>,
}

#[derive(Debug, Default)]
pub struct LplRouterState {
    pub rx: LplRxState,
    pub queue: VecDeque<QueuedPacket>,
    pub send: Option<LplSend>,
}

enum AttemptFail {
    Channel,
    Train,
}

/// Whether the send machine currently relies on the radio staying powered
/// (channel access or an active strobe train). The receive side must not
/// flip the radio while this holds.
fn sender_holds_radio(send: &Option<LplSend>) -> bool {
    matches!(
        send.as_ref().map(|s| s.phase),
        Some(SendPhase::Backoff | SendPhase::Strobing { .. } | SendPhase::GapWait { .. })
    )
}

/// Begin strobing `frame`. Turns the radio on if it was off.
pub fn start_send(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    rng: &mut RandomSource,
    frame: Frame,
) -> Result<(), Fault> {
    if slot.is_some() {
        return Err(Fault::SendInFlight { node });
    }
    if ctx.medium.power(node) == RadioPower::Off {
        ctx.set_radio(node, RadioPower::Listening);
    }
    let mut send = LplSend {
        frame,
        be: ctx.cfg.csma.mac_min_be,
        nb: 0,
        attempt: 1,
        txs: 0,
        phase: SendPhase::Backoff,
        timer: None,
    };
    arm_ca_backoff(ctx, node, &mut send, rng);
    *slot = Some(send);
    Ok(())
}

fn arm_ca_backoff(ctx: &mut Ctx<'_>, node: NodeId, send: &mut LplSend, rng: &mut RandomSource) {
    let delay = rng.pick(1u64 << send.be) * ctx.cfg.csma.backoff_period;
    ctx.stats.note_backoff(delay, ctx.cfg.csma.backoff_period);
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!(
            "lpl=backoff delay={delay} be={} nb={} attempt={}",
            send.be, send.nb, send.attempt
        ),
    );
    send.phase = SendPhase::Backoff;
    let due = ctx.now() + delay;
    send.timer = Some(ctx.schedule(due, Ev::LplSendTimer { node }));
}

fn complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    outcome: TxOutcome,
) -> (Frame, TxOutcome) {
    let send = slot.take().expect("completing an absent send");
    if let Some(t) = send.timer {
        ctx.sched.cancel(t);
    }
    ctx.stats.note_send_complete(send.txs);
    ctx.trace
        .state(ctx.now(), node, format_args!("lpl=done outcome={outcome}"));
    (send.frame, outcome)
}

fn transmit_copy(ctx: &mut Ctx<'_>, node: NodeId, send: &mut LplSend) -> Result<(), Fault> {
    send.txs += 1;
    ctx.stats.frames_tx += 1;
    let frame = send.frame.clone();
    transmit(ctx, node, frame)?;
    Ok(())
}

fn attempt_end(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    rng: &mut RandomSource,
    why: AttemptFail,
) -> Option<(Frame, TxOutcome)> {
    {
        let send = slot.as_ref().expect("attempt end without a send");
        if send.frame.is_broadcast() && matches!(why, AttemptFail::Train) {
            // Broadcast trains are unconfirmed by design; one full train is
            // the whole job.
            return Some(complete(ctx, node, slot, TxOutcome::Delivered));
        }
    }
    if matches!(why, AttemptFail::Channel) {
        ctx.stats.csma_failures += 1;
    }
    let send = slot.as_mut().expect("attempt end without a send");
    if send.attempt >= ctx.cfg.csma.max_frame_attempts {
        let outcome = match why {
            AttemptFail::Channel => TxOutcome::ChannelAccessFailure,
            AttemptFail::Train => TxOutcome::NoAck,
        };
        return Some(complete(ctx, node, slot, outcome));
    }
    send.attempt += 1;
    send.phase = SendPhase::AttemptWait;
    let unit = ctx.cfg.lpl.attempt_backoff_unit;
    let delay = (1 + rng.pick(1u64 << ctx.cfg.csma.mac_min_be)) * unit;
    ctx.stats.lpl_retry_waits += 1;
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!("lpl=retry delay={delay} attempt={}", send.attempt),
    );
    let due = ctx.now() + delay;
    send.timer = Some(ctx.schedule(due, Ev::LplSendTimer { node }));
    // An acknowledgement of ours may be mid-air right now; the rx side
    // powers down after it finishes.
    if ctx.medium.power(node) != RadioPower::Transmitting {
        ctx.set_radio(node, RadioPower::Off);
    }
    None
}

/// Sender-side timer: backoff expiry, gap pacing, or the attempt pause.
pub fn on_send_timer(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    rng: &mut RandomSource,
    firing: EventId,
) -> Result<Option<(Frame, TxOutcome)>, Fault> {
    let phase = match slot.as_mut() {
        Some(send) if send.timer == Some(firing) => {
            send.timer = None;
            send.phase
        }
        _ => return Ok(None),
    };
    match phase {
        SendPhase::Backoff => {
            let cca = crate::world::assess_channel(ctx, node)?;
            let send = slot.as_mut().expect("send vanished");
            match cca {
                Cca::Clear => {
                    let deadline = ctx.now() + ctx.cfg.lpl.check_interval + send.frame.airtime();
                    send.phase = SendPhase::Strobing { deadline };
                    ctx.trace.state(
                        ctx.now(),
                        node,
                        format_args!("lpl=train deadline={deadline} attempt={}", send.attempt),
                    );
                    transmit_copy(ctx, node, send)?;
                    Ok(None)
                }
                Cca::Busy => {
                    send.nb += 1;
                    send.be = (send.be + 1).min(ctx.cfg.csma.mac_max_be);
                    if send.nb > ctx.cfg.csma.max_csma_backoffs {
                        return Ok(attempt_end(ctx, node, slot, rng, AttemptFail::Channel));
                    }
                    arm_ca_backoff(ctx, node, send, rng);
                    Ok(None)
                }
            }
        }
        SendPhase::GapWait { deadline } => {
            let airtime = slot.as_ref().expect("send vanished").frame.airtime();
            if crate::world::assess_channel(ctx, node)? == Cca::Busy {
                // Possibly our ack on the air; hold off and keep listening,
                // bounded well past the train.
                if ctx.now() >= deadline + ctx.cfg.csma.ack_wait {
                    return Ok(attempt_end(ctx, node, slot, rng, AttemptFail::Train));
                }
                let send = slot.as_mut().expect("send vanished");
                let due = ctx.now() + ctx.cfg.lpl.strobe_gap;
                send.phase = SendPhase::GapWait { deadline };
                send.timer = Some(ctx.schedule(due, Ev::LplSendTimer { node }));
                return Ok(None);
            }
            if ctx.now() + airtime <= deadline {
                let send = slot.as_mut().expect("send vanished");
                send.phase = SendPhase::Strobing { deadline };
                transmit_copy(ctx, node, send)?;
                Ok(None)
            } else {
                Ok(attempt_end(ctx, node, slot, rng, AttemptFail::Train))
            }
        }
        SendPhase::AttemptWait => {
            let send = slot.as_mut().expect("send vanished");
            if ctx.medium.power(node) == RadioPower::Off {
                ctx.set_radio(node, RadioPower::Listening);
            }
            send.be = ctx.cfg.csma.mac_min_be;
            send.nb = 0;
            arm_ca_backoff(ctx, node, send, rng);
            Ok(None)
        }
        SendPhase::Strobing { .. } => Ok(None),
    }
}

/// One strobe copy finished its airtime: pace the next copy, or linger for
/// the final ack when no further copy fits in the train.
pub fn on_strobe_end(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    rng: &mut RandomSource,
) -> Result<Option<(Frame, TxOutcome)>, Fault> {
    let Some(send) = slot.as_mut() else {
        return Ok(None);
    };
    let SendPhase::Strobing { deadline } = send.phase else {
        return Ok(None);
    };
    let next = ctx.now() + ctx.cfg.lpl.strobe_gap;
    let fits = next + send.frame.airtime() <= deadline;
    if fits {
        send.phase = SendPhase::GapWait { deadline };
        send.timer = Some(ctx.schedule(next, Ev::LplSendTimer { node }));
        return Ok(None);
    }
    if send.frame.is_broadcast() {
        return Ok(attempt_end(ctx, node, slot, rng, AttemptFail::Train));
    }
    // Train exhausted; listen out the ack window of the last copy.
    send.phase = SendPhase::GapWait { deadline };
    let due = ctx.now() + ctx.cfg.csma.ack_wait;
    send.timer = Some(ctx.schedule(due, Ev::LplSendTimer { node }));
    Ok(None)
}

/// An intact acknowledgement arrived at a strobing sender.
pub fn on_ack(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    slot: &mut Option<LplSend>,
    ack: &Frame,
) -> Option<(Frame, TxOutcome)> {
    let send = slot.as_ref()?;
    if !matches!(send.phase, SendPhase::GapWait { .. }) {
        return None;
    }
    if send.frame.dst != Some(ack.src) || send.frame.seq != ack.seq {
        return None;
    }
    Some(complete(ctx, node, slot, TxOutcome::Delivered))
}

/// Periodic channel check. Reschedules itself on a fixed grid; skipped
/// while the radio is already in use (receiving or strobing).
pub fn check_start(ctx: &mut Ctx<'_>, node: NodeId, r: &mut LplRouterState) {
    let next = ctx.now() + ctx.cfg.lpl.check_interval;
    ctx.sched
        .schedule(next, Ev::LplCheckStart { node })
        .expect("next check is in the future");
    if r.rx.phase != RxPhase::Sleeping || ctx.medium.power(node) != RadioPower::Off {
        return;
    }
    ctx.set_radio(node, RadioPower::Listening);
    if ctx.medium.busy_at(ctx.now()) {
        r.rx.phase = RxPhase::RxPending;
        ctx.trace
            .state(ctx.now(), node, format_args!("lpl_rx=pending"));
    } else {
        r.rx.phase = RxPhase::Checking;
        let due = ctx.now() + ctx.cfg.lpl.check_duration;
        r.rx.timer = Some(ctx.schedule(due, Ev::LplRxTimer { node }));
        ctx.trace.state(ctx.now(), node, format_args!("lpl_rx=check"));
    }
}

/// Receiver-side timer: quiet check over, or the post-traffic linger ran
/// out. The radio goes back to sleep if the channel is quiet and the send
/// machine is not relying on it.
pub fn on_rx_timer(ctx: &mut Ctx<'_>, node: NodeId, r: &mut LplRouterState, firing: EventId) {
    if r.rx.timer != Some(firing) {
        return;
    }
    r.rx.timer = None;
    match r.rx.phase {
        RxPhase::Checking | RxPhase::RxPending => {
            if ctx.medium.busy_at(ctx.now()) {
                // Traffic still on the air; hold on until it ends.
                r.rx.phase = RxPhase::RxPending;
                return;
            }
            r.rx.phase = RxPhase::Sleeping;
            if !sender_holds_radio(&r.send) {
                ctx.set_radio(node, RadioPower::Off);
                ctx.trace.state(ctx.now(), node, format_args!("lpl_rx=sleep"));
            }
        }
        RxPhase::Sleeping => {}
    }
}

/// Energy appeared on the channel while this receiver was listening.
pub fn on_carrier(ctx: &mut Ctx<'_>, node: NodeId, r: &mut LplRouterState) {
    match r.rx.phase {
        RxPhase::Checking => {
            if let Some(t) = r.rx.timer.take() {
                ctx.sched.cancel(t);
            }
            r.rx.phase = RxPhase::RxPending;
            ctx.trace
                .state(ctx.now(), node, format_args!("lpl_rx=pending"));
        }
        RxPhase::RxPending => {
            if let Some(t) = r.rx.timer.take() {
                ctx.sched.cancel(t);
            }
        }
        RxPhase::Sleeping => {}
    }
}

/// A frame this receiver could not use just ended (collision, partial
/// listen, or someone else's traffic). Stay on a little longer than one
/// strobe gap so the next copy of an ongoing train is caught whole.
pub fn rx_frame_end(ctx: &mut Ctx<'_>, node: NodeId, r: &mut LplRouterState) {
    if r.rx.phase != RxPhase::RxPending {
        return;
    }
    if ctx.medium.busy_at(ctx.now()) {
        return;
    }
    if let Some(t) = r.rx.timer.take() {
        ctx.sched.cancel(t);
    }
    let linger = ctx.cfg.lpl.strobe_gap + ctx.cfg.csma.turnaround;
    let due = ctx.now() + linger;
    r.rx.timer = Some(ctx.schedule(due, Ev::LplRxTimer { node }));
}

/// An intact unicast for the router arrived (ack already scheduled by the
/// MAC). Track the packet and hold the radio through the turnaround.
pub fn router_on_data(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut LplRouterState,
    frame: &Frame,
    is_new: bool,
) {
    let _ = node;
    if let Some(t) = r.rx.timer.take() {
        ctx.sched.cancel(t);
    }
    if r.rx.phase == RxPhase::Checking {
        r.rx.phase = RxPhase::RxPending;
    }
    if !is_new {
        return;
    }
    let Some(uid) = frame.packet_uid else { return };
    ctx.packets.mark_router_rx(uid, ctx.now());
    if r.queue.len() < ctx.cfg.router_queue_cap {
        r.queue.push_back(QueuedPacket {
            uid,
            len: frame.mpdu_len,
        });
    } else {
        ctx.packets.mark_dropped(uid, DropReason::RouterQueueFull);
    }
}

/// The router's acknowledgement finished. Forward queued traffic if the
/// sender side is free, otherwise return to the duty-cycle schedule —
/// without disturbing a send that is mid-attempt and holding the radio.
pub fn router_after_ack(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut LplRouterState,
    mac: &mut MacState,
    rng: &mut RandomSource,
) -> Result<(), Fault> {
    if let Some(t) = r.rx.timer.take() {
        ctx.sched.cancel(t);
    }
    if r.send.is_none() && !r.queue.is_empty() {
        r.rx.phase = RxPhase::Sleeping;
        let head = *r.queue.front().expect("checked non-empty");
        let frame = Frame::strobe(node, Some(SINK), head.len, mac.alloc_seq(), Some(head.uid));
        start_send(ctx, node, &mut r.send, rng, frame)?;
    } else if sender_holds_radio(&r.send) {
        r.rx.phase = RxPhase::Sleeping;
    } else if ctx.medium.busy_at(ctx.now()) {
        r.rx.phase = RxPhase::RxPending;
    } else {
        r.rx.phase = RxPhase::Sleeping;
        ctx.set_radio(node, RadioPower::Off);
        ctx.trace.state(ctx.now(), node, format_args!("lpl_rx=sleep"));
    }
    Ok(())
}

pub fn router_on_send_complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut LplRouterState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    frame: Frame,
    outcome: TxOutcome,
) -> Result<(), Fault> {
    let head = r.queue.pop_front();
    debug_assert_eq!(head.map(|p| p.uid), frame.packet_uid);
    if outcome != TxOutcome::Delivered {
        if let Some(uid) = frame.packet_uid {
            ctx.packets.mark_dropped(uid, DropReason::ForwardFailed);
        }
    }
    if !r.queue.is_empty() {
        let head = *r.queue.front().expect("checked non-empty");
        let next = Frame::strobe(node, Some(SINK), head.len, mac.alloc_seq(), Some(head.uid));
        start_send(ctx, node, &mut r.send, rng, next)
    } else if ctx.medium.busy_at(ctx.now()) {
        // Incoming traffic already on the air; stay up for it.
        r.rx.phase = RxPhase::RxPending;
        Ok(())
    } else {
        ctx.set_radio(node, RadioPower::Off);
        r.rx.phase = RxPhase::Sleeping;
        Ok(())
    }
}

pub fn leaf_on_arrival(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LplLeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    uid: u64,
) -> Result<(), Fault> {
    if l.pending.len() >= ctx.cfg.leaf_queue_cap {
        ctx.packets.mark_dropped(uid, DropReason::LeafQueueFull);
        return Ok(());
    }
    l.pending.push_back(PendingPacket {
        uid,
        len: ctx.cfg.payload_len,
        seq: None,
    });
    if l.send.is_none() {
        leaf_start_next(ctx, node, l, mac, rng)?;
    }
    Ok(())
}

fn leaf_start_next(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LplLeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
) -> Result<(), Fault> {
    let head = l.pending.front_mut().expect("start with a pending packet");
    let seq = *head.seq.get_or_insert_with(|| mac.alloc_seq());
    let frame = Frame::strobe(node, Some(crate::world::ROUTER), head.len, seq, Some(head.uid));
    start_send(ctx, node, &mut l.send, rng, frame)
}

pub fn leaf_on_send_complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LplLeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    frame: Frame,
    outcome: TxOutcome,
) -> Result<(), Fault> {
    let head = l.pending.pop_front();
    debug_assert_eq!(head.map(|p| p.uid), frame.packet_uid);
    let uid = frame.packet_uid.expect("leaf traffic carries a packet");
    match outcome {
        TxOutcome::Delivered => ctx.packets.mark_leaf_done(uid, ctx.now()),
        TxOutcome::ChannelAccessFailure | TxOutcome::NoAck => {
            if !ctx.packets.router_has(uid) {
                ctx.packets.mark_dropped(uid, DropReason::SendFailed);
            }
        }
    }
    if !l.pending.is_empty() {
        leaf_start_next(ctx, node, l, mac, rng)
    } else {
        ctx.set_radio(node, RadioPower::Off);
        Ok(())
    }
}
