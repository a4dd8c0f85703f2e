//! Duty-cycled router/leaf discipline with beacon-announced timing.
//!
//! A router cycle is: broadcast a beacon carrying the sleeping-period (SP)
//! and waiting-period (WP) durations of the cycle that just began, sleep
//! through SP, listen through WP collecting leaf traffic, then (optionally)
//! burst-forward everything collected to the sink before the next cycle.
//! SP + WP — the subframe — is fixed; WP adapts to observed traffic through
//! a clamped sliding average, and SP is whatever the WP leaves over.
//!
//! Leaves keep their radio off until they have traffic. A packet arrival
//! turns the radio on to catch the next beacon; the leaf then sleeps
//! through the announced SP, wakes exactly at WP start, contends with CSMA
//! for each pending packet that still fits in the window, and goes back to
//! sleep.

use std::collections::VecDeque;

use crate::events::Ev;
use crate::fault::Fault;
use crate::mac::{self, MacState, SendPhase, TxOutcome};
use crate::radio::{frame_airtime, BeaconTiming, Frame, NodeId, RadioPower};
use crate::sim::{Duration, EventId, RandomSource, SimTime};
use crate::world::{transmit, Ctx, DropReason, PendingPacket, QueuedPacket, ROUTER, SINK};

#[derive(Debug, Clone)]
pub struct ScosensParams {
    /// SP + WP, fixed per deployment.
    pub subframe: Duration,
    /// Relative weight of history in the WP average, in [0, 1].
    pub alpha: f64,
    pub wp_min: Duration,
    pub wp_max: Duration,
    /// Seed value for both the average and the first demand sample.
    pub wp_initial: Duration,
    /// When false the router never forwards; packets terminate at it.
    pub tp_enabled: bool,
    /// Packets a leaf may send per waiting period; 0 means no cap.
    pub max_tx_per_wp: u32,
}

impl Default for ScosensParams {
    fn default() -> Self {
        ScosensParams {
            subframe: 100_000,
            alpha: 0.9,
            wp_min: 10_000,
            wp_max: 90_000,
            wp_initial: 80_000,
            tp_enabled: true,
            max_tx_per_wp: 0,
        }
    }
}

/// Sliding-average state for the adaptive waiting period.
#[derive(Debug, Clone)]
pub struct WpState {
    pub avg_wp: Duration,
    pub last_actual_wp: Duration,
    pub cycle_index: u64,
}

impl WpState {
    pub fn new(wp_initial: Duration) -> Self {
        WpState {
            avg_wp: wp_initial,
            last_actual_wp: wp_initial,
            cycle_index: 0,
        }
    }
}

/// One step of the WP adaptation: blend the previous average with the last
/// measured WP demand, then clamp into the configured band.
///
/// Returns `(new_average, scheduled_wp)`. The blend is computed on the
/// deviation from the latest demand and truncated toward it, so under
/// constant demand the average contracts by a factor of alpha every cycle
/// and lands exactly on the demand instead of parking one or two
/// microseconds away.
pub fn next_wp(state: &WpState, params: &ScosensParams) -> (Duration, Duration) {
    let avg = state.avg_wp as i64;
    let demand = state.last_actual_wp as i64;
    let deviation = avg - demand;
    let blended = demand + (params.alpha * deviation as f64).trunc() as i64;
    let avg_next = blended.max(0) as Duration;
    let wp = avg_next.clamp(params.wp_min, params.wp_max);
    (avg_next, wp)
}

/// SP is whatever the scheduled WP leaves of the subframe.
pub fn sp_for(wp: Duration, params: &ScosensParams) -> Result<Duration, Fault> {
    if wp > params.subframe {
        return Err(Fault::WpExceedsSubframe {
            wp,
            subframe: params.subframe,
        });
    }
    Ok(params.subframe - wp)
}

/// WP demand observed over a completed waiting period: time from WP start
/// to the end of the last intact data reception, or `wp_min` when the
/// period stayed idle.
pub fn measure_wp_demand(
    wp_start: SimTime,
    last_rx_end: Option<SimTime>,
    params: &ScosensParams,
) -> Duration {
    match last_rx_end {
        Some(t) => t.since(wp_start),
        None => params.wp_min,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouterPhase {
    /// Before the first beacon of a cycle goes out (includes waiting for a
    /// clear channel).
    Beacon,
    Sp,
    Wp,
    Tp,
}

#[derive(Debug)]
pub struct RouterState {
    pub wp_state: WpState,
    pub phase: RouterPhase,
    pending_sp: Duration,
    pending_wp: Duration,
    pub wp_start: SimTime,
    wp_end_planned: SimTime,
    last_rx_end: Option<SimTime>,
    /// End of the latest channel activity heard this WP — intact or
    /// collided. Collisions are traffic too: a window full of them is a
    /// congestion signal, not an idle one.
    last_activity_end: Option<SimTime>,
    pub queue: VecDeque<QueuedPacket>,
    cycle_open: bool,
}

impl RouterState {
    pub fn new(params: &ScosensParams) -> Self {
        RouterState {
            wp_state: WpState::new(params.wp_initial),
            phase: RouterPhase::Beacon,
            pending_sp: 0,
            pending_wp: 0,
            wp_start: SimTime::ZERO,
            wp_end_planned: SimTime::ZERO,
            last_rx_end: None,
            last_activity_end: None,
            queue: VecDeque::new(),
            cycle_open: false,
        }
    }
}

/// Open a cycle: compute the (SP, WP) split, then broadcast the beacon as
/// soon as the channel reads clear. A busy channel delays the beacon (and
/// with it the whole cycle) rather than shortening anything.
pub fn router_start_cycle(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut RouterState,
    mac: &mut MacState,
) -> Result<(), Fault> {
    if !r.cycle_open {
        let (avg, wp) = next_wp(&r.wp_state, &ctx.cfg.scosens);
        r.wp_state.avg_wp = avg;
        r.wp_state.cycle_index += 1;
        r.pending_wp = wp;
        r.pending_sp = sp_for(wp, &ctx.cfg.scosens)?;
        r.phase = RouterPhase::Beacon;
        r.cycle_open = true;
        ctx.trace.state(
            ctx.now(),
            node,
            format_args!(
                "phase=cycle n={} sp={} wp={} avg={avg}",
                r.wp_state.cycle_index, r.pending_sp, r.pending_wp
            ),
        );
    }
    if ctx.medium.power(node) == RadioPower::Off {
        ctx.set_radio(node, RadioPower::Listening);
    }
    match crate::world::assess_channel(ctx, node)? {
        crate::radio::Cca::Busy => {
            let retry = ctx
                .medium
                .busy_until()
                .expect("busy channel has an active transmission");
            ctx.sched
                .schedule(retry, Ev::RouterCycleStart { node })
                .expect("channel clears in the future");
            ctx.trace
                .state(ctx.now(), node, format_args!("phase=beacon_wait until={retry}"));
        }
        crate::radio::Cca::Clear => {
            let timing = BeaconTiming {
                sp_us: r.pending_sp as u32,
                wp_us: r.pending_wp as u32,
            };
            let seq = mac.alloc_seq();
            ctx.trace.beacon(ctx.now(), node, timing.sp_us, timing.wp_us);
            ctx.stats.beacons_tx += 1;
            transmit(ctx, node, Frame::beacon(node, seq, timing))?;
        }
    }
    Ok(())
}

/// Beacon airtime over: sleep through SP. The wake-up is an absolute target
/// computed from the beacon end, quantized the same way the leaves quantize
/// theirs, so router and leaves reopen at the same instant.
pub fn router_on_beacon_sent(ctx: &mut Ctx<'_>, node: NodeId, r: &mut RouterState) {
    let anchor = ctx.now();
    r.phase = RouterPhase::Sp;
    ctx.set_radio(node, RadioPower::Off);
    r.wp_start = ctx.qup(anchor + r.pending_sp);
    r.wp_end_planned = ctx.qup(anchor + r.pending_sp + r.pending_wp);
    ctx.sched
        .schedule(r.wp_start, Ev::RouterSpEnd { node })
        .expect("sp ends in the future");
    ctx.trace
        .state(anchor, node, format_args!("phase=sp until={}", r.wp_start));
}

pub fn router_sp_end(ctx: &mut Ctx<'_>, node: NodeId, r: &mut RouterState) {
    r.phase = RouterPhase::Wp;
    r.last_rx_end = None;
    r.last_activity_end = None;
    ctx.set_radio(node, RadioPower::Listening);
    ctx.sched
        .schedule(r.wp_end_planned, Ev::RouterWpEnd { node })
        .expect("wp ends in the future");
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!("phase=wp until={}", r.wp_end_planned),
    );
}

/// An intact data frame reached the router. Demand tracking only counts
/// receptions inside the waiting period; queueing accepts stragglers that
/// finish while the period is closing, since they were acknowledged.
pub fn router_on_data(ctx: &mut Ctx<'_>, node: NodeId, r: &mut RouterState, frame: &Frame, is_new: bool) {
    let _ = node;
    if r.phase == RouterPhase::Wp {
        r.last_rx_end = Some(ctx.now());
        r.last_activity_end = Some(ctx.now());
    }
    if !is_new {
        return;
    }
    let Some(uid) = frame.packet_uid else { return };
    ctx.packets.mark_router_rx(uid, ctx.now());
    if ctx.cfg.scosens.tp_enabled {
        if r.queue.len() < ctx.cfg.router_queue_cap {
            r.queue.push_back(QueuedPacket {
                uid,
                len: frame.mpdu_len,
            });
        } else {
            ctx.packets.mark_dropped(uid, DropReason::RouterQueueFull);
        }
    }
}

/// A collided reception at the router still marks the channel as used.
pub fn router_on_collision(ctx: &mut Ctx<'_>, r: &mut RouterState) {
    if r.phase == RouterPhase::Wp {
        r.last_activity_end = Some(ctx.now());
    }
}

/// Waiting period over: bank the measured demand for the next adaptation
/// step, then either burst-forward the queue (TP) or open the next cycle.
/// If the router is mid-transmission (an acknowledgement going out), the
/// close slides to that frame's end.
///
/// A window that closes hot — channel activity within one service slot of
/// the end — was cut short by its own schedule, so the raw measurement
/// cannot see the unserved backlog. Feeding the average the raw value
/// would park the WP wherever congestion began (the measurement never
/// exceeds the window producing it). Saturated windows therefore feed a
/// doubled demand, letting the WP climb to meet offered load; the clamp
/// still bounds what gets scheduled.
pub fn router_wp_end(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut RouterState,
    mac: &mut MacState,
    rng: &mut RandomSource,
) -> Result<(), Fault> {
    if let Some(tx) = ctx.medium.active_tx_of(node) {
        let end = tx.end;
        ctx.sched
            .schedule(end, Ev::RouterWpEnd { node })
            .expect("transmission ends in the future");
        return Ok(());
    }
    let raw = measure_wp_demand(r.wp_start, r.last_rx_end, &ctx.cfg.scosens);
    let slot = frame_airtime(ctx.cfg.payload_len as u16)?
        + ctx.cfg.csma.ack_wait
        + (1u64 << ctx.cfg.csma.mac_min_be) * ctx.cfg.csma.backoff_period;
    let saturated = r
        .last_activity_end
        .is_some_and(|t| t + slot >= r.wp_end_planned);
    let demand = if saturated {
        raw.max(r.pending_wp.saturating_mul(2))
    } else {
        raw
    };
    r.wp_state.last_actual_wp = demand;
    r.cycle_open = false;
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!("phase=wp_end demand={demand} saturated={saturated}"),
    );

    if ctx.cfg.scosens.tp_enabled && !r.queue.is_empty() {
        r.phase = RouterPhase::Tp;
        ctx.trace
            .state(ctx.now(), node, format_args!("phase=tp n={}", r.queue.len()));
        router_tp_send_next(ctx, node, r, mac, rng)
    } else {
        r.queue.clear();
        router_start_cycle(ctx, node, r, mac)
    }
}

fn router_tp_send_next(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut RouterState,
    mac: &mut MacState,
    rng: &mut RandomSource,
) -> Result<(), Fault> {
    let head = r.queue.front().expect("transmission period with packets");
    let frame = Frame::data(node, SINK, head.len, mac.alloc_seq(), Some(head.uid));
    mac::start_send(ctx, node, mac, rng, frame)
}

pub fn router_on_send_complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    r: &mut RouterState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    frame: Frame,
    outcome: TxOutcome,
) -> Result<(), Fault> {
    debug_assert_eq!(r.phase, RouterPhase::Tp);
    let head = r.queue.pop_front();
    debug_assert_eq!(head.map(|p| p.uid), frame.packet_uid);
    if outcome != TxOutcome::Delivered {
        if let Some(uid) = frame.packet_uid {
            ctx.packets.mark_dropped(uid, DropReason::ForwardFailed);
        }
    }
    if !r.queue.is_empty() {
        router_tp_send_next(ctx, node, r, mac, rng)
    } else {
        router_start_cycle(ctx, node, r, mac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafPhase {
    /// Radio off, nothing pending.
    Sleep,
    /// Traffic queued; radio on, hunting for a beacon.
    AwaitBeacon,
    /// Beacon decoded; radio off until the advertised WP start.
    SleepUntilWp,
    /// Inside the WP, sending.
    Contend,
    /// Gave up on this window (nothing fits); radio off until it closes.
    WindowWait,
}

#[derive(Debug)]
pub struct LeafState {
    pub phase: LeafPhase,
    pub pending: VecDeque<PendingPacket>,
    window: Option<(SimTime, SimTime)>,
    wake_timer: Option<EventId>,
    window_timer: Option<EventId>,
    sent_this_wp: u32,
}

impl LeafState {
    pub fn new() -> Self {
        LeafState {
            phase: LeafPhase::Sleep,
            pending: VecDeque::new(),
            window: None,
            wake_timer: None,
            window_timer: None,
            sent_this_wp: 0,
        }
    }

    pub fn window(&self) -> Option<(SimTime, SimTime)> {
        self.window
    }
}

impl Default for LeafState {
    fn default() -> Self {
        Self::new()
    }
}

/// A packet was generated at this leaf. A sleeping leaf turns its radio on
/// immediately and waits for the first beacon; otherwise the packet just
/// joins the queue and rides along.
pub fn leaf_on_arrival(ctx: &mut Ctx<'_>, node: NodeId, l: &mut LeafState, uid: u64) {
    if l.pending.len() >= ctx.cfg.leaf_queue_cap {
        ctx.packets.mark_dropped(uid, DropReason::LeafQueueFull);
        return;
    }
    l.pending.push_back(PendingPacket {
        uid,
        len: ctx.cfg.payload_len,
        seq: None,
    });
    if l.phase == LeafPhase::Sleep {
        ctx.set_radio(node, RadioPower::Listening);
        l.phase = LeafPhase::AwaitBeacon;
        ctx.trace
            .state(ctx.now(), node, format_args!("phase=await_beacon"));
    }
}

/// An intact beacon was decoded while hunting for one. Sleep through the
/// announced SP and arm the wake-up at the absolute WP start; corrupted
/// beacons never reach here, so the leaf simply keeps listening for the
/// next cycle in that case.
pub fn leaf_on_beacon(ctx: &mut Ctx<'_>, node: NodeId, l: &mut LeafState, timing: BeaconTiming) {
    if l.phase != LeafPhase::AwaitBeacon {
        return;
    }
    let start = ctx.now() + timing.sp_us as Duration;
    let end = start + timing.wp_us as Duration;
    let wake = ctx.qup(start);
    let close = ctx.qup(end);
    l.window = Some((wake, close));
    ctx.set_radio(node, RadioPower::Off);
    l.phase = LeafPhase::SleepUntilWp;
    l.wake_timer = Some(ctx.schedule(wake, Ev::LeafWake { node }));
    ctx.trace.state(
        ctx.now(),
        node,
        format_args!("phase=sleep_until_wp wake={wake} close={close}"),
    );
}

/// WP start: radio on, contend for the queue head.
pub fn leaf_wake(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    firing: EventId,
) -> Result<(), Fault> {
    if l.wake_timer != Some(firing) {
        return Ok(());
    }
    l.wake_timer = None;
    if l.phase != LeafPhase::SleepUntilWp {
        return Ok(());
    }
    let (_, close) = l.window.expect("woke without a window");
    ctx.set_radio(node, RadioPower::Listening);
    l.phase = LeafPhase::Contend;
    l.sent_this_wp = 0;
    l.window_timer = Some(ctx.schedule(close, Ev::LeafWindowEnd { node }));
    ctx.trace.state(ctx.now(), node, format_args!("phase=contend"));
    leaf_try_next(ctx, node, l, mac, rng)
}

/// Start sending the queue head if it still fits in the window; otherwise
/// sleep out the rest of the window (or the whole cycle when the queue is
/// empty).
fn leaf_try_next(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
) -> Result<(), Fault> {
    let Some((_, close)) = l.window else {
        return Ok(());
    };
    if l.pending.is_empty() {
        if let Some(t) = l.window_timer.take() {
            ctx.sched.cancel(t);
        }
        l.window = None;
        l.phase = LeafPhase::Sleep;
        ctx.set_radio(node, RadioPower::Off);
        ctx.trace.state(ctx.now(), node, format_args!("phase=sleep"));
        return Ok(());
    }
    let cap = ctx.cfg.scosens.max_tx_per_wp;
    let capped = cap != 0 && l.sent_this_wp >= cap;
    let head_len = l.pending.front().expect("checked non-empty").len;
    let airtime = frame_airtime(head_len as u16)?;
    let fits = ctx.now() + airtime + ctx.cfg.csma.ack_wait <= close;
    if capped || !fits {
        l.phase = LeafPhase::WindowWait;
        ctx.set_radio(node, RadioPower::Off);
        ctx.trace
            .state(ctx.now(), node, format_args!("phase=window_wait"));
        return Ok(());
    }
    let head = l.pending.front_mut().expect("checked non-empty");
    let seq = *head.seq.get_or_insert_with(|| mac.alloc_seq());
    let frame = Frame::data(node, ROUTER, head.len, seq, Some(head.uid));
    mac::start_send(ctx, node, mac, rng, frame)
}

pub fn leaf_on_send_complete(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LeafState,
    mac: &mut MacState,
    rng: &mut RandomSource,
    frame: Frame,
    outcome: TxOutcome,
) -> Result<(), Fault> {
    let head = l.pending.pop_front();
    debug_assert_eq!(head.map(|p| p.uid), frame.packet_uid);
    let uid = frame.packet_uid.expect("leaf data frames carry a packet");
    match outcome {
        TxOutcome::Delivered => {
            ctx.packets.mark_leaf_done(uid, ctx.now());
            l.sent_this_wp += 1;
        }
        TxOutcome::ChannelAccessFailure | TxOutcome::NoAck => {
            // The router may still hold the packet if only the ack was lost.
            if !ctx.packets.router_has(uid) {
                ctx.packets.mark_dropped(uid, DropReason::SendFailed);
            }
        }
    }
    leaf_try_next(ctx, node, l, mac, rng)
}

/// The contention window closed. An in-flight frame is allowed to finish
/// its airtime (the close slides to the frame end); anything else aborts
/// and the queue head waits for the next beacon. With traffic left, the
/// radio turns (or stays) on right away to hunt for that beacon.
pub fn leaf_window_end(
    ctx: &mut Ctx<'_>,
    node: NodeId,
    l: &mut LeafState,
    mac: &mut MacState,
    firing: EventId,
) -> Result<(), Fault> {
    if l.window_timer != Some(firing) {
        return Ok(());
    }
    l.window_timer = None;
    match l.phase {
        LeafPhase::Contend => {
            if let Some(tx) = ctx.medium.active_tx_of(node) {
                let end = tx.end;
                l.window_timer = Some(ctx.schedule(end, Ev::LeafWindowEnd { node }));
                return Ok(());
            }
            if matches!(mac.send_phase(), Some(SendPhase::Backoff | SendPhase::AwaitAck)) {
                // Frame stays at the queue head with its sequence number.
                mac::abort_send(ctx, mac);
                ctx.trace
                    .state(ctx.now(), node, format_args!("csma=done outcome=window_closed"));
            }
            l.window = None;
            if l.pending.is_empty() {
                l.phase = LeafPhase::Sleep;
                ctx.set_radio(node, RadioPower::Off);
                ctx.trace.state(ctx.now(), node, format_args!("phase=sleep"));
            } else {
                l.phase = LeafPhase::AwaitBeacon;
                ctx.set_radio(node, RadioPower::Listening);
                ctx.trace
                    .state(ctx.now(), node, format_args!("phase=await_beacon"));
            }
        }
        LeafPhase::WindowWait => {
            l.window = None;
            l.phase = LeafPhase::AwaitBeacon;
            ctx.set_radio(node, RadioPower::Listening);
            ctx.trace
                .state(ctx.now(), node, format_args!("phase=await_beacon"));
        }
        _ => {}
    }
    Ok(())
}
