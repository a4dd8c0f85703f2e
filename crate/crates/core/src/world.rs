//! Simulation world: fixed star topology, per-node protocol state, and the
//! event dispatch loop tying the engine, medium, MAC and RDC layers
//! together.
//!
//! Node ids are fixed: the sink is 0 and always listening, the router is 1,
//! leaves count up from 2. Each node owns its own seeded random stream, so
//! draw sequences are stable under topology growth.

use thiserror::Error;

use crate::events::Ev;
use crate::fault::Fault;
use crate::lpl::{self, LplLeafState, LplParams, LplRouterState};
use crate::mac::{self, CsmaParams, MacState, TxOutcome};
use crate::radio::{Frame, FrameKind, Medium, NodeId, RadioPower, RxOutcome, TxStart, MAX_MPDU_LEN};
use crate::scosens::{self, LeafState, RouterState, ScosensParams};
use crate::sim::{quantize_up, Duration, EventId, RandomSource, Scheduler, SimError, SimTime};
use crate::trace::Trace;

pub const SINK: NodeId = NodeId(0);
pub const ROUTER: NodeId = NodeId(1);
pub const FIRST_LEAF: NodeId = NodeId(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Scosens,
    Lpl,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Scosens => "scosens",
            Protocol::Lpl => "lpl",
        }
    }
}

/// Everything the event loop needs to know about one run, minus traffic.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub protocol: Protocol,
    pub n_leaves: u16,
    /// MPDU length of generated data frames.
    pub payload_len: u8,
    /// Timer grid for protocol wake-ups; 1 disables quantization.
    pub quantization: Duration,
    pub leaf_queue_cap: usize,
    pub router_queue_cap: usize,
    pub csma: CsmaParams,
    pub scosens: ScosensParams,
    pub lpl: LplParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            protocol: Protocol::Scosens,
            n_leaves: 10,
            payload_len: 100,
            quantization: 32,
            leaf_queue_cap: 8,
            router_queue_cap: 16,
            csma: CsmaParams::default(),
            scosens: ScosensParams::default(),
            lpl: LplParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_leaves == 0 {
            return Err("n_leaves must be at least 1".into());
        }
        if self.payload_len as u16 > MAX_MPDU_LEN {
            return Err(format!("payload_len {} exceeds 127 octets", self.payload_len));
        }
        if self.quantization == 0 {
            return Err("quantization must be positive (1 disables it)".into());
        }
        if self.leaf_queue_cap == 0 || self.router_queue_cap == 0 {
            return Err("queue capacities must be at least 1".into());
        }
        let c = &self.csma;
        if c.backoff_period == 0 || c.ack_wait == 0 || c.turnaround == 0 {
            return Err("csma durations must be positive".into());
        }
        if c.mac_min_be > c.mac_max_be {
            return Err(format!(
                "mac_min_be {} exceeds mac_max_be {}",
                c.mac_min_be, c.mac_max_be
            ));
        }
        if c.mac_max_be >= 16 {
            return Err("mac_max_be must be below 16".into());
        }
        if c.max_frame_attempts == 0 {
            return Err("max_frame_attempts must be at least 1".into());
        }
        if c.ack_wait < c.turnaround + crate::radio::frame_airtime(crate::radio::ACK_MPDU_LEN as u16).unwrap() {
            return Err("ack_wait is shorter than turnaround plus the ack airtime".into());
        }
        let s = &self.scosens;
        if !(0.0..=1.0).contains(&s.alpha) {
            return Err(format!("alpha {} outside [0, 1]", s.alpha));
        }
        if s.wp_min > s.wp_max {
            return Err("wp_min exceeds wp_max".into());
        }
        if s.wp_max > s.subframe {
            return Err("wp_max exceeds the subframe".into());
        }
        if s.subframe == 0 || s.wp_min == 0 {
            return Err("subframe and wp_min must be positive".into());
        }
        if s.subframe > u32::MAX as u64 {
            return Err("subframe does not fit the beacon timing field".into());
        }
        let l = &self.lpl;
        if l.check_duration == 0 || l.check_interval == 0 || l.strobe_gap == 0 {
            return Err("lpl durations must be positive".into());
        }
        if l.check_duration >= l.check_interval {
            return Err("check_duration must be below check_interval".into());
        }
        if l.attempt_backoff_unit == 0 {
            return Err("attempt_backoff_unit must be positive".into());
        }
        Ok(())
    }
}

/// Plumbing shared by one leaf's outbound queue entry.
#[derive(Debug, Clone)]
pub struct PendingPacket {
    pub uid: u64,
    pub len: u8,
    /// Sequence number pinned on first transmission so retries across
    /// cycles stay recognizable as duplicates.
    pub seq: Option<u8>,
}

#[derive(Debug, Clone, Copy)]
pub struct QueuedPacket {
    pub uid: u64,
    pub len: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    LeafQueueFull,
    RouterQueueFull,
    SendFailed,
    ForwardFailed,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::LeafQueueFull => "leaf_queue_full",
            DropReason::RouterQueueFull => "router_queue_full",
            DropReason::SendFailed => "send_failed",
            DropReason::ForwardFailed => "forward_failed",
        }
    }
}

/// Lifecycle of one generated packet.
#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub uid: u64,
    pub origin: NodeId,
    pub t_generated: SimTime,
    /// Generated during the warm-up window; excluded from metrics.
    pub warmup: bool,
    pub t_leaf_tx_done: Option<SimTime>,
    pub t_router_rx: Option<SimTime>,
    pub t_sink_rx: Option<SimTime>,
    pub dropped: Option<DropReason>,
}

#[derive(Debug)]
pub struct PacketLog {
    pub records: Vec<PacketRecord>,
    pub warmup_end: SimTime,
}

impl PacketLog {
    pub fn new(warmup_end: SimTime) -> Self {
        PacketLog {
            records: Vec::new(),
            warmup_end,
        }
    }

    pub fn new_packet(&mut self, origin: NodeId, t: SimTime) -> u64 {
        let uid = self.records.len() as u64;
        self.records.push(PacketRecord {
            uid,
            origin,
            t_generated: t,
            warmup: t < self.warmup_end,
            t_leaf_tx_done: None,
            t_router_rx: None,
            t_sink_rx: None,
            dropped: None,
        });
        uid
    }

    fn rec(&mut self, uid: u64) -> &mut PacketRecord {
        &mut self.records[uid as usize]
    }

    pub fn mark_leaf_done(&mut self, uid: u64, t: SimTime) {
        let r = self.rec(uid);
        r.t_leaf_tx_done.get_or_insert(t);
    }

    pub fn mark_router_rx(&mut self, uid: u64, t: SimTime) {
        let r = self.rec(uid);
        r.t_router_rx.get_or_insert(t);
    }

    pub fn mark_sink_rx(&mut self, uid: u64, t: SimTime) {
        let r = self.rec(uid);
        r.t_sink_rx.get_or_insert(t);
    }

    pub fn mark_dropped(&mut self, uid: u64, reason: DropReason) {
        let r = self.rec(uid);
        if r.dropped.is_none() {
            r.dropped = Some(reason);
        }
    }

    pub fn router_has(&self, uid: u64) -> bool {
        self.records[uid as usize].t_router_rx.is_some()
    }

    pub fn sink_has(&self, uid: u64) -> bool {
        self.records[uid as usize].t_sink_rx.is_some()
    }
}

/// Aggregate run diagnostics: channel-level counters, MAC bookkeeping, and
/// optional raw backoff draws for invariant checks.
#[derive(Debug, Default)]
pub struct RunStats {
    /// Transmissions corrupted by overlap.
    pub collisions: u64,
    /// Channel access failures (backoff stages exhausted on a busy channel).
    pub csma_failures: u64,
    pub frames_tx: u64,
    pub acks_tx: u64,
    pub beacons_tx: u64,
    pub backoff_draws: u64,
    pub backoff_nonmultiple: u64,
    pub lpl_retry_waits: u64,
    pub send_completions: u64,
    pub max_txs_per_send: u32,
    pub record_backoffs: bool,
    pub recorded_backoffs: Vec<Duration>,
}

impl RunStats {
    pub fn note_backoff(&mut self, delay: Duration, period: Duration) {
        self.backoff_draws += 1;
        if delay % period != 0 {
            self.backoff_nonmultiple += 1;
        }
        if self.record_backoffs {
            self.recorded_backoffs.push(delay);
        }
    }

    pub fn note_send_complete(&mut self, txs: u32) {
        self.send_completions += 1;
        self.max_txs_per_send = self.max_txs_per_send.max(txs);
    }
}

/// Mutable view of everything except per-node state, passed into protocol
/// handlers alongside the one node they operate on.
pub struct Ctx<'a> {
    pub sched: &'a mut Scheduler<Ev>,
    pub medium: &'a mut Medium,
    pub trace: &'a mut Trace,
    pub stats: &'a mut RunStats,
    pub packets: &'a mut PacketLog,
    pub cfg: &'a SimConfig,
}

impl Ctx<'_> {
    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Quantize a protocol timer target onto the configured grid.
    pub fn qup(&self, t: SimTime) -> SimTime {
        quantize_up(t, self.cfg.quantization).expect("resolution validated at construction")
    }

    pub fn set_radio(&mut self, node: NodeId, power: RadioPower) {
        self.medium.set_radio(self.sched.now(), node, power, self.trace);
    }

    pub fn schedule(&mut self, due: SimTime, ev: Ev) -> EventId {
        self.sched
            .schedule(due, ev)
            .expect("protocol timers are never armed in the past")
    }
}

/// Channel assessment for senders. A node busy transmitting its own frame
/// (an acknowledgement going out while a backoff ran down) reads the
/// channel as busy rather than faulting: the energy is real, and the
/// attempt simply escalates.
pub fn assess_channel(ctx: &Ctx<'_>, node: NodeId) -> Result<crate::radio::Cca, Fault> {
    match ctx.medium.power(node) {
        RadioPower::Off => Err(Fault::RadioOff { node, op: "cca" }),
        RadioPower::Transmitting => Ok(crate::radio::Cca::Busy),
        RadioPower::Listening => ctx.medium.cca(ctx.sched.now(), node),
    }
}

/// Start a transmission and schedule its completion. Low-power listeners
/// get a same-instant carrier event so checking receivers can latch on.
pub fn transmit(ctx: &mut Ctx<'_>, node: NodeId, frame: Frame) -> Result<TxStart, Fault> {
    let start = ctx.medium.begin_tx(ctx.sched.now(), node, frame, ctx.trace)?;
    ctx.sched
        .schedule(start.end, Ev::TxEnd { uid: start.uid })
        .expect("transmission ends in the future");
    if ctx.cfg.protocol == Protocol::Lpl {
        ctx.sched.schedule_now(Ev::Carrier);
    }
    Ok(start)
}

#[derive(Debug)]
pub enum Role {
    Sink,
    ScosensRouter(RouterState),
    ScosensLeaf(LeafState),
    LplRouter(LplRouterState),
    LplLeaf(LplLeafState),
}

#[derive(Debug)]
pub struct Node {
    pub id: NodeId,
    pub rng: RandomSource,
    pub mac: MacState,
    pub role: Role,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("protocol fault at t={time} µs handling {ev:?} ({id:?}): {fault}")]
    Fault {
        id: EventId,
        time: SimTime,
        ev: Ev,
        fault: Fault,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub struct World {
    pub sched: Scheduler<Ev>,
    pub medium: Medium,
    pub trace: Trace,
    pub packets: PacketLog,
    pub stats: RunStats,
    pub cfg: SimConfig,
    nodes: Vec<Node>,
}

impl World {
    /// Build the star PAN and schedule the protocol's opening events.
    /// Packets generated before `warmup_end` are simulated but excluded
    /// from metrics.
    pub fn new(cfg: SimConfig, warmup_end: SimTime, trace: Trace) -> World {
        assert!(cfg.quantization > 0, "quantization must be positive");
        let n_nodes = 2 + cfg.n_leaves as usize;
        let mut medium = Medium::new(n_nodes);
        let mut trace = trace;
        let mut sched: Scheduler<Ev> = Scheduler::new();

        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let id = NodeId(i as u16);
            let role = if id == SINK {
                Role::Sink
            } else if id == ROUTER {
                match cfg.protocol {
                    Protocol::Scosens => Role::ScosensRouter(RouterState::new(&cfg.scosens)),
                    Protocol::Lpl => Role::LplRouter(LplRouterState::default()),
                }
            } else {
                match cfg.protocol {
                    Protocol::Scosens => Role::ScosensLeaf(LeafState::new()),
                    Protocol::Lpl => Role::LplLeaf(LplLeafState::default()),
                }
            };
            nodes.push(Node {
                id,
                rng: RandomSource::for_stream(cfg.seed, id.0 as u64),
                mac: MacState::default(),
                role,
            });
        }

        // The sink listens for the whole run.
        medium.set_radio(SimTime::ZERO, SINK, RadioPower::Listening, &mut trace);

        match cfg.protocol {
            Protocol::Scosens => {
                sched
                    .schedule(SimTime::ZERO, Ev::RouterCycleStart { node: ROUTER })
                    .expect("t=0 is schedulable");
            }
            Protocol::Lpl => {
                sched
                    .schedule(
                        SimTime(cfg.lpl.check_interval),
                        Ev::LplCheckStart { node: ROUTER },
                    )
                    .expect("first check is schedulable");
            }
        }

        World {
            sched,
            medium,
            trace,
            packets: PacketLog::new(warmup_end),
            stats: RunStats::default(),
            cfg,
            nodes,
        }
    }

    pub fn leaf_ids(&self) -> Vec<NodeId> {
        (0..self.cfg.n_leaves)
            .map(|i| NodeId(FIRST_LEAF.0 + i))
            .collect()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    /// Inject a packet arrival at a leaf.
    pub fn schedule_arrival(&mut self, leaf: NodeId, t: SimTime) {
        debug_assert!(leaf.0 >= FIRST_LEAF.0);
        self.sched
            .schedule(t, Ev::PacketArrival { node: leaf })
            .expect("arrival scheduled in the future");
    }

    /// Drive the simulation to `t_end`, then close the books: the clock
    /// lands on `t_end` and radio on-time is finalized.
    pub fn run(&mut self, t_end: SimTime) -> Result<(), WorldError> {
        while let Some(firing) = self.sched.pop_due(t_end) {
            let (id, time, ev) = (firing.id, firing.time, firing.payload);
            self.dispatch(id, ev)
                .map_err(|fault| WorldError::Fault {
                    id,
                    time,
                    ev,
                    fault,
                })?;
        }
        self.sched.finish(t_end)?;
        self.medium.finalize(t_end);
        Ok(())
    }

    fn dispatch(&mut self, id: EventId, ev: Ev) -> Result<(), Fault> {
        let World {
            sched,
            medium,
            trace,
            packets,
            stats,
            cfg,
            nodes,
        } = self;
        let mut ctx = Ctx {
            sched,
            medium,
            trace,
            stats,
            packets,
            cfg,
        };
        match ev {
            Ev::TxEnd { uid } => {
                let now = ctx.now();
                let done = ctx.medium.finish_tx(now, uid, ctx.trace);
                if done.corrupted {
                    ctx.stats.collisions += 1;
                }

                // Sender-side continuation.
                {
                    let n = &mut nodes[done.src.index()];
                    let Node { id, mac, rng, role } = n;
                    match done.frame.kind {
                        FrameKind::Beacon => {
                            if let Role::ScosensRouter(r) = role {
                                scosens::router_on_beacon_sent(&mut ctx, *id, r);
                            }
                        }
                        FrameKind::Ack => {
                            if let Role::LplRouter(r) = role {
                                lpl::router_after_ack(&mut ctx, *id, r, mac, rng)?;
                            }
                        }
                        FrameKind::Data => {
                            if let Some((frame, outcome)) = mac::on_own_tx_end(&mut ctx, *id, mac) {
                                send_complete(&mut ctx, n, frame, outcome)?;
                            }
                        }
                        FrameKind::Strobe => {
                            let done_send = match role {
                                Role::LplLeaf(l) => {
                                    lpl::on_strobe_end(&mut ctx, *id, &mut l.send, rng)?
                                }
                                Role::LplRouter(r) => {
                                    lpl::on_strobe_end(&mut ctx, *id, &mut r.send, rng)?
                                }
                                _ => None,
                            };
                            if let Some((frame, outcome)) = done_send {
                                send_complete(&mut ctx, n, frame, outcome)?;
                            }
                        }
                    }
                }

                // Receiver side, ascending node id.
                for (rx_id, outcome) in &done.outcomes {
                    let n = &mut nodes[rx_id.index()];
                    match outcome {
                        RxOutcome::Intact => on_intact(&mut ctx, n, &done.frame)?,
                        RxOutcome::Corrupted => match &mut n.role {
                            Role::LplRouter(r) => lpl::rx_frame_end(&mut ctx, *rx_id, r),
                            Role::ScosensRouter(r) => scosens::router_on_collision(&mut ctx, r),
                            _ => {}
                        },
                        RxOutcome::Missed => {
                            if let Role::LplRouter(r) = &mut n.role {
                                lpl::rx_frame_end(&mut ctx, *rx_id, r);
                            }
                        }
                    }
                }
            }
            Ev::Carrier => {
                for n in nodes.iter_mut() {
                    if let Role::LplRouter(r) = &mut n.role {
                        if ctx.medium.power(n.id) == RadioPower::Listening {
                            lpl::on_carrier(&mut ctx, n.id, r);
                        }
                    }
                }
            }
            Ev::MacTimer { node } => {
                let n = &mut nodes[node.index()];
                if let Some((frame, outcome)) =
                    mac::on_timer(&mut ctx, node, &mut n.mac, &mut n.rng, id)?
                {
                    send_complete(&mut ctx, n, frame, outcome)?;
                }
            }
            Ev::MacSendAck { node } => {
                let n = &mut nodes[node.index()];
                mac::on_send_ack_timer(&mut ctx, node, &mut n.mac, id)?;
            }
            Ev::RouterCycleStart { node } => {
                let n = &mut nodes[node.index()];
                if let Role::ScosensRouter(r) = &mut n.role {
                    scosens::router_start_cycle(&mut ctx, node, r, &mut n.mac)?;
                }
            }
            Ev::RouterSpEnd { node } => {
                let n = &mut nodes[node.index()];
                if let Role::ScosensRouter(r) = &mut n.role {
                    scosens::router_sp_end(&mut ctx, node, r);
                }
            }
            Ev::RouterWpEnd { node } => {
                let n = &mut nodes[node.index()];
                if let Role::ScosensRouter(r) = &mut n.role {
                    scosens::router_wp_end(&mut ctx, node, r, &mut n.mac, &mut n.rng)?;
                }
            }
            Ev::PacketArrival { node } => {
                let now = ctx.now();
                let uid = ctx.packets.new_packet(node, now);
                let n = &mut nodes[node.index()];
                match &mut n.role {
                    Role::ScosensLeaf(l) => scosens::leaf_on_arrival(&mut ctx, node, l, uid),
                    Role::LplLeaf(l) => {
                        lpl::leaf_on_arrival(&mut ctx, node, l, &mut n.mac, &mut n.rng, uid)?
                    }
                    _ => {}
                }
            }
            Ev::LeafWake { node } => {
                let n = &mut nodes[node.index()];
                if let Role::ScosensLeaf(l) = &mut n.role {
                    scosens::leaf_wake(&mut ctx, node, l, &mut n.mac, &mut n.rng, id)?;
                }
            }
            Ev::LeafWindowEnd { node } => {
                let n = &mut nodes[node.index()];
                if let Role::ScosensLeaf(l) = &mut n.role {
                    scosens::leaf_window_end(&mut ctx, node, l, &mut n.mac, id)?;
                }
            }
            Ev::LplCheckStart { node } => {
                let n = &mut nodes[node.index()];
                if let Role::LplRouter(r) = &mut n.role {
                    lpl::check_start(&mut ctx, node, r);
                }
            }
            Ev::LplRxTimer { node } => {
                let n = &mut nodes[node.index()];
                if let Role::LplRouter(r) = &mut n.role {
                    lpl::on_rx_timer(&mut ctx, node, r, id);
                }
            }
            Ev::LplSendTimer { node } => {
                let n = &mut nodes[node.index()];
                let Node { id: nid, mac: _, rng, role } = n;
                let done_send = match role {
                    Role::LplLeaf(l) => lpl::on_send_timer(&mut ctx, *nid, &mut l.send, rng, id)?,
                    Role::LplRouter(r) => lpl::on_send_timer(&mut ctx, *nid, &mut r.send, rng, id)?,
                    _ => None,
                };
                if let Some((frame, outcome)) = done_send {
                    send_complete(&mut ctx, n, frame, outcome)?;
                }
            }
        }
        Ok(())
    }
}

/// Route an intact reception to the owning protocol.
fn on_intact(ctx: &mut Ctx<'_>, n: &mut Node, frame: &Frame) -> Result<(), Fault> {
    let Node { id, mac, rng, role } = n;
    let me = *id;
    match frame.kind {
        FrameKind::Ack => {
            if frame.dst == Some(me) {
                if let Some((f, o)) = mac::on_ack_received(ctx, me, mac, frame) {
                    return send_complete_inner(ctx, me, mac, rng, role, f, o);
                }
                let done_send = match role {
                    Role::LplLeaf(l) => lpl::on_ack(ctx, me, &mut l.send, frame),
                    Role::LplRouter(r) => lpl::on_ack(ctx, me, &mut r.send, frame),
                    _ => None,
                };
                if let Some((f, o)) = done_send {
                    return send_complete_inner(ctx, me, mac, rng, role, f, o);
                }
            } else if let Role::LplRouter(r) = role {
                lpl::rx_frame_end(ctx, me, r);
            }
        }
        FrameKind::Beacon => {
            if let Role::ScosensLeaf(l) = role {
                scosens::leaf_on_beacon(ctx, me, l, frame.beacon.expect("beacons carry timing"));
            }
        }
        FrameKind::Data | FrameKind::Strobe => {
            if frame.dst == Some(me) {
                let is_new = mac::on_unicast_received(ctx, me, mac, frame);
                match role {
                    Role::ScosensRouter(r) => scosens::router_on_data(ctx, me, r, frame, is_new),
                    Role::LplRouter(r) => lpl::router_on_data(ctx, me, r, frame, is_new),
                    Role::Sink => {
                        if is_new {
                            if let Some(uid) = frame.packet_uid {
                                ctx.packets.mark_sink_rx(uid, ctx.sched.now());
                            }
                        }
                    }
                    _ => {}
                }
            } else if let Role::LplRouter(r) = role {
                // Broadcast or someone else's traffic: just channel activity.
                lpl::rx_frame_end(ctx, me, r);
            }
        }
    }
    Ok(())
}

fn send_complete(ctx: &mut Ctx<'_>, n: &mut Node, frame: Frame, outcome: TxOutcome) -> Result<(), Fault> {
    let Node { id, mac, rng, role } = n;
    send_complete_inner(ctx, *id, mac, rng, role, frame, outcome)
}

fn send_complete_inner(
    ctx: &mut Ctx<'_>,
    id: NodeId,
    mac: &mut MacState,
    rng: &mut RandomSource,
    role: &mut Role,
    frame: Frame,
    outcome: TxOutcome,
) -> Result<(), Fault> {
    match role {
        Role::ScosensLeaf(l) => scosens::leaf_on_send_complete(ctx, id, l, mac, rng, frame, outcome),
        Role::ScosensRouter(r) => {
            scosens::router_on_send_complete(ctx, id, r, mac, rng, frame, outcome)
        }
        Role::LplLeaf(l) => lpl::leaf_on_send_complete(ctx, id, l, mac, rng, frame, outcome),
        Role::LplRouter(r) => lpl::router_on_send_complete(ctx, id, r, mac, rng, frame, outcome),
        Role::Sink => Ok(()),
    }
}

