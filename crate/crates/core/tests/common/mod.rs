//! Test bench driving the MAC and strobing send machines against the raw
//! medium, without the full protocol stack: one receiver, one sender under
//! test, and a pair of jammers that can hold the channel busy. The bench
//! is its own miniature dispatcher so tests control exactly what the
//! receiver does.

use rdcsim::events::Ev;
use rdcsim::lpl::{self, LplSend};
use rdcsim::mac::{self, MacState, TxOutcome};
use rdcsim::radio::{frame_airtime, Frame, FrameKind, Medium, NodeId, RadioPower, RxOutcome};
use rdcsim::sim::{RandomSource, Scheduler, SimTime};
use rdcsim::trace::Trace;
use rdcsim::world::{Ctx, PacketLog, RunStats, SimConfig};

pub const RX: NodeId = NodeId(0);
pub const TX: NodeId = NodeId(1);
pub const JAM_A: NodeId = NodeId(2);
pub const JAM_B: NodeId = NodeId(3);

/// Overlap between consecutive jam frames, so the channel never shows a
/// clear instant while jamming.
const JAM_OVERLAP: u64 = 256;
const JAM_LEN: u8 = 120;

pub struct Bench {
    pub sched: Scheduler<Ev>,
    pub medium: Medium,
    pub trace: Trace,
    pub stats: RunStats,
    pub packets: PacketLog,
    pub cfg: SimConfig,
    pub tx_mac: MacState,
    pub rx_mac: MacState,
    pub tx_rng: RandomSource,
    pub lpl_send: Option<LplSend>,
    /// Completions observed for the sender under test.
    pub outcomes: Vec<(Frame, TxOutcome, SimTime)>,
    /// New (non-duplicate) frames delivered upward at the receiver.
    pub rx_delivered: Vec<(u8, SimTime)>,
    pub rx_duplicates: u64,
    /// (tx start, seq) of acknowledgements the receiver put on the air.
    pub acks_sent: Vec<(SimTime, u8)>,
    /// Receiver acks incoming unicast traffic when true.
    pub rx_acks: bool,
}

impl Bench {
    pub fn new(cfg: SimConfig, trace: Trace, seed: u64) -> Bench {
        Bench {
            sched: Scheduler::new(),
            medium: Medium::new(4),
            trace,
            stats: RunStats::default(),
            packets: PacketLog::new(SimTime::ZERO),
            cfg,
            tx_mac: MacState::default(),
            rx_mac: MacState::default(),
            tx_rng: RandomSource::for_stream(seed, TX.0 as u64),
            lpl_send: None,
            outcomes: Vec::new(),
            rx_delivered: Vec::new(),
            rx_duplicates: 0,
            acks_sent: Vec::new(),
            rx_acks: true,
        }
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn receiver_on(&mut self) {
        let now = self.sched.now();
        self.medium
            .set_radio(now, RX, RadioPower::Listening, &mut self.trace);
    }

    pub fn sender_on(&mut self) {
        let now = self.sched.now();
        self.medium
            .set_radio(now, TX, RadioPower::Listening, &mut self.trace);
    }

    /// Keep the channel continuously busy from now until `until`:
    /// alternating jammers start each frame shortly before the previous
    /// one ends, so no clear instant ever appears.
    pub fn jam_until(&mut self, until: SimTime) {
        let airtime = frame_airtime(JAM_LEN as u16).unwrap();
        self.schedule_jam(until, airtime - JAM_OVERLAP);
    }

    /// Jam with short gaps between frames. A contending sender whose
    /// assessment lands inside a gap reads the channel clear and starts a
    /// frame, which the next jam frame then collides with — the gap is far
    /// shorter than any data airtime.
    pub fn jam_with_gaps(&mut self, until: SimTime, gap: u64) {
        let airtime = frame_airtime(JAM_LEN as u16).unwrap();
        self.schedule_jam(until, airtime + gap);
    }

    fn schedule_jam(&mut self, until: SimTime, step: u64) {
        let now = self.sched.now();
        for j in [JAM_A, JAM_B] {
            self.medium
                .set_radio(now, j, RadioPower::Listening, &mut self.trace);
        }
        let mut t = now.micros();
        let mut jam = JAM_A;
        while t < until.micros() {
            self.sched
                .schedule(SimTime(t), Ev::PacketArrival { node: jam })
                .unwrap();
            jam = if jam == JAM_A { JAM_B } else { JAM_A };
            t += step;
        }
    }

    pub fn receiver_off(&mut self) {
        let now = self.sched.now();
        self.medium
            .set_radio(now, RX, RadioPower::Off, &mut self.trace);
    }

    pub fn start_csma(&mut self, frame: Frame) {
        let Bench {
            sched,
            medium,
            trace,
            stats,
            packets,
            cfg,
            tx_mac,
            tx_rng,
            ..
        } = self;
        let mut ctx = Ctx {
            sched,
            medium,
            trace,
            stats,
            packets,
            cfg,
        };
        mac::start_send(&mut ctx, TX, tx_mac, tx_rng, frame).unwrap();
    }

    pub fn start_lpl(&mut self, frame: Frame) {
        let Bench {
            sched,
            medium,
            trace,
            stats,
            packets,
            cfg,
            lpl_send,
            tx_rng,
            ..
        } = self;
        let mut ctx = Ctx {
            sched,
            medium,
            trace,
            stats,
            packets,
            cfg,
        };
        lpl::start_send(&mut ctx, TX, lpl_send, tx_rng, frame).unwrap();
    }

    pub fn run_until(&mut self, t: SimTime) {
        loop {
            let Bench {
                sched,
                medium,
                trace,
                stats,
                packets,
                cfg,
                tx_mac,
                rx_mac,
                tx_rng,
                lpl_send,
                outcomes,
                rx_delivered,
                rx_duplicates,
                acks_sent,
                rx_acks,
            } = self;
            let Some(firing) = sched.pop_due(t) else { break };
            let (id, now, ev) = (firing.id, firing.time, firing.payload);
            let mut ctx = Ctx {
                sched: &mut *sched,
                medium: &mut *medium,
                trace: &mut *trace,
                stats: &mut *stats,
                packets: &mut *packets,
                cfg,
            };
            match ev {
                Ev::PacketArrival { node } if node == JAM_A || node == JAM_B => {
                    let f = Frame::strobe(node, None, JAM_LEN, 0, None);
                    rdcsim::world::transmit(&mut ctx, node, f).unwrap();
                }
                Ev::TxEnd { uid } => {
                    let done = ctx.medium.finish_tx(now, uid, ctx.trace);
                    if done.corrupted {
                        ctx.stats.collisions += 1;
                    }
                    if done.src == RX && done.frame.kind == FrameKind::Ack {
                        acks_sent.push((done.start, done.frame.seq));
                    }
                    if done.src == TX {
                        match done.frame.kind {
                            FrameKind::Strobe => {
                                if let Some((f, o)) =
                                    lpl::on_strobe_end(&mut ctx, TX, lpl_send, tx_rng).unwrap()
                                {
                                    outcomes.push((f, o, now));
                                }
                            }
                            _ => {
                                if let Some((f, o)) = mac::on_own_tx_end(&mut ctx, TX, tx_mac) {
                                    outcomes.push((f, o, now));
                                }
                            }
                        }
                    }
                    for (n, out) in &done.outcomes {
                        if *out != RxOutcome::Intact {
                            continue;
                        }
                        match done.frame.kind {
                            FrameKind::Data | FrameKind::Strobe
                                if done.frame.dst == Some(*n) && *n == RX =>
                            {
                                if *rx_acks {
                                    let fresh =
                                        mac::on_unicast_received(&mut ctx, RX, rx_mac, &done.frame);
                                    if fresh {
                                        rx_delivered.push((done.frame.seq, now));
                                    } else {
                                        *rx_duplicates += 1;
                                    }
                                }
                            }
                            FrameKind::Ack if done.frame.dst == Some(*n) && *n == TX => {
                                if let Some((f, o)) =
                                    mac::on_ack_received(&mut ctx, TX, tx_mac, &done.frame)
                                {
                                    outcomes.push((f, o, now));
                                }
                                if let Some((f, o)) =
                                    lpl::on_ack(&mut ctx, TX, lpl_send, &done.frame)
                                {
                                    outcomes.push((f, o, now));
                                }
                            }
                            _ => {}
                        }
                    }
                }
                Ev::MacTimer { node } if node == TX => {
                    if let Some((f, o)) = mac::on_timer(&mut ctx, TX, tx_mac, tx_rng, id).unwrap() {
                        outcomes.push((f, o, now));
                    }
                }
                Ev::MacSendAck { node } if node == RX => {
                    mac::on_send_ack_timer(&mut ctx, RX, rx_mac, id).unwrap();
                }
                Ev::LplSendTimer { node } if node == TX => {
                    if let Some((f, o)) =
                        lpl::on_send_timer(&mut ctx, TX, lpl_send, tx_rng, id).unwrap()
                    {
                        outcomes.push((f, o, now));
                    }
                }
                _ => {}
            }
        }
        self.sched.finish(t).unwrap();
    }
}
