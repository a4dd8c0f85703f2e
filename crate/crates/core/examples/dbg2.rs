// Minimal replication of the bench inside an example (examples can't use
// the tests/common module, so inline a tiny version).
use rdcsim::events::Ev;
use rdcsim::mac::{self, MacState};
use rdcsim::radio::{Frame, Medium, NodeId, RadioPower};
use rdcsim::sim::{RandomSource, Scheduler, SimTime};
use rdcsim::trace::Trace;
use rdcsim::world::{transmit, Ctx, PacketLog, RunStats, SimConfig};

fn main() {
    let cfg = SimConfig { quantization: 1, ..SimConfig::default() };
    let mut sched: Scheduler<Ev> = Scheduler::new();
    let mut medium = Medium::new(4);
    let mut trace = Trace::in_memory();
    let mut stats = RunStats::default();
    let mut packets = PacketLog::new(SimTime(0));
    let mut tx_mac = MacState::default();
    let mut rng = RandomSource::for_stream(0xC5, 1);

    medium.set_radio(SimTime(0), NodeId(1), RadioPower::Listening, &mut trace);
    medium.set_radio(SimTime(0), NodeId(2), RadioPower::Listening, &mut trace);
    medium.set_radio(SimTime(0), NodeId(3), RadioPower::Listening, &mut trace);

    // jam arrivals every 4992
    let mut t = 0u64;
    let mut jam = 2u16;
    while t < 200_000 {
        sched.schedule(SimTime(t), Ev::PacketArrival { node: NodeId(jam) }).unwrap();
        jam = if jam == 2 { 3 } else { 2 };
        t += 4992;
    }
    {
        let mut ctx = Ctx { sched: &mut sched, medium: &mut medium, trace: &mut trace, stats: &mut stats, packets: &mut packets, cfg: &cfg };
        mac::start_send(&mut ctx, NodeId(1), &mut tx_mac, &mut rng, Frame::data(NodeId(1), NodeId(0), 100, 0, None)).unwrap();
    }
    loop {
        let Some(f) = sched.pop_due(SimTime(200_000)) else { break };
        let (id, ev) = (f.id, f.payload);
        let mut ctx = Ctx { sched: &mut sched, medium: &mut medium, trace: &mut trace, stats: &mut stats, packets: &mut packets, cfg: &cfg };
        match ev {
            Ev::PacketArrival { node } => {
                let fr = Frame::strobe(node, None, 120, 0, None);
                transmit(&mut ctx, node, fr).unwrap();
            }
            Ev::TxEnd { uid } => {
                let done = ctx.medium.finish_tx(ctx.sched.now(), uid, ctx.trace);
                if done.src == NodeId(1) {
                    if let Some((fr, o)) = mac::on_own_tx_end(&mut ctx, NodeId(1), &mut tx_mac) {
                        println!("OUTCOME {o:?} for seq {}", fr.seq);
                    }
                }
            }
            Ev::MacTimer { node } => {
                if let Some((fr, o)) = mac::on_timer(&mut ctx, NodeId(1), &mut tx_mac, &mut rng, id).unwrap() {
                    println!("OUTCOME {o:?} for seq {} at {}", fr.seq, ctx.sched.now());
                }
                let _ = node;
            }
            _ => {}
        }
    }
    let text = trace.into_string().unwrap();
    for l in text.lines().take(40) { println!("{l}"); }
    println!("collisions={} frames_tx={}", stats.collisions, stats.frames_tx);
}
