// probe: replicate the bench phase-A layout manually and inspect CCA results
use rdcsim::sim::{RandomSource, SimTime};

fn main() {
    // Jam cycle: frames [k*4992, k*4992+4032), gaps [k*4992+4032, (k+1)*4992)
    // Sender CCA times: chain of backoff sums from the send start.
    // Simulate the residue walk of CCA instants mod 4992 for seed 0xC5.
    let mut rng = RandomSource::for_stream(0xC5, 1);
    let mut t: u64 = 0;
    let mut clear = 0;
    let mut busy = 0;
    for _send in 0..2000 {
        let mut be: u32 = 3;
        let mut nb = 0;
        let mut attempt = 1;
        loop {
            let k = rng.pick(1 << be);
            t += k * 320;
            let r = t % 4992;
            let in_gap = r >= 4032;
            if in_gap {
                clear += 1;
                // transmit: 3392 + ack_wait 864
                t += 3392 + 864;
                attempt += 1;
                be = 3;
                nb = 0;
            } else {
                busy += 1;
                nb += 1;
                be = (be + 1).min(5);
                if nb > 4 {
                    attempt += 1;
                    be = 3;
                    nb = 0;
                }
            }
            if attempt > 8 { break; }
        }
    }
    println!("clear={clear} busy={busy} (residue model)");
}
