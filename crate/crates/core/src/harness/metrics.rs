//! Per-run metric computation: packet reception rate, end-to-end delay
//! distribution, per-node radio duty cycles and bookkeeping counters.

use std::io::{self, Write};

use crate::radio::{Medium, NodeId};
use crate::sim::Duration;
use crate::world::{PacketLog, PacketRecord, RunStats, ROUTER, SINK};

/// Where a packet counts as delivered: at the sink when the router
/// forwards, at the router when forwarding is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryEndpoint {
    Router,
    Sink,
}

fn delivered(r: &PacketRecord, endpoint: DeliveryEndpoint) -> bool {
    match endpoint {
        DeliveryEndpoint::Router => r.t_router_rx.is_some(),
        DeliveryEndpoint::Sink => r.t_sink_rx.is_some(),
    }
}

fn endpoint_time(r: &PacketRecord, endpoint: DeliveryEndpoint) -> Option<u64> {
    match endpoint {
        DeliveryEndpoint::Router => r.t_router_rx.map(|t| t.micros()),
        DeliveryEndpoint::Sink => r.t_sink_rx.map(|t| t.micros()),
    }
}

/// Delivered / generated over metric-counted packets. `None` when nothing
/// was generated — a missing ratio, not 0 or 1.
pub fn compute_prr(records: &[PacketRecord], endpoint: DeliveryEndpoint) -> Option<f64> {
    let measured: Vec<_> = records.iter().filter(|r| !r.warmup).collect();
    if measured.is_empty() {
        return None;
    }
    let delivered = measured.iter().filter(|r| delivered(r, endpoint)).count();
    Some(delivered as f64 / measured.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySummary {
    pub mean_us: u64,
    pub median_us: u64,
    pub p95_us: u64,
    pub count: u64,
}

/// Delay distribution over delivered, metric-counted packets; `None` when
/// nothing was delivered. Delay is endpoint arrival minus generation.
pub fn compute_delays(
    records: &[PacketRecord],
    endpoint: DeliveryEndpoint,
) -> Option<DelaySummary> {
    let mut delays: Vec<u64> = records
        .iter()
        .filter(|r| !r.warmup)
        .filter_map(|r| endpoint_time(r, endpoint).map(|t| t - r.t_generated.micros()))
        .collect();
    if delays.is_empty() {
        return None;
    }
    delays.sort_unstable();
    let n = delays.len();
    let mean = delays.iter().sum::<u64>() / n as u64;
    let median = if n % 2 == 1 {
        delays[n / 2]
    } else {
        (delays[n / 2 - 1] + delays[n / 2]) / 2
    };
    let p95 = delays[(n * 95).div_ceil(100).max(1) - 1];
    Some(DelaySummary {
        mean_us: mean,
        median_us: median,
        p95_us: p95,
        count: n as u64,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
    pub collisions: u64,
    pub csma_failures: u64,
    pub frames_tx: u64,
    pub acks_tx: u64,
    pub beacons_tx: u64,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub endpoint: DeliveryEndpoint,
    pub prr: Option<f64>,
    pub delays: Option<DelaySummary>,
    /// Radio-on fraction per node id over the whole run.
    pub duty_cycle: Vec<(NodeId, f64)>,
    pub counters: Counters,
}

impl MetricsReport {
    pub fn compute(
        packets: &PacketLog,
        stats: &RunStats,
        medium: &Medium,
        duration: Duration,
        endpoint: DeliveryEndpoint,
    ) -> MetricsReport {
        let records = &packets.records;
        let measured: Vec<&PacketRecord> = records.iter().filter(|r| !r.warmup).collect();
        let mut c = Counters {
            generated: measured.len() as u64,
            collisions: stats.collisions,
            csma_failures: stats.csma_failures,
            frames_tx: stats.frames_tx,
            acks_tx: stats.acks_tx,
            beacons_tx: stats.beacons_tx,
            ..Counters::default()
        };
        for r in &measured {
            if delivered(r, endpoint) {
                c.delivered += 1;
            } else if r.dropped.is_some() {
                c.dropped += 1;
            } else {
                c.queued += 1;
            }
        }
        let duty_cycle = (0..medium.n_nodes())
            .map(|i| {
                let id = NodeId(i as u16);
                (id, medium.duty_cycle(id, duration))
            })
            .collect();
        MetricsReport {
            endpoint,
            prr: compute_prr(records, endpoint),
            delays: compute_delays(records, endpoint),
            duty_cycle,
            counters: c,
        }
    }

    /// generated = delivered + dropped + queued, by construction; exposed
    /// so harness consumers can assert it per run.
    pub fn conservation_holds(&self) -> bool {
        self.counters.generated
            == self.counters.delivered + self.counters.dropped + self.counters.queued
    }

    pub fn duty(&self, node: NodeId) -> Option<f64> {
        self.duty_cycle
            .iter()
            .find(|(id, _)| *id == node)
            .map(|(_, d)| *d)
    }

    pub fn router_duty(&self) -> f64 {
        self.duty(ROUTER).unwrap_or(0.0)
    }

    pub fn sink_duty(&self) -> f64 {
        self.duty(SINK).unwrap_or(0.0)
    }

    pub fn leaf_duties(&self) -> impl Iterator<Item = f64> + '_ {
        self.duty_cycle
            .iter()
            .filter(|(id, _)| id.0 >= 2)
            .map(|(_, d)| *d)
    }

    pub fn mean_leaf_duty(&self) -> f64 {
        let duties: Vec<f64> = self.leaf_duties().collect();
        if duties.is_empty() {
            return 0.0;
        }
        duties.iter().sum::<f64>() / duties.len() as f64
    }

    pub fn max_leaf_duty(&self) -> f64 {
        self.leaf_duties().fold(0.0, f64::max)
    }

    /// Flat key=value summary, one line per metric, stable order.
    pub fn write_summary(&self, w: &mut impl Write) -> io::Result<()> {
        match self.prr {
            Some(p) => writeln!(w, "prr = {p:.6}")?,
            None => writeln!(w, "prr = absent")?,
        }
        match &self.delays {
            Some(d) => {
                writeln!(w, "delay_mean_us = {}", d.mean_us)?;
                writeln!(w, "delay_median_us = {}", d.median_us)?;
                writeln!(w, "delay_p95_us = {}", d.p95_us)?;
            }
            None => {
                writeln!(w, "delay_mean_us = absent")?;
                writeln!(w, "delay_median_us = absent")?;
                writeln!(w, "delay_p95_us = absent")?;
            }
        }
        let c = &self.counters;
        writeln!(w, "generated = {}", c.generated)?;
        writeln!(w, "delivered = {}", c.delivered)?;
        writeln!(w, "dropped = {}", c.dropped)?;
        writeln!(w, "queued = {}", c.queued)?;
        writeln!(w, "collisions = {}", c.collisions)?;
        writeln!(w, "csma_failures = {}", c.csma_failures)?;
        writeln!(w, "frames_tx = {}", c.frames_tx)?;
        writeln!(w, "acks_tx = {}", c.acks_tx)?;
        writeln!(w, "beacons_tx = {}", c.beacons_tx)?;
        for (id, d) in &self.duty_cycle {
            writeln!(w, "duty_node_{id} = {d:.6}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimTime;
    use crate::world::PacketLog;

    fn record(uid: u64, gen: u64) -> PacketRecord {
        PacketRecord {
            uid,
            origin: NodeId(2),
            t_generated: SimTime(gen),
            warmup: false,
            t_leaf_tx_done: None,
            t_router_rx: None,
            t_sink_rx: None,
            dropped: None,
        }
    }

    #[test]
    fn prr_is_ratio_of_delivered() {
        let mut recs: Vec<PacketRecord> = (0..500).map(|i| record(i, i * 10)).collect();
        for r in recs.iter_mut().take(490) {
            r.t_sink_rx = Some(SimTime(r.t_generated.micros() + 1000));
        }
        let prr = compute_prr(&recs, DeliveryEndpoint::Sink).unwrap();
        assert!((prr - 0.98).abs() < 1e-12);
    }

    #[test]
    fn endpoint_rule_switches_to_router() {
        let mut r = record(0, 0);
        r.t_router_rx = Some(SimTime(5000));
        let recs = vec![r];
        assert_eq!(compute_prr(&recs, DeliveryEndpoint::Router), Some(1.0));
        assert_eq!(compute_prr(&recs, DeliveryEndpoint::Sink), Some(0.0));
    }

    #[test]
    fn zero_traffic_gives_absent_prr() {
        let log = PacketLog::new(SimTime(0));
        assert_eq!(compute_prr(&log.records, DeliveryEndpoint::Sink), None);
        assert_eq!(compute_delays(&log.records, DeliveryEndpoint::Sink), None);
    }

    #[test]
    fn delay_summary_basics() {
        let mut a = record(0, 0);
        a.t_sink_rx = Some(SimTime(108_000));
        let one = compute_delays(&[a.clone()], DeliveryEndpoint::Sink).unwrap();
        assert_eq!(one.mean_us, 108_000);
        assert_eq!(one.median_us, 108_000);
        assert_eq!(one.p95_us, 108_000);

        let mut b = record(1, 0);
        b.t_sink_rx = Some(SimTime(100_000));
        let mut c = record(2, 0);
        c.t_sink_rx = Some(SimTime(200_000));
        let two = compute_delays(&[b, c], DeliveryEndpoint::Sink).unwrap();
        assert_eq!(two.mean_us, 150_000);
        assert_eq!(two.median_us, 150_000);
    }

    #[test]
    fn all_dropped_gives_absent_delays() {
        let mut r = record(0, 0);
        r.dropped = Some(crate::world::DropReason::SendFailed);
        assert_eq!(compute_delays(&[r], DeliveryEndpoint::Sink), None);
    }

    #[test]
    fn warmup_packets_are_excluded() {
        let mut warm = record(0, 10);
        warm.warmup = true;
        warm.t_sink_rx = Some(SimTime(100));
        let mut cold = record(1, 600_000);
        cold.t_sink_rx = Some(SimTime(700_000));
        let recs = vec![warm, cold];
        let prr = compute_prr(&recs, DeliveryEndpoint::Sink).unwrap();
        assert_eq!(prr, 1.0);
        let d = compute_delays(&recs, DeliveryEndpoint::Sink).unwrap();
        assert_eq!(d.count, 1);
        assert_eq!(d.mean_us, 100_000);
    }
}
