//! Building and running a single scenario: topology, traffic schedule,
//! the event loop, and metric extraction.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use thiserror::Error;

use crate::harness::config::{ConfigError, ScenarioConfig, TrafficModel};
use crate::harness::metrics::{DeliveryEndpoint, MetricsReport};
use crate::radio::NodeId;
use crate::sim::{RandomSource, SimTime};
use crate::trace::Trace;
use crate::world::{Protocol, World, WorldError};

/// Traffic draws come from their own stream family so protocol-level draw
/// sequences (backoffs) are identical whether arrivals are generated or
/// injected by hand.
const TRAFFIC_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub enum TraceMode {
    Off,
    Memory,
    File(PathBuf),
}

#[derive(Debug)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    /// Present for [`TraceMode::Memory`].
    pub trace: Option<String>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] WorldError),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

/// Where packets count as delivered for this configuration.
pub fn delivery_endpoint(cfg: &ScenarioConfig) -> DeliveryEndpoint {
    match cfg.sim.protocol {
        Protocol::Lpl => DeliveryEndpoint::Sink,
        Protocol::Scosens => {
            if cfg.sim.scosens.tp_enabled {
                DeliveryEndpoint::Sink
            } else {
                DeliveryEndpoint::Router
            }
        }
    }
}

/// Validate, build, run and measure one scenario.
pub fn run_scenario(cfg: &ScenarioConfig, trace_mode: TraceMode) -> Result<RunOutput, ScenarioError> {
    cfg.validate()?;
    let trace = match &trace_mode {
        TraceMode::Off => Trace::disabled(),
        TraceMode::Memory => Trace::in_memory(),
        TraceMode::File(path) => {
            let f = File::create(path)?;
            Trace::to_writer(Box::new(BufWriter::new(f)))
        }
    };
    let mut world = World::new(cfg.sim.clone(), SimTime(cfg.warmup), trace);
    schedule_traffic(&mut world, cfg);
    world.run(SimTime(cfg.duration))?;
    world.trace.finish()?;

    let metrics = MetricsReport::compute(
        &world.packets,
        &world.stats,
        &world.medium,
        cfg.duration,
        delivery_endpoint(cfg),
    );
    let trace = std::mem::replace(&mut world.trace, Trace::disabled()).into_string();
    Ok(RunOutput { metrics, trace })
}

/// Pre-schedule every arrival for the run. Each leaf gets an independent
/// uniform random phase in [0, pai); the Poisson model draws exponential
/// inter-arrival gaps with the same mean.
fn schedule_traffic(world: &mut World, cfg: &ScenarioConfig) {
    if matches!(cfg.traffic, TrafficModel::None) {
        return;
    }
    for leaf in world.leaf_ids() {
        let mut rng = traffic_stream(cfg.sim.seed, leaf);
        match cfg.traffic {
            TrafficModel::Periodic => {
                let mut t = rng.pick(cfg.pai);
                while t < cfg.duration {
                    world.schedule_arrival(leaf, SimTime(t));
                    t += cfg.pai;
                }
            }
            TrafficModel::Poisson => {
                let mut t = exponential_gap(&mut rng, cfg.pai);
                while t < cfg.duration {
                    world.schedule_arrival(leaf, SimTime(t));
                    t += exponential_gap(&mut rng, cfg.pai);
                }
            }
            TrafficModel::None => unreachable!(),
        }
    }
}

fn traffic_stream(seed: u64, leaf: NodeId) -> RandomSource {
    RandomSource::for_stream(seed, TRAFFIC_STREAM_BASE + leaf.0 as u64)
}

fn exponential_gap(rng: &mut RandomSource, mean: u64) -> u64 {
    let u = rng.unit();
    ((-u.ln()) * mean as f64).round().max(1.0) as u64
}
