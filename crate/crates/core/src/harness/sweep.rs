//! Parameter sweeps over the protocol × packet-arrival-interval grid, with
//! independent seed replicates per cell. Runs execute in parallel; nothing
//! is shared between them, and a failed run is reported in its cell
//! without aborting the rest.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::harness::config::ScenarioConfig;
use crate::harness::metrics::MetricsReport;
use crate::harness::scenario::{run_scenario, TraceMode};
use crate::sim::Duration;
use crate::world::Protocol;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    /// Column order of the report (left to right).
    pub protocols: Vec<Protocol>,
    /// Row order of the report (top to bottom), µs.
    pub pais: Vec<Duration>,
    pub replicates: u32,
}

impl SweepSpec {
    /// The experiment grid: both protocols over the packet-arrival
    /// intervals 1500, 1000, 500 and 100 ms.
    pub fn paper_grid(base: ScenarioConfig, replicates: u32) -> SweepSpec {
        SweepSpec {
            base,
            protocols: vec![Protocol::Lpl, Protocol::Scosens],
            pais: vec![1_500_000, 1_000_000, 500_000, 100_000],
            replicates,
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub seed: u64,
    pub outcome: Result<MetricsReport, String>,
}

#[derive(Debug)]
pub struct Cell {
    pub protocol: Protocol,
    pub pai: Duration,
    pub runs: Vec<RunResult>,
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

impl Cell {
    pub fn reports(&self) -> impl Iterator<Item = &MetricsReport> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> Vec<(u64, &str)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e.as_str())))
            .collect()
    }

    pub fn prr_stats(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.reports().filter_map(|m| m.prr).collect();
        mean_std(&vals)
    }

    pub fn delay_stats_us(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self
            .reports()
            .filter_map(|m| m.delays.as_ref().map(|d| d.mean_us as f64))
            .collect();
        mean_std(&vals)
    }
}

#[derive(Debug)]
pub struct SweepReport {
    pub cells: Vec<Cell>,
    pub protocols: Vec<Protocol>,
    pub pais: Vec<Duration>,
}

impl SweepReport {
    pub fn cell(&self, protocol: Protocol, pai: Duration) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.protocol == protocol && c.pai == pai)
    }

    pub fn any_failures(&self) -> bool {
        self.cells.iter().any(|c| !c.failures().is_empty())
    }

    /// Wide table, one row per arrival interval, protocol column groups in
    /// the configured order: mean ± stddev of PRR and mean delay.
    pub fn write_table_csv(&self, w: &mut impl Write) -> io::Result<()> {
        write!(w, "pai_ms")?;
        for p in &self.protocols {
            let name = p.name();
            write!(
                w,
                ",{name}_prr_mean,{name}_prr_std,{name}_delay_ms_mean,{name}_delay_ms_std"
            )?;
        }
        writeln!(w)?;
        for &pai in &self.pais {
            write!(w, "{}", pai / 1000)?;
            for &p in &self.protocols {
                let cell = self.cell(p, pai);
                let prr = cell.and_then(|c| c.prr_stats());
                let delay = cell.and_then(|c| c.delay_stats_us());
                match prr {
                    Some((m, s)) => write!(w, ",{m:.4},{s:.4}")?,
                    None => write!(w, ",,")?,
                }
                match delay {
                    Some((m, s)) => write!(w, ",{:.2},{:.2}", m / 1000.0, s / 1000.0)?,
                    None => write!(w, ",,")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Long table, one row per run.
    pub fn write_runs_csv(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(
            w,
            "protocol,pai_ms,seed,prr,delay_mean_ms,delay_median_ms,delay_p95_ms,\
             duty_router,duty_leaf_mean,generated,delivered,dropped,queued,\
             collisions,csma_failures,error"
        )?;
        for cell in &self.cells {
            for run in &cell.runs {
                write!(w, "{},{},{}", cell.protocol.name(), cell.pai / 1000, run.seed)?;
                match &run.outcome {
                    Ok(m) => {
                        match m.prr {
                            Some(p) => write!(w, ",{p:.4}")?,
                            None => write!(w, ",")?,
                        }
                        match &m.delays {
                            Some(d) => write!(
                                w,
                                ",{:.2},{:.2},{:.2}",
                                d.mean_us as f64 / 1000.0,
                                d.median_us as f64 / 1000.0,
                                d.p95_us as f64 / 1000.0
                            )?,
                            None => write!(w, ",,,")?,
                        }
                        let c = &m.counters;
                        writeln!(
                            w,
                            ",{:.4},{:.4},{},{},{},{},{},{},",
                            m.router_duty(),
                            m.mean_leaf_duty(),
                            c.generated,
                            c.delivered,
                            c.dropped,
                            c.queued,
                            c.collisions,
                            c.csma_failures
                        )?;
                    }
                    Err(e) => {
                        writeln!(w, ",,,,,,,,,,,,,{}", e.replace(',', ";"))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Run the whole grid. Replicate r of any cell uses seed `base_seed + r`,
/// so a rerun of the same spec reproduces the same table.
pub fn run_sweep(spec: &SweepSpec) -> SweepReport {
    let mut jobs: Vec<(Protocol, Duration, u64)> = Vec::new();
    for &pai in &spec.pais {
        for &protocol in &spec.protocols {
            for r in 0..spec.replicates.max(1) {
                jobs.push((protocol, pai, spec.base.sim.seed + r as u64));
            }
        }
    }

    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(protocol, pai, seed)| {
            let mut cfg = spec.base.clone();
            cfg.sim.protocol = protocol;
            cfg.pai = pai;
            cfg.sim.seed = seed;
            let outcome = run_scenario(&cfg, TraceMode::Off)
                .map(|out| out.metrics)
                .map_err(|e| e.to_string());
            RunResult { seed, outcome }
        })
        .collect();

    let mut cells: Vec<Cell> = Vec::new();
    let mut it = results.into_iter();
    for &pai in &spec.pais {
        for &protocol in &spec.protocols {
            let runs: Vec<RunResult> = (0..spec.replicates.max(1))
                .map(|_| it.next().expect("one result per job"))
                .collect();
            cells.push(Cell {
                protocol,
                pai,
                runs,
            });
        }
    }
    SweepReport {
        cells,
        protocols: spec.protocols.clone(),
        pais: spec.pais.clone(),
    }
}
