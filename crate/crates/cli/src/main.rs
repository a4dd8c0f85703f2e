//! Command-line front end: single runs and protocol × load sweeps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime fault,
//! 3 partial sweep failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rdcsim::harness::{
    run_scenario, run_sweep, ConfigError, ScenarioConfig, ScenarioError, SweepSpec, TraceMode,
};
use rdcsim::world::Protocol;

#[derive(Parser, Debug)]
#[command(name = "rdcsim", version, about = "Duty-cycled MAC/RDC protocol simulator")]
struct Cli {
    /// Config file (flat key = value with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Random seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,

    /// Protocol: scosens or lpl.
    #[arg(long)]
    protocol: Option<String>,

    /// Packet arrival interval per leaf, in milliseconds.
    #[arg(long)]
    pai_ms: Option<u64>,

    /// Simulated run length, in seconds.
    #[arg(long)]
    duration_s: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Also write the event trace (trace.txt in the output directory).
    #[arg(long)]
    trace: bool,

    /// Run the full protocol × arrival-interval sweep instead of one run.
    #[arg(long)]
    sweep: bool,

    /// Seed replicates per sweep cell.
    #[arg(long, default_value_t = 5)]
    replicates: u32,
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(protocol) = &cli.protocol {
        cfg.sim.protocol = match protocol.as_str() {
            "scosens" => Protocol::Scosens,
            "lpl" => Protocol::Lpl,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown protocol {other:?} (expected scosens or lpl)"
                )))
            }
        };
    }
    if let Some(pai) = cli.pai_ms {
        cfg.pai = pai * 1_000;
    }
    if let Some(secs) = cli.duration_s {
        cfg.duration = secs * 1_000_000;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn single_run(cli: &Cli, cfg: &ScenarioConfig) -> Result<ExitCode, anyhow::Error> {
    fs::create_dir_all(&cli.out_dir)?;
    let trace_mode = if cli.trace {
        TraceMode::File(cli.out_dir.join("trace.txt"))
    } else {
        TraceMode::Off
    };
    let out = match run_scenario(cfg, trace_mode) {
        Ok(out) => out,
        Err(ScenarioError::Config(e)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };

    let summary_path = cli.out_dir.join("summary.txt");
    let mut w = BufWriter::new(File::create(&summary_path)?);
    writeln!(w, "protocol = {}", cfg.sim.protocol.name())?;
    writeln!(w, "seed = {}", cfg.sim.seed)?;
    writeln!(w, "pai_ms = {}", cfg.pai / 1000)?;
    writeln!(w, "duration_s = {}", cfg.duration / 1_000_000)?;
    out.metrics.write_summary(&mut w)?;
    w.flush()?;

    match out.metrics.prr {
        Some(prr) => println!(
            "{} pai={}ms seed={}: prr={:.4} delay_mean={}ms",
            cfg.sim.protocol.name(),
            cfg.pai / 1000,
            cfg.sim.seed,
            prr,
            out.metrics
                .delays
                .as_ref()
                .map(|d| (d.mean_us / 1000).to_string())
                .unwrap_or_else(|| "-".into()),
        ),
        None => println!(
            "{} pai={}ms seed={}: no metric-counted traffic",
            cfg.sim.protocol.name(),
            cfg.pai / 1000,
            cfg.sim.seed
        ),
    }
    println!("summary: {}", summary_path.display());
    if cli.trace {
        println!("trace:   {}", cli.out_dir.join("trace.txt").display());
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_run(cli: &Cli, cfg: &ScenarioConfig) -> Result<ExitCode, anyhow::Error> {
    fs::create_dir_all(&cli.out_dir)?;
    let spec = SweepSpec::paper_grid(cfg.clone(), cli.replicates);
    let report = run_sweep(&spec);

    let table_path = cli.out_dir.join("sweep_table.csv");
    let mut w = BufWriter::new(File::create(&table_path)?);
    report.write_table_csv(&mut w)?;
    w.flush()?;

    let runs_path = cli.out_dir.join("sweep_runs.csv");
    let mut w = BufWriter::new(File::create(&runs_path)?);
    report.write_runs_csv(&mut w)?;
    w.flush()?;

    let mut stdout_table = Vec::new();
    report.write_table_csv(&mut stdout_table)?;
    print!("{}", String::from_utf8_lossy(&stdout_table));
    println!("table: {}", table_path.display());
    println!("runs:  {}", runs_path.display());

    if report.any_failures() {
        for cell in &report.cells {
            for (seed, err) in cell.failures() {
                eprintln!(
                    "cell {} pai={}ms seed={seed} failed: {err}",
                    cell.protocol.name(),
                    cell.pai / 1000
                );
            }
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = if cli.sweep {
        sweep_run(&cli, &cfg)
    } else {
        single_run(&cli, &cfg)
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
