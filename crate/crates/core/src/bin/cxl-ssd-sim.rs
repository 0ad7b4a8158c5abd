use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::info;
use serde_json::Value;

use cxl_ssd_sim::config::parse_config_partial;
use cxl_ssd_sim::experiment::{self, RunError, SweepAxis, SweepError};
use cxl_ssd_sim::report::comparison_table;
use cxl_ssd_sim::workloads::{TraceError, WorkloadError};
use cxl_ssd_sim::{emit_report, ConfigError, RunConfig, StatsReport};

const EXIT_CONFIG: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_IO: u8 = 4;

/// Event-driven CXL memory-expander simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// JSON configuration document; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dram | cxl-dram | pmem | cxl-ssd | cxl-ssd-cached
    #[arg(long)]
    device: Option<String>,
    /// direct | lru | fifo | 2q | lfru
    #[arg(long)]
    policy: Option<String>,
    /// stream | randlat | kv | trace
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// json | csv
    #[arg(long)]
    format: Option<String>,
    /// Run once per value of this axis: device | policy
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated sweep values; every value of the axis when omitted.
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    values: Option<Vec<String>>,
}

enum Failure {
    Config(String),
    Simulation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Simulation(_) => EXIT_SIMULATION,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Simulation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error: {e}"))
    }
}

fn workload_failure(e: WorkloadError) -> Failure {
    match e {
        WorkloadError::Trace(TraceError::Io { .. }) => Failure::Io(e.to_string()),
        other => Failure::Config(format!("workload error: {other}")),
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("reading config {}: {e}", path.display())))?
        }
        None => String::new(),
    };
    let mut cfg = parse_config_partial(&text)?;
    let overrides = [
        ("device", cli.device.clone().map(Value::from)),
        ("policy", cli.policy.clone().map(Value::from)),
        ("workload", cli.workload.clone().map(Value::from)),
        ("seed", cli.seed.map(Value::from)),
        ("format", cli.format.clone().map(Value::from)),
        ("output", cli.output.as_ref().map(|p| Value::from(p.display().to_string()))),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    // a device flag without a policy flag drops a policy the new device cannot use
    if cli.device.is_some() && cli.policy.is_none() && !cfg.device.has_cache() {
        cfg.policy = None;
    }
    Ok(cfg.finalize()?)
}

fn write(reports: &[StatsReport], cfg: &RunConfig) -> Result<(), Failure> {
    let path = cfg.output.as_deref().map(Path::new);
    emit_report(reports, cfg.format, path).map_err(|e| {
        let dest = path.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        Failure::Io(format!("writing report to {dest}: {e}"))
    })?;
    if let Some(p) = path {
        info!("wrote {} report(s) to {}", reports.len(), p.display());
    }
    Ok(())
}

fn run_single(cfg: &RunConfig) -> Result<(), Failure> {
    match experiment::run(cfg) {
        Ok(report) => write(std::slice::from_ref(&report), cfg),
        Err(RunError::Config(e)) => Err(e.into()),
        Err(RunError::Workload(e)) => Err(workload_failure(e)),
        Err(e @ RunError::Simulation { .. }) => {
            // keep what was measured before the fault
            if let Some(partial) = e.partial() {
                write(std::slice::from_ref(partial), cfg)?;
            }
            Err(Failure::Simulation(e.to_string()))
        }
    }
}

fn run_sweep(cfg: &RunConfig, axis: &str, values: Option<&[String]>) -> Result<(), Failure> {
    let axis: SweepAxis = axis.parse().map_err(Failure::Config)?;
    let values = values.map_or_else(|| axis.all_values(), <[String]>::to_vec);
    match experiment::sweep(cfg, axis, &values) {
        Ok(reports) => {
            eprint!("{}", comparison_table(&reports));
            write(&reports, cfg)
        }
        Err(SweepError::Workload(e)) => Err(workload_failure(e)),
        Err(e @ (SweepError::NoValues | SweepError::BadValue { .. })) => Err(Failure::Config(e.to_string())),
        Err(e @ SweepError::Run { .. }) => {
            let done = e.completed();
            if !done.is_empty() {
                eprint!("{}", comparison_table(done));
                write(done, cfg)?;
            }
            Err(Failure::Simulation(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|cfg| match &cli.sweep {
        Some(axis) => run_sweep(&cfg, axis, cli.values.as_deref()),
        None => run_single(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
