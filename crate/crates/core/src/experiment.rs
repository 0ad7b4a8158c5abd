//! Single runs and device/policy sweeps.

use std::fmt;
use std::str::FromStr;
use std::thread;

use thiserror::Error;

use crate::cache::PolicyKind;
use crate::config::{ConfigError, RunConfig};
use crate::devices::DeviceKind;
use crate::report::StatsReport;
use crate::stats::Metrics;
use crate::system::{simulate_partial, SimError, SimOutcome};
use crate::workloads::{RequestTrace, WorkloadError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    /// The simulation faulted; `partial` holds what was measured before.
    #[error("simulation aborted: {source}")]
    Simulation { source: SimError, partial: Box<StatsReport> },
}

impl RunError {
    pub fn partial(&self) -> Option<&StatsReport> {
        match self {
            RunError::Simulation { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Generate the workload for `config` and replay it.
pub fn run(config: &RunConfig) -> Result<StatsReport, RunError> {
    config.validate()?;
    let trace = config.generate_trace()?;
    run_with_trace(config, &trace)
}

/// Replay an existing trace under `config`.
pub fn run_with_trace(config: &RunConfig, trace: &RequestTrace) -> Result<StatsReport, RunError> {
    config.validate()?;
    match simulate_partial(&config.system_config(), trace) {
        Ok(outcome) => Ok(report(config, trace, &outcome)),
        Err(failure) => Err(RunError::Simulation {
            partial: Box::new(report(config, trace, &failure.partial)),
            source: failure.error,
        }),
    }
}

fn report(config: &RunConfig, trace: &RequestTrace, outcome: &SimOutcome) -> StatsReport {
    let mut metrics: Metrics = outcome.stats.summarize();
    let secs = outcome.stats.elapsed().as_secs();
    metrics.qps = trace.app_ops.filter(|_| secs > 0.0).map(|ops| ops as f64 / secs);
    StatsReport { config: config.clone(), metrics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Device,
    Policy,
}

impl SweepAxis {
    /// Every value the axis can take, in declaration order.
    pub fn all_values(self) -> Vec<String> {
        match self {
            SweepAxis::Device => DeviceKind::ALL.iter().map(|d| d.to_string()).collect(),
            SweepAxis::Policy => PolicyKind::ALL.iter().map(|p| p.to_string()).collect(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Device => "device",
            SweepAxis::Policy => "policy",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "device" => Ok(SweepAxis::Device),
            "policy" => Ok(SweepAxis::Policy),
            _ => Err(format!("unknown sweep axis {s:?} (expected device or policy)")),
        }
    }
}

pub type SweepResult = Vec<StatsReport>;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("invalid {axis} value {value:?}: {reason}")]
    BadValue { axis: SweepAxis, value: String, reason: String },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    /// A run failed. `completed` holds the reports of runs that succeeded,
    /// in value order.
    #[error("sweep run {value:?} failed: {source}")]
    Run { value: String, source: RunError, completed: Vec<StatsReport> },
}

impl SweepError {
    pub fn completed(&self) -> &[StatsReport] {
        match self {
            SweepError::Run { completed, .. } => completed,
            _ => &[],
        }
    }
}

/// Configuration for one point of a sweep.
pub fn sweep_point(base: &RunConfig, axis: SweepAxis, value: &str) -> Result<RunConfig, SweepError> {
    let bad = |reason: String| SweepError::BadValue { axis, value: value.to_string(), reason };
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Device => {
            cfg.device = value.parse().map_err(|e| bad(format!("{e}")))?;
            cfg.policy = if cfg.device.has_cache() { Some(base.policy.unwrap_or(PolicyKind::Lru)) } else { None };
        }
        SweepAxis::Policy => {
            cfg.device = DeviceKind::CxlSsdCached;
            cfg.policy = Some(value.parse().map_err(|e| bad(format!("{e}")))?);
        }
    }
    cfg.validate().map_err(|e| bad(e.to_string()))?;
    Ok(cfg)
}

/// One run per value over a single shared trace. Runs execute on separate
/// threads; reports come back in value order.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[String]) -> Result<SweepResult, SweepError> {
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    let configs = values.iter().map(|v| sweep_point(base, axis, v)).collect::<Result<Vec<_>, _>>()?;
    let trace = base.generate_trace()?;
    let results: Vec<Result<StatsReport, RunError>> = thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(|| run_with_trace(cfg, &trace))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep run panicked")).collect()
    });
    let mut completed = Vec::with_capacity(results.len());
    let mut failure = None;
    for (value, result) in values.iter().zip(results) {
        match result {
            Ok(r) => completed.push(r),
            Err(source) if failure.is_none() => failure = Some((value.clone(), source)),
            Err(_) => {}
        }
    }
    match failure {
        None => Ok(completed),
        Some((value, source)) => Err(SweepError::Run { value, source, completed }),
    }
}
