//! Discrete-event simulator of a CXL.mem-attached SSD memory expander with a
//! DRAM page cache.
//!
//! The host issues 64 B reads and writes; a Home Agent routes them by
//! physical address and converts traffic for the CXL window into CXL.mem
//! flits. The device under test is one of DRAM, CXL-DRAM, PMEM, a bare
//! CXL SSD, or a CXL SSD behind a write-back DRAM page cache with an MSHR and
//! a choice of five replacement policies.

pub mod cache;
pub mod config;
pub mod devices;
pub mod engine;
pub mod experiment;
pub mod protocol;
pub mod report;
pub mod stats;
pub mod system;
pub mod workloads;

/// Host request granularity.
pub const LINE_SIZE: u64 = 64;
/// Cache page and SSD logical block size.
pub const PAGE_SIZE: u64 = 4096;

pub use config::{parse_config, ConfigError, RunConfig};
pub use experiment::{run, run_with_trace, sweep, SweepAxis, SweepError, SweepResult};
pub use report::{emit_report, ReportFormat, StatsReport};
