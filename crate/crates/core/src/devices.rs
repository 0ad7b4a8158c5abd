//! Backend timing for the five evaluated memory devices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::protocol::Target;
use crate::stats::AccessKind;
use crate::PAGE_SIZE;

pub const DEFAULT_DRAM_NS: u64 = 45;
pub const DEFAULT_PMEM_READ_NS: u64 = 150;
pub const DEFAULT_PMEM_WRITE_NS: u64 = 500;
/// CXL.mem processing latency per conversion stage; a round trip crosses two.
pub const DEFAULT_CXL_STAGE_NS: u64 = 25;
pub const DEFAULT_CACHE_ACCESS_NS: u64 = 50;
pub const DEFAULT_SSD_CAPACITY: u64 = 16 << 30;
pub const DEFAULT_SSD_READ_NS: u64 = 25_000;
pub const DEFAULT_SSD_PROGRAM_NS: u64 = 300_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("logical block {lba} is beyond the device's {blocks} blocks")]
    AddressFault { lba: u64, blocks: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    #[serde(rename = "dram")]
    Dram,
    #[serde(rename = "cxl-dram")]
    CxlDram,
    #[serde(rename = "pmem")]
    Pmem,
    #[serde(rename = "cxl-ssd")]
    CxlSsd,
    #[serde(rename = "cxl-ssd-cached")]
    CxlSsdCached,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 5] =
        [DeviceKind::Dram, DeviceKind::CxlDram, DeviceKind::Pmem, DeviceKind::CxlSsd, DeviceKind::CxlSsdCached];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Dram => "dram",
            DeviceKind::CxlDram => "cxl-dram",
            DeviceKind::Pmem => "pmem",
            DeviceKind::CxlSsd => "cxl-ssd",
            DeviceKind::CxlSsdCached => "cxl-ssd-cached",
        }
    }

    pub fn is_cxl(self) -> bool {
        matches!(self, DeviceKind::CxlDram | DeviceKind::CxlSsd | DeviceKind::CxlSsdCached)
    }

    pub fn has_ssd(self) -> bool {
        matches!(self, DeviceKind::CxlSsd | DeviceKind::CxlSsdCached)
    }

    pub fn has_cache(self) -> bool {
        self == DeviceKind::CxlSsdCached
    }

    /// Address map target of the device window.
    pub fn target(self) -> Target {
        match self {
            DeviceKind::Dram => Target::LocalDram,
            DeviceKind::Pmem => Target::LocalPmem,
            _ => Target::CxlDevice(0),
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown device {0:?} (expected dram, cxl-dram, pmem, cxl-ssd or cxl-ssd-cached)")]
pub struct ParseDeviceError(pub String);

impl FromStr for DeviceKind {
    type Err = ParseDeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceKind::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseDeviceError(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceTiming {
    pub read_ns: u64,
    pub write_ns: u64,
}

impl DeviceTiming {
    pub fn latency_ns(&self, kind: AccessKind) -> u64 {
        match kind {
            AccessKind::Read => self.read_ns,
            AccessKind::Write => self.write_ns,
        }
    }
}

/// Fixed latencies of the non-flash components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timings {
    pub dram: DeviceTiming,
    pub pmem: DeviceTiming,
    pub cxl_stage_ns: u64,
    pub cache_access_ns: u64,
}

impl Default for Timings {
    fn default() -> Self {
        Timings {
            dram: DeviceTiming { read_ns: DEFAULT_DRAM_NS, write_ns: DEFAULT_DRAM_NS },
            pmem: DeviceTiming { read_ns: DEFAULT_PMEM_READ_NS, write_ns: DEFAULT_PMEM_WRITE_NS },
            cxl_stage_ns: DEFAULT_CXL_STAGE_NS,
            cache_access_ns: DEFAULT_CACHE_ACCESS_NS,
        }
    }
}

impl Timings {
    /// Home Agent encode plus device decode.
    pub fn cxl_round_trip_ns(&self) -> u64 {
        2 * self.cxl_stage_ns
    }
}

pub fn dram_access(timings: &Timings, kind: AccessKind) -> u64 {
    timings.dram.latency_ns(kind)
}

pub fn pmem_access(timings: &Timings, kind: AccessKind) -> u64 {
    timings.pmem.latency_ns(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsdConfig {
    pub capacity: u64,
    pub page_read_ns: u64,
    pub page_program_ns: u64,
    pub queue_width: usize,
}

impl Default for SsdConfig {
    fn default() -> Self {
        SsdConfig {
            capacity: DEFAULT_SSD_CAPACITY,
            page_read_ns: DEFAULT_SSD_READ_NS,
            page_program_ns: DEFAULT_SSD_PROGRAM_NS,
            queue_width: 1,
        }
    }
}

impl SsdConfig {
    pub fn blocks(&self) -> u64 {
        self.capacity / PAGE_SIZE
    }

    pub fn latency_ns(&self, kind: AccessKind) -> u64 {
        match kind {
            AccessKind::Read => self.page_read_ns,
            AccessKind::Write => self.page_program_ns,
        }
    }
}

/// Flash timing: `queue_width` independent lanes, each serializing its ops.
#[derive(Debug, Clone)]
pub struct SsdModel {
    config: SsdConfig,
    lanes: Vec<SimTime>,
}

impl SsdModel {
    pub fn new(config: SsdConfig) -> Self {
        SsdModel { config, lanes: vec![SimTime::ZERO; config.queue_width.max(1)] }
    }

    pub fn config(&self) -> &SsdConfig {
        &self.config
    }

    /// Submit a page read or program at `now`; returns its completion time.
    pub fn page_op(&mut self, now: SimTime, kind: AccessKind, lba: u64) -> Result<SimTime, DeviceError> {
        let blocks = self.config.blocks();
        if lba >= blocks {
            return Err(DeviceError::AddressFault { lba, blocks });
        }
        let lane = self.lanes.iter_mut().min_by_key(|free| **free).expect("at least one lane");
        let start = (*lane).max(now);
        let done = start + SimTime::from_ns(self.config.latency_ns(kind));
        *lane = done;
        Ok(done)
    }
}

/// Outcome of the page cache lookup for the cached device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
}

/// Unloaded latency of one 64 B access: no queueing, no write-back on the
/// critical path.
pub fn end_to_end_latency(
    device: DeviceKind,
    kind: AccessKind,
    cache_outcome: Option<CacheOutcome>,
    timings: &Timings,
    ssd: &SsdConfig,
) -> u64 {
    let cxl = timings.cxl_round_trip_ns();
    match device {
        DeviceKind::Dram => dram_access(timings, kind),
        DeviceKind::Pmem => pmem_access(timings, kind),
        DeviceKind::CxlDram => cxl + dram_access(timings, kind),
        DeviceKind::CxlSsd => cxl + ssd.latency_ns(kind),
        DeviceKind::CxlSsdCached => match cache_outcome.unwrap_or(CacheOutcome::Hit) {
            CacheOutcome::Hit => cxl + timings.cache_access_ns,
            // a write miss still fetches the page before merging
            CacheOutcome::Miss => cxl + timings.cache_access_ns + ssd.page_read_ns,
        },
    }
}
