//! Traffic generators for the bandwidth, latency and key-value experiments,
//! plus a text trace reader.
//!
//! Every generator draws from `Xoshiro256PlusPlus` seeded through SplitMix64
//! (`seed_from_u64`), so a spec and seed pin the trace exactly.

mod kv;
mod randlat;
mod stream;
mod trace_file;

pub use kv::{gen_kv, KvLayout, KV_PHASES};
pub use randlat::gen_randlat;
pub use stream::{gen_stream, gen_stream_kernel, StreamKernel};
pub use trace_file::{parse_trace, read_trace, TraceError};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::protocol::{MemRequest, Payload, RequestKind, EXPANDER_BASE};

pub const DEFAULT_FOOTPRINT: u64 = 8 << 20;
pub const DEFAULT_OP_COUNT: u64 = 10_000;
pub const DEFAULT_VALUE_SIZE: u64 = 216;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_KV_METADATA_BYTES: u64 = 64 << 10;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("footprint of {0} bytes must be a non-zero multiple of 64")]
    BadFootprint(u64),
    #[error("op_count must be at least 1")]
    ZeroOps,
    #[error("value_size must be at least 1 byte")]
    ZeroValueSize,
    #[error("metadata region of {0} bytes must be a non-zero multiple of 64")]
    BadMetadataRegion(u64),
    #[error("trace workload needs a trace path")]
    MissingTracePath,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WorkloadKind {
    #[serde(rename = "stream")]
    Stream,
    #[serde(rename = "randlat")]
    RandLat,
    #[serde(rename = "kv")]
    KeyValue,
    #[serde(rename = "trace")]
    TraceFile,
}

impl WorkloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadKind::Stream => "stream",
            WorkloadKind::RandLat => "randlat",
            WorkloadKind::KeyValue => "kv",
            WorkloadKind::TraceFile => "trace",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown workload {0:?} (expected stream, randlat, kv or trace)")]
pub struct ParseWorkloadError(pub String);

impl FromStr for WorkloadKind {
    type Err = ParseWorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stream" => Ok(WorkloadKind::Stream),
            "randlat" => Ok(WorkloadKind::RandLat),
            "kv" => Ok(WorkloadKind::KeyValue),
            "trace" => Ok(WorkloadKind::TraceFile),
            _ => Err(ParseWorkloadError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Stream: bytes per array. RandLat: size of the chased region.
    pub footprint: u64,
    /// RandLat: measured reads. KeyValue: operations per phase.
    pub op_count: u64,
    pub value_size: u64,
    pub seed: u64,
    pub target_device_base: u64,
    /// RandLat: touch every page of the region once before measuring.
    pub warmup: bool,
    pub stream_kernel: StreamKernel,
    pub kv_metadata_bytes: u64,
    pub trace_path: Option<PathBuf>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            kind: WorkloadKind::RandLat,
            footprint: DEFAULT_FOOTPRINT,
            op_count: DEFAULT_OP_COUNT,
            value_size: DEFAULT_VALUE_SIZE,
            seed: DEFAULT_SEED,
            target_device_base: EXPANDER_BASE,
            warmup: false,
            stream_kernel: StreamKernel::All,
            kv_metadata_bytes: DEFAULT_KV_METADATA_BYTES,
            trace_path: None,
        }
    }
}

impl WorkloadSpec {
    pub fn rng(&self) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(self.seed)
    }
}

/// Requests in program order. A request flagged dependent issues only after
/// every earlier request has completed; the first `warmup` requests are
/// excluded from the statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequestTrace {
    pub requests: Vec<MemRequest>,
    pub dependent: Vec<bool>,
    pub warmup: usize,
    /// Application-level operations represented (key-value workload only).
    pub app_ops: Option<u64>,
}

impl RequestTrace {
    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub(crate) fn push(&mut self, addr: u64, kind: RequestKind, dependent: bool, payload_word: u64) {
        let id = self.requests.len() as u32;
        let req = match kind {
            RequestKind::Write => MemRequest::write(id, addr, SimTime::ZERO, Payload::from_word(payload_word)),
            _ => MemRequest::new(id, addr, kind, SimTime::ZERO, None).expect("generated address is aligned"),
        };
        self.requests.push(req);
        self.dependent.push(dependent);
    }

    pub fn reads(&self) -> usize {
        self.requests.iter().filter(|r| r.kind == RequestKind::Read).count()
    }

    pub fn writes(&self) -> usize {
        self.requests.iter().filter(|r| r.kind == RequestKind::Write).count()
    }

    /// Render in the text trace format (reads and writes only).
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.requests.len() * 32);
        for r in &self.requests {
            let op = match r.kind {
                RequestKind::Read => 'R',
                RequestKind::Write => 'W',
                _ => continue,
            };
            out.push_str(&format!("{} {} {:#x} 64\n", r.issue_time.ticks() / 1000, op, r.addr));
        }
        out
    }
}

/// Build the trace described by `spec`.
pub fn generate(spec: &WorkloadSpec) -> Result<RequestTrace, WorkloadError> {
    match spec.kind {
        WorkloadKind::Stream => gen_stream(spec),
        WorkloadKind::RandLat => gen_randlat(spec),
        WorkloadKind::KeyValue => gen_kv(spec),
        WorkloadKind::TraceFile => {
            let path = spec.trace_path.as_ref().ok_or(WorkloadError::MissingTracePath)?;
            Ok(read_trace(path)?)
        }
    }
}

/// SplitMix64 finalizer; spreads keys and ids into payload words.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn generated_addresses_are_aligned(
            kind in 0usize..3,
            lines in 1u64..2048,
            ops in 1u64..300,
            value_size in 1u64..700,
            seed in any::<u64>(),
        ) {
            let spec = WorkloadSpec {
                kind: [WorkloadKind::Stream, WorkloadKind::RandLat, WorkloadKind::KeyValue][kind],
                footprint: lines * 64,
                op_count: ops,
                value_size,
                seed,
                ..Default::default()
            };
            let trace = generate(&spec).unwrap();
            prop_assert!(trace.requests.iter().all(|r| r.addr % 64 == 0 && r.addr >= EXPANDER_BASE));
            prop_assert_eq!(trace.requests.len(), trace.dependent.len());
        }

        #[test]
        fn same_seed_same_bytes(seed in any::<u64>(), kind in 0usize..3) {
            let spec = WorkloadSpec {
                kind: [WorkloadKind::Stream, WorkloadKind::RandLat, WorkloadKind::KeyValue][kind],
                footprint: 64 << 10,
                op_count: 200,
                seed,
                ..Default::default()
            };
            prop_assert_eq!(generate(&spec).unwrap().to_text(), generate(&spec).unwrap().to_text());
        }
    }

    #[test]
    fn names_parse() {
        for k in [WorkloadKind::Stream, WorkloadKind::RandLat, WorkloadKind::KeyValue, WorkloadKind::TraceFile] {
            assert_eq!(k.as_str().parse::<WorkloadKind>().unwrap(), k);
        }
        assert!("ycsb".parse::<WorkloadKind>().is_err());
    }

    #[test]
    fn trace_workload_needs_path() {
        let spec = WorkloadSpec { kind: WorkloadKind::TraceFile, ..Default::default() };
        assert!(matches!(generate(&spec), Err(WorkloadError::MissingTracePath)));
    }
}
