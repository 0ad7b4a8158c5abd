//! Key-value store access pattern: a small hot index region touched once per
//! operation plus fixed-size record slots laid out in insertion order.

use rand::seq::SliceRandom;

use super::{mix64, RequestTrace, WorkloadError, WorkloadSpec};
use crate::protocol::RequestKind;
use crate::LINE_SIZE;

/// Phases run back to back, `op_count` operations each.
pub const KV_PHASES: [&str; 4] = ["insert", "query", "update", "delete"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KvLayout {
    pub metadata_base: u64,
    pub metadata_lines: u64,
    pub records_base: u64,
    pub lines_per_record: u64,
}

impl KvLayout {
    pub fn new(spec: &WorkloadSpec) -> Result<Self, WorkloadError> {
        if spec.value_size == 0 {
            return Err(WorkloadError::ZeroValueSize);
        }
        if spec.kv_metadata_bytes < LINE_SIZE || !spec.kv_metadata_bytes.is_multiple_of(LINE_SIZE) {
            return Err(WorkloadError::BadMetadataRegion(spec.kv_metadata_bytes));
        }
        Ok(KvLayout {
            metadata_base: spec.target_device_base,
            metadata_lines: spec.kv_metadata_bytes / LINE_SIZE,
            records_base: spec.target_device_base + spec.kv_metadata_bytes,
            lines_per_record: spec.value_size.div_ceil(LINE_SIZE),
        })
    }

    pub fn metadata_line(&self, key: u64) -> u64 {
        self.metadata_base + (mix64(key) % self.metadata_lines) * LINE_SIZE
    }

    pub fn record_lines(&self, key: u64) -> impl Iterator<Item = u64> + '_ {
        let base = self.records_base + key * self.lines_per_record * LINE_SIZE;
        (0..self.lines_per_record).map(move |l| base + l * LINE_SIZE)
    }

    /// Bytes spanned by `keys` records and the index.
    pub fn footprint(&self, keys: u64) -> u64 {
        self.metadata_lines * LINE_SIZE + keys * self.lines_per_record * LINE_SIZE
    }
}

/// Insert `op_count` keys, then query, update and delete each of them in a
/// seeded random order. Every request is dependent: one client thread.
pub fn gen_kv(spec: &WorkloadSpec) -> Result<RequestTrace, WorkloadError> {
    if spec.op_count == 0 {
        return Err(WorkloadError::ZeroOps);
    }
    let layout = KvLayout::new(spec)?;
    let mut rng = spec.rng();
    let mut trace = RequestTrace::default();
    let keys = spec.op_count;
    let word = |key: u64, line: u64, phase: u64| mix64(spec.seed ^ mix64(key << 8 | phase) ^ line);

    for key in 0..keys {
        trace.push(layout.metadata_line(key), RequestKind::Write, true, word(key, 0, 0));
        for line in layout.record_lines(key) {
            trace.push(line, RequestKind::Write, true, word(key, line, 0));
        }
    }

    let mut order: Vec<u64> = (0..keys).collect();
    order.shuffle(&mut rng);
    for &key in &order {
        trace.push(layout.metadata_line(key), RequestKind::Read, true, 0);
        for line in layout.record_lines(key) {
            trace.push(line, RequestKind::Read, true, 0);
        }
    }

    order.shuffle(&mut rng);
    for &key in &order {
        trace.push(layout.metadata_line(key), RequestKind::Read, true, 0);
        for line in layout.record_lines(key) {
            trace.push(line, RequestKind::Read, true, 0);
        }
        for line in layout.record_lines(key) {
            trace.push(line, RequestKind::Write, true, word(key, line, 2));
        }
    }

    order.shuffle(&mut rng);
    for &key in &order {
        trace.push(layout.metadata_line(key), RequestKind::Write, true, word(key, 0, 3));
    }

    trace.app_ops = Some(keys * KV_PHASES.len() as u64);
    Ok(trace)
}
