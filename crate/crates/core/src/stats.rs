//! Per-run statistics accumulation and summary.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::protocol::MetaValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// Where in the hierarchy bytes moved: `Cache` is the host-visible 64 B
/// request level, `Backend` the SSD page level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessLevel {
    Cache,
    Backend,
}

#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    latencies: Vec<u64>,
    backend_busy: u64,
    pub host_reads: u64,
    pub host_writes: u64,
    pub host_read_bytes: u64,
    pub host_write_bytes: u64,
    pub backend_read_bytes: u64,
    pub backend_write_bytes: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub ssd_page_reads: u64,
    pub ssd_page_programs: u64,
    pub dirty_evictions: u64,
    pub flush_writebacks: u64,
    pub meta_any: u64,
    pub meta_shared: u64,
    pub meta_invalid: u64,
    pub dropped_unsupported: u64,
    /// Whether the device under test has a page-granular backend.
    pub tracks_backend: bool,
    /// Whether the device under test has a page cache.
    pub tracks_cache: bool,
    window_start: SimTime,
    window_end: SimTime,
}

impl StatsAccumulator {
    pub fn new(tracks_backend: bool, tracks_cache: bool) -> Self {
        StatsAccumulator { tracks_backend, tracks_cache, ..Default::default() }
    }

    pub fn record_access(&mut self, latency: SimTime, bytes: u64, kind: AccessKind, level: AccessLevel) {
        match level {
            AccessLevel::Cache => {
                self.latencies.push(latency.ticks());
                match kind {
                    AccessKind::Read => {
                        self.host_reads += 1;
                        self.host_read_bytes += bytes;
                    }
                    AccessKind::Write => {
                        self.host_writes += 1;
                        self.host_write_bytes += bytes;
                    }
                }
            }
            AccessLevel::Backend => {
                self.backend_busy += latency.ticks();
                match kind {
                    AccessKind::Read => {
                        self.ssd_page_reads += 1;
                        self.backend_read_bytes += bytes;
                    }
                    AccessKind::Write => {
                        self.ssd_page_programs += 1;
                        self.backend_write_bytes += bytes;
                    }
                }
            }
        }
    }

    pub fn record_hit(&mut self, hit: bool) {
        if hit {
            self.cache_hits += 1;
        } else {
            self.cache_misses += 1;
        }
    }

    pub fn record_meta(&mut self, meta: MetaValue) {
        match meta {
            MetaValue::Any => self.meta_any += 1,
            MetaValue::Shared => self.meta_shared += 1,
            MetaValue::Invalid => self.meta_invalid += 1,
        }
    }

    pub fn requests(&self) -> u64 {
        self.latencies.len() as u64
    }

    pub fn latency_samples_ns(&self) -> impl Iterator<Item = f64> + '_ {
        self.latencies.iter().map(|t| SimTime(*t).as_ns())
    }

    /// Clear everything and start a new measurement window at `now`.
    pub fn reset(&mut self, now: SimTime) {
        *self = StatsAccumulator {
            tracks_backend: self.tracks_backend,
            tracks_cache: self.tracks_cache,
            window_start: now,
            window_end: now,
            ..Default::default()
        };
    }

    /// Extend the measurement window to cover `now`.
    pub fn mark_end(&mut self, now: SimTime) {
        if now > self.window_end {
            self.window_end = now;
        }
    }

    pub fn elapsed(&self) -> SimTime {
        self.window_end.saturating_sub(self.window_start)
    }

    pub fn summarize(&self) -> Metrics {
        let mut sorted = self.latencies.clone();
        sorted.sort_unstable();
        let latency = LatencyStats::from_sorted(&sorted);
        let elapsed = self.elapsed();
        let host_bytes = self.host_read_bytes + self.host_write_bytes;
        let bandwidth_mb_s = if elapsed > SimTime::ZERO && host_bytes > 0 {
            Some(host_bytes as f64 / elapsed.as_secs() / 1e6)
        } else {
            None
        };
        let accesses = self.cache_hits + self.cache_misses;
        let hit_rate = (self.tracks_cache && accesses > 0).then(|| self.cache_hits as f64 / accesses as f64);
        let ratio = |num: u64, den: u64| (self.tracks_backend && den > 0).then(|| num as f64 / den as f64);
        Metrics {
            requests: self.requests(),
            reads: self.host_reads,
            writes: self.host_writes,
            latency_ns: latency,
            bandwidth_mb_s,
            qps: None,
            hit_rate,
            cache_hits: self.cache_hits,
            cache_misses: self.cache_misses,
            ssd_page_reads: self.ssd_page_reads,
            ssd_page_programs: self.ssd_page_programs,
            dirty_evictions: self.dirty_evictions,
            flush_writebacks: self.flush_writebacks,
            host_read_bytes: self.host_read_bytes,
            host_write_bytes: self.host_write_bytes,
            backend_read_bytes: self.backend_read_bytes,
            backend_write_bytes: self.backend_write_bytes,
            read_amplification: ratio(self.backend_read_bytes, self.host_read_bytes),
            write_amplification: ratio(self.backend_write_bytes, self.host_write_bytes),
            meta_any: self.meta_any,
            meta_shared: self.meta_shared,
            meta_invalid: self.meta_invalid,
            dropped_unsupported: self.dropped_unsupported,
            simulated_ns: elapsed.as_ns(),
        }
    }
}

/// Nearest-rank percentile over an ascending slice; `None` when empty.
pub fn nearest_rank(sorted: &[u64], percentile: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    #[serde(with = "na")]
    pub min: Option<f64>,
    #[serde(with = "na")]
    pub mean: Option<f64>,
    #[serde(with = "na")]
    pub p50: Option<f64>,
    #[serde(with = "na")]
    pub p95: Option<f64>,
    #[serde(with = "na")]
    pub p99: Option<f64>,
    #[serde(with = "na")]
    pub max: Option<f64>,
}

impl LatencyStats {
    fn from_sorted(sorted: &[u64]) -> Self {
        let ns = |t: Option<u64>| t.map(|t| SimTime(t).as_ns());
        let mean = (!sorted.is_empty()).then(|| {
            let sum: u128 = sorted.iter().map(|&t| t as u128).sum();
            sum as f64 / sorted.len() as f64 / 1_000.0
        });
        LatencyStats {
            min: ns(sorted.first().copied()),
            mean,
            p50: ns(nearest_rank(sorted, 50.0)),
            p95: ns(nearest_rank(sorted, 95.0)),
            p99: ns(nearest_rank(sorted, 99.0)),
            max: ns(sorted.last().copied()),
        }
    }
}

/// Aggregate figures for one run. Optional fields serialize as `"na"` when
/// they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub requests: u64,
    pub reads: u64,
    pub writes: u64,
    pub latency_ns: LatencyStats,
    #[serde(with = "na")]
    pub bandwidth_mb_s: Option<f64>,
    #[serde(with = "na")]
    pub qps: Option<f64>,
    #[serde(with = "na")]
    pub hit_rate: Option<f64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub ssd_page_reads: u64,
    pub ssd_page_programs: u64,
    pub dirty_evictions: u64,
    pub flush_writebacks: u64,
    pub host_read_bytes: u64,
    pub host_write_bytes: u64,
    pub backend_read_bytes: u64,
    pub backend_write_bytes: u64,
    #[serde(with = "na")]
    pub read_amplification: Option<f64>,
    #[serde(with = "na")]
    pub write_amplification: Option<f64>,
    pub meta_any: u64,
    pub meta_shared: u64,
    pub meta_invalid: u64,
    pub dropped_unsupported: u64,
    pub simulated_ns: f64,
}

pub(crate) mod na {
    use serde::{Deserialize, Deserializer, Serializer};

    pub const MARKER: &str = "na";

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_str(MARKER),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Some(v)),
            Raw::Text(t) if t == MARKER => Ok(None),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"na\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_updates_counts() {
        let mut s = StatsAccumulator::new(false, false);
        s.record_access(SimTime::from_ns(100), 64, AccessKind::Read, AccessLevel::Cache);
        assert_eq!(s.requests(), 1);
        assert_eq!(s.host_read_bytes, 64);
    }

    #[test]
    fn mean_of_identical_samples() {
        let mut s = StatsAccumulator::new(false, false);
        for _ in 0..10 {
            s.record_access(SimTime::from_ns(100), 64, AccessKind::Read, AccessLevel::Cache);
        }
        assert_eq!(s.summarize().latency_ns.mean, Some(100.0));
    }

    #[test]
    fn nearest_rank_median() {
        assert_eq!(nearest_rank(&[100, 200, 300], 50.0), Some(200));
        assert_eq!(nearest_rank(&[100, 200, 300], 99.0), Some(300));
        assert_eq!(nearest_rank(&[100, 200, 300], 0.0), Some(100));
        assert_eq!(nearest_rank(&[], 50.0), None);
    }

    #[test]
    fn bandwidth_of_one_line_in_64ns() {
        let mut s = StatsAccumulator::new(false, false);
        s.record_access(SimTime::from_ns(64), 64, AccessKind::Read, AccessLevel::Cache);
        s.mark_end(SimTime::from_ns(64));
        let bw = s.summarize().bandwidth_mb_s.unwrap();
        assert!((bw - 1000.0).abs() < 1e-9, "{bw}");
    }

    #[test]
    fn empty_run_has_markers_not_nan() {
        let s = StatsAccumulator::new(true, true);
        let m = s.summarize();
        assert_eq!(m.latency_ns.mean, None);
        assert_eq!(m.bandwidth_mb_s, None);
        assert_eq!(m.hit_rate, None);
        assert_eq!(m.read_amplification, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(!json.contains("NaN") && !json.contains("null"));
        assert!(json.contains("\"mean\":\"na\""));
    }

    #[test]
    fn hit_rate_from_counts() {
        let mut s = StatsAccumulator::new(true, true);
        for i in 0..10 {
            s.record_hit(i < 8);
        }
        assert_eq!(s.summarize().hit_rate, Some(0.8));
    }

    #[test]
    fn backend_bytes_track_page_ops() {
        let mut s = StatsAccumulator::new(true, true);
        s.record_access(SimTime::from_ns(25_000), 4096, AccessKind::Read, AccessLevel::Backend);
        s.record_access(SimTime::from_ns(300_000), 4096, AccessKind::Write, AccessLevel::Backend);
        assert_eq!(s.backend_read_bytes + s.backend_write_bytes, 4096 * (s.ssd_page_reads + s.ssd_page_programs));
        assert_eq!(s.requests(), 0);
    }

    #[test]
    fn reset_keeps_device_flags() {
        let mut s = StatsAccumulator::new(true, false);
        s.record_access(SimTime::from_ns(5), 64, AccessKind::Write, AccessLevel::Cache);
        s.reset(SimTime::from_ns(10));
        assert_eq!(s.requests(), 0);
        assert!(s.tracks_backend && !s.tracks_cache);
        s.mark_end(SimTime::from_ns(30));
        assert_eq!(s.elapsed(), SimTime::from_ns(20));
    }

    #[test]
    fn metrics_json_round_trip() {
        let mut s = StatsAccumulator::new(true, true);
        s.record_access(SimTime::from_ns(120), 64, AccessKind::Read, AccessLevel::Cache);
        s.record_hit(true);
        s.mark_end(SimTime::from_ns(120));
        let m = s.summarize();
        let back: Metrics = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
