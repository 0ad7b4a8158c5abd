//! Run configuration: a flat JSON document whose omitted keys take the
//! default experimental parameters.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::cache::{
    CacheGeometry, PolicyKind, PolicyParams, DEFAULT_CACHE_CAPACITY, DEFAULT_MSHR_ENTRIES, DEFAULT_WAYS,
};
use crate::devices::{self, DeviceKind, DeviceTiming, SsdConfig, Timings};
use crate::engine::DEFAULT_EVENT_BUDGET;
use crate::protocol::EXPANDER_BASE;
use crate::report::ReportFormat;
use crate::system::{SystemConfig, DEFAULT_MAX_OUTSTANDING};
use crate::workloads::{self, KvLayout, StreamKernel, WorkloadKind, WorkloadSpec};
use crate::{LINE_SIZE, PAGE_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key:?}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("{key:?} out of range: {reason}")]
    OutOfRange { key: String, reason: String },
}

impl ConfigError {
    /// The offending key, when the error concerns one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::InvalidValue { key, .. } | ConfigError::OutOfRange { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), reason: reason.into() }
}

fn out_of_range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange { key: key.to_string(), reason: reason.into() }
}

/// Everything needed to reproduce one run. Serializes to the same flat
/// document `parse_config` reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyKind>,
    pub workload: WorkloadKind,
    pub footprint: u64,
    pub op_count: u64,
    pub value_size: u64,
    pub seed: u64,
    pub warmup: bool,
    pub stream_kernel: StreamKernel,
    pub kv_metadata_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
    pub dram_latency_ns: u64,
    pub pmem_read_ns: u64,
    pub pmem_write_ns: u64,
    pub cxl_latency_ns: u64,
    pub cache_access_ns: u64,
    pub cache_capacity: u64,
    pub cache_ways: u64,
    pub mshr_entries: u64,
    pub twoq_a1in_percent: u64,
    pub lfru_aging_interval: u64,
    pub ssd_capacity: u64,
    pub ssd_page_read_ns: u64,
    pub ssd_page_program_ns: u64,
    pub ssd_queue_width: u64,
    pub max_outstanding: u64,
    pub event_budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub format: ReportFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = PolicyParams::default();
        let ssd = SsdConfig::default();
        let w = WorkloadSpec::default();
        RunConfig {
            device: DeviceKind::CxlSsdCached,
            policy: None,
            workload: w.kind,
            footprint: w.footprint,
            op_count: w.op_count,
            value_size: w.value_size,
            seed: w.seed,
            warmup: w.warmup,
            stream_kernel: w.stream_kernel,
            kv_metadata_bytes: w.kv_metadata_bytes,
            trace_path: None,
            dram_latency_ns: devices::DEFAULT_DRAM_NS,
            pmem_read_ns: devices::DEFAULT_PMEM_READ_NS,
            pmem_write_ns: devices::DEFAULT_PMEM_WRITE_NS,
            cxl_latency_ns: devices::DEFAULT_CXL_STAGE_NS,
            cache_access_ns: devices::DEFAULT_CACHE_ACCESS_NS,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            cache_ways: DEFAULT_WAYS as u64,
            mshr_entries: DEFAULT_MSHR_ENTRIES as u64,
            twoq_a1in_percent: params.twoq_a1in_percent as u64,
            lfru_aging_interval: params.lfru_aging_interval,
            ssd_capacity: ssd.capacity,
            ssd_page_read_ns: ssd.page_read_ns,
            ssd_page_program_ns: ssd.page_program_ns,
            ssd_queue_width: ssd.queue_width as u64,
            max_outstanding: DEFAULT_MAX_OUTSTANDING as u64,
            event_budget: DEFAULT_EVENT_BUDGET,
            output: None,
            format: ReportFormat::Json,
        }
    }
}

/// Parse and validate a configuration document. An empty document yields
/// the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_partial(text)?.finalize()
}

/// Parse without cross-field validation, so command-line overrides can be
/// applied before [`RunConfig::finalize`].
pub fn parse_config_partial(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?
    };
    let Value::Object(map) = value else {
        return Err(ConfigError::NotAnObject);
    };
    let mut cfg = RunConfig::default();
    for (key, value) in &map {
        cfg.set(key, value)?;
    }
    Ok(cfg)
}

fn as_text<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| invalid(key, format!("expected a string, got {v}")))
}

fn as_int(key: &str, v: &Value) -> Result<i128, ConfigError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(i128::from)
            .or_else(|| n.as_u64().map(i128::from))
            .ok_or_else(|| invalid(key, format!("expected an integer, got {n}"))),
        // numeric strings are accepted so quoted values get a range check
        Value::String(s) => {
            s.trim().parse::<i128>().map_err(|_| invalid(key, format!("expected an integer, got {s:?}")))
        }
        other => Err(invalid(key, format!("expected an integer, got {other}"))),
    }
}

fn positive(key: &str, v: &Value) -> Result<u64, ConfigError> {
    let n = as_int(key, v)?;
    if n < 1 || n > u64::MAX as i128 {
        return Err(out_of_range(key, format!("{n} must be a positive integer")));
    }
    Ok(n as u64)
}

fn non_negative(key: &str, v: &Value) -> Result<u64, ConfigError> {
    let n = as_int(key, v)?;
    if n < 0 || n > u64::MAX as i128 {
        return Err(out_of_range(key, format!("{n} must be a non-negative integer")));
    }
    Ok(n as u64)
}

impl RunConfig {
    /// Set one key from a JSON value.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<(), ConfigError> {
        match key {
            "device" => self.device = as_text(key, v)?.parse().map_err(|e| invalid(key, format!("{e}")))?,
            "policy" => {
                self.policy = match v {
                    Value::Null => None,
                    _ => Some(as_text(key, v)?.parse().map_err(|e| invalid(key, format!("{e}")))?),
                }
            }
            "workload" => self.workload = as_text(key, v)?.parse().map_err(|e| invalid(key, format!("{e}")))?,
            "stream_kernel" => self.stream_kernel = as_text(key, v)?.parse().map_err(|e: String| invalid(key, e))?,
            "trace_path" => self.trace_path = Some(as_text(key, v)?.to_string()),
            "output" => self.output = Some(as_text(key, v)?.to_string()),
            "format" => self.format = as_text(key, v)?.parse().map_err(|e: String| invalid(key, e))?,
            "warmup" => {
                self.warmup = v.as_bool().ok_or_else(|| invalid(key, format!("expected true or false, got {v}")))?
            }
            "seed" => self.seed = non_negative(key, v)?,
            "footprint" => self.footprint = positive(key, v)?,
            "op_count" => self.op_count = positive(key, v)?,
            "value_size" => self.value_size = positive(key, v)?,
            "kv_metadata_bytes" => self.kv_metadata_bytes = positive(key, v)?,
            "dram_latency_ns" => self.dram_latency_ns = positive(key, v)?,
            "pmem_read_ns" => self.pmem_read_ns = positive(key, v)?,
            "pmem_write_ns" => self.pmem_write_ns = positive(key, v)?,
            "cxl_latency_ns" => self.cxl_latency_ns = positive(key, v)?,
            "cache_access_ns" => self.cache_access_ns = positive(key, v)?,
            "cache_capacity" => self.cache_capacity = positive(key, v)?,
            "cache_ways" => self.cache_ways = positive(key, v)?,
            "mshr_entries" => self.mshr_entries = positive(key, v)?,
            "twoq_a1in_percent" => self.twoq_a1in_percent = positive(key, v)?,
            "lfru_aging_interval" => self.lfru_aging_interval = positive(key, v)?,
            "ssd_capacity" => self.ssd_capacity = positive(key, v)?,
            "ssd_page_read_ns" => self.ssd_page_read_ns = positive(key, v)?,
            "ssd_page_program_ns" => self.ssd_page_program_ns = positive(key, v)?,
            "ssd_queue_width" => self.ssd_queue_width = positive(key, v)?,
            "max_outstanding" => self.max_outstanding = positive(key, v)?,
            "event_budget" => self.event_budget = positive(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Apply cross-field rules and defaults that depend on other keys.
    pub fn finalize(mut self) -> Result<RunConfig, ConfigError> {
        if self.device.has_cache() {
            self.policy.get_or_insert(PolicyKind::Lru);
        } else if let Some(p) = self.policy {
            return Err(invalid(
                "policy",
                format!("policy {p} only applies to device cxl-ssd-cached, not {}", self.device),
            ));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.device.has_cache() != self.policy.is_some() {
            return Err(invalid("policy", "a policy is required for cxl-ssd-cached and rejected otherwise"));
        }
        if !self.ssd_capacity.is_multiple_of(PAGE_SIZE) {
            return Err(out_of_range(
                "ssd_capacity",
                format!("{} is not a multiple of {PAGE_SIZE}", self.ssd_capacity),
            ));
        }
        if self.twoq_a1in_percent > 100 {
            return Err(out_of_range("twoq_a1in_percent", format!("{} exceeds 100", self.twoq_a1in_percent)));
        }
        if let Some(policy) = self.policy {
            CacheGeometry::for_policy(self.cache_capacity, self.cache_ways as usize, policy)
                .map_err(|e| out_of_range("cache_capacity", e.to_string()))?;
        }
        let line_multiple = |key: &str, v: u64| {
            if !v.is_multiple_of(LINE_SIZE) {
                Err(out_of_range(key, format!("{v} is not a multiple of {LINE_SIZE}")))
            } else {
                Ok(())
            }
        };
        let window = self.ssd_capacity;
        match self.workload {
            WorkloadKind::Stream => {
                line_multiple("footprint", self.footprint)?;
                if self.footprint.saturating_mul(3) > window {
                    return Err(out_of_range("footprint", "three stream arrays exceed the device capacity"));
                }
            }
            WorkloadKind::RandLat => {
                line_multiple("footprint", self.footprint)?;
                if self.footprint > window {
                    return Err(out_of_range("footprint", "region exceeds the device capacity"));
                }
            }
            WorkloadKind::KeyValue => {
                line_multiple("kv_metadata_bytes", self.kv_metadata_bytes)?;
                let layout = KvLayout::new(&self.workload_spec()).map_err(|e| invalid("value_size", e.to_string()))?;
                if layout.footprint(self.op_count) > window {
                    return Err(out_of_range("op_count", "key-value records exceed the device capacity"));
                }
            }
            WorkloadKind::TraceFile => {
                if self.trace_path.is_none() {
                    return Err(invalid("trace_path", "required for the trace workload"));
                }
            }
        }
        Ok(())
    }

    pub fn workload_spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            kind: self.workload,
            footprint: self.footprint,
            op_count: self.op_count,
            value_size: self.value_size,
            seed: self.seed,
            target_device_base: EXPANDER_BASE,
            warmup: self.warmup,
            stream_kernel: self.stream_kernel,
            kv_metadata_bytes: self.kv_metadata_bytes,
            trace_path: self.trace_path.as_ref().map(PathBuf::from),
        }
    }

    pub fn system_config(&self) -> SystemConfig {
        SystemConfig {
            device: self.device,
            policy: self.policy.unwrap_or(PolicyKind::Lru),
            policy_params: PolicyParams {
                twoq_a1in_percent: self.twoq_a1in_percent as u32,
                lfru_aging_interval: self.lfru_aging_interval,
            },
            cache_capacity: self.cache_capacity,
            cache_ways: self.cache_ways as usize,
            mshr_entries: self.mshr_entries as usize,
            timings: Timings {
                dram: DeviceTiming { read_ns: self.dram_latency_ns, write_ns: self.dram_latency_ns },
                pmem: DeviceTiming { read_ns: self.pmem_read_ns, write_ns: self.pmem_write_ns },
                cxl_stage_ns: self.cxl_latency_ns,
                cache_access_ns: self.cache_access_ns,
            },
            ssd: SsdConfig {
                capacity: self.ssd_capacity,
                page_read_ns: self.ssd_page_read_ns,
                page_program_ns: self.ssd_page_program_ns,
                queue_width: self.ssd_queue_width as usize,
            },
            max_outstanding: self.max_outstanding as usize,
            event_budget: self.event_budget,
            record_completions: false,
        }
    }

    /// The configuration as a flat JSON document.
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn generate_trace(&self) -> Result<workloads::RequestTrace, workloads::WorkloadError> {
        workloads::generate(&self.workload_spec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_table_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, parse_config("{}").unwrap());
        assert_eq!(c.cache_capacity, 16 << 20);
        assert_eq!(c.ssd_capacity, 16 << 30);
        assert_eq!(c.cxl_latency_ns, 25);
        assert_eq!((c.pmem_read_ns, c.pmem_write_ns), (150, 500));
        assert_eq!(c.device, DeviceKind::CxlSsdCached);
        assert_eq!(c.policy, Some(PolicyKind::Lru));
        assert_eq!(c.system_config().timings.cxl_round_trip_ns(), 50);
        assert_eq!(c.cache_access_ns, 50);
    }

    #[test]
    fn policy_with_uncached_device_rejected() {
        let err = parse_config(r#"{"device":"dram","policy":"lru"}"#).unwrap_err();
        assert_eq!(err.key(), Some("policy"));
        assert!(parse_config(r#"{"device":"dram"}"#).unwrap().policy.is_none());
    }

    #[test]
    fn negative_capacity_is_range_error() {
        let err = parse_config(r#"{"cache_capacity": "-1"}"#).unwrap_err();
        assert!(matches!(&err, ConfigError::OutOfRange { key, .. } if key == "cache_capacity"), "{err}");
        let err = parse_config(r#"{"cache_capacity": -1}"#).unwrap_err();
        assert!(matches!(err, ConfigError::OutOfRange { .. }));
    }

    #[test]
    fn unknown_and_mistyped_keys_named() {
        assert_eq!(parse_config(r#"{"cache_capacty": 1}"#), Err(ConfigError::UnknownKey("cache_capacty".into())));
        let err = parse_config(r#"{"warmup": 3}"#).unwrap_err();
        assert_eq!(err.key(), Some("warmup"));
        let err = parse_config(r#"{"device": "hbm"}"#).unwrap_err();
        assert_eq!(err.key(), Some("device"));
        assert_eq!(parse_config("[1]"), Err(ConfigError::NotAnObject));
        assert!(matches!(parse_config("{"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn geometry_checked_for_cached_device() {
        let err = parse_config(r#"{"cache_capacity": 12288}"#).unwrap_err();
        assert_eq!(err.key(), Some("cache_capacity"));
    }

    #[test]
    fn workload_must_fit_device() {
        let err = parse_config(r#"{"workload":"stream","footprint": 8589934592}"#).unwrap_err();
        assert_eq!(err.key(), Some("footprint"));
        let err = parse_config(r#"{"workload":"trace"}"#).unwrap_err();
        assert_eq!(err.key(), Some("trace_path"));
    }

    #[test]
    fn numeric_strings_accepted() {
        assert_eq!(parse_config(r#"{"seed": "7"}"#).unwrap().seed, 7);
    }

    proptest! {
        #[test]
        fn document_round_trip(
            device in 0usize..5,
            policy in 0usize..5,
            seed in any::<u64>(),
            ops in 1u64..1_000_000,
            ways in prop::sample::select(vec![1u64, 2, 4, 8, 16]),
        ) {
            let device = DeviceKind::ALL[device];
            let cfg = RunConfig {
                device,
                policy: device.has_cache().then_some(PolicyKind::ALL[policy]),
                seed,
                op_count: ops,
                cache_ways: ways,
                ..RunConfig::default()
            };
            let cfg = cfg.finalize().unwrap();
            prop_assert_eq!(parse_config(&cfg.to_document()).unwrap(), cfg);
        }
    }
}
