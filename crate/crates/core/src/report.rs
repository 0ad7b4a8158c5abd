//! Report rendering: JSON (full nested report), CSV (one row per run) and a
//! plain-text comparison table for sweeps.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::stats::Metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format {s:?} (expected json or csv)")),
        }
    }
}

/// One run: the configuration that produced it and what was measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub config: RunConfig,
    pub metrics: Metrics,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// CSV column order. Stable; append new columns at the end.
pub const CSV_COLUMNS: [&str; 36] = [
    "device",
    "policy",
    "workload",
    "footprint",
    "op_count",
    "value_size",
    "seed",
    "requests",
    "reads",
    "writes",
    "latency_min_ns",
    "latency_mean_ns",
    "latency_p50_ns",
    "latency_p95_ns",
    "latency_p99_ns",
    "latency_max_ns",
    "bandwidth_mb_s",
    "qps",
    "hit_rate",
    "cache_hits",
    "cache_misses",
    "ssd_page_reads",
    "ssd_page_programs",
    "dirty_evictions",
    "flush_writebacks",
    "host_read_bytes",
    "host_write_bytes",
    "backend_read_bytes",
    "backend_write_bytes",
    "read_amplification",
    "write_amplification",
    "meta_any",
    "meta_shared",
    "meta_invalid",
    "dropped_unsupported",
    "simulated_ns",
];

const NA: &str = "na";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn csv_row(r: &StatsReport) -> Vec<String> {
    let c = &r.config;
    let m = &r.metrics;
    let l = &m.latency_ns;
    vec![
        c.device.to_string(),
        c.policy.map_or_else(|| NA.to_string(), |p| p.to_string()),
        c.workload.to_string(),
        c.footprint.to_string(),
        c.op_count.to_string(),
        c.value_size.to_string(),
        c.seed.to_string(),
        m.requests.to_string(),
        m.reads.to_string(),
        m.writes.to_string(),
        opt(l.min),
        opt(l.mean),
        opt(l.p50),
        opt(l.p95),
        opt(l.p99),
        opt(l.max),
        opt(m.bandwidth_mb_s),
        opt(m.qps),
        opt(m.hit_rate),
        m.cache_hits.to_string(),
        m.cache_misses.to_string(),
        m.ssd_page_reads.to_string(),
        m.ssd_page_programs.to_string(),
        m.dirty_evictions.to_string(),
        m.flush_writebacks.to_string(),
        m.host_read_bytes.to_string(),
        m.host_write_bytes.to_string(),
        m.backend_read_bytes.to_string(),
        m.backend_write_bytes.to_string(),
        opt(m.read_amplification),
        opt(m.write_amplification),
        m.meta_any.to_string(),
        m.meta_shared.to_string(),
        m.meta_invalid.to_string(),
        m.dropped_unsupported.to_string(),
        m.simulated_ns.to_string(),
    ]
}

/// Header plus one row per report.
pub fn to_csv(reports: &[StatsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in reports {
        w.write_record(csv_row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// A single report renders as one JSON object, several as an array.
pub fn render(reports: &[StatsReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => to_csv(reports),
        ReportFormat::Json => {
            let mut s = match reports {
                [one] => one.to_json(),
                many => serde_json::to_string_pretty(many).expect("reports serialize"),
            };
            s.push('\n');
            s
        }
    }
}

/// Write `reports` to `path`, or to stdout when no path is given.
pub fn emit_report(reports: &[StatsReport], format: ReportFormat, path: Option<&Path>) -> io::Result<()> {
    let text = render(reports, format);
    match path {
        Some(p) => fs::write(p, text),
        None => {
            use io::Write;
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.digits$}"))
}

/// Side-by-side summary of a sweep.
pub fn comparison_table(reports: &[StatsReport]) -> String {
    let header = ["device", "policy", "mean_ns", "p99_ns", "MB/s", "qps", "hit_rate", "ssd_reads", "ssd_programs"];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.config.device.to_string(),
                r.config.policy.map_or_else(|| "-".to_string(), |p| p.to_string()),
                cell(m.latency_ns.mean, 1),
                cell(m.latency_ns.p99, 1),
                cell(m.bandwidth_mb_s, 1),
                cell(m.qps, 0),
                cell(m.hit_rate, 4),
                m.ssd_page_reads.to_string(),
                m.ssd_page_programs.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::StatsAccumulator;

    fn empty_report() -> StatsReport {
        StatsReport {
            config: RunConfig::default().finalize().unwrap(),
            metrics: StatsAccumulator::new(true, true).summarize(),
        }
    }

    #[test]
    fn json_round_trip() {
        let r = empty_report();
        assert_eq!(StatsReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn csv_rows_and_na_cells() {
        let reports = vec![empty_report(); 5];
        let text = to_csv(&reports);
        assert_eq!(text.lines().count(), 6);
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS);
        let qps = CSV_COLUMNS.iter().position(|c| *c == "qps").unwrap();
        for rec in rd.records() {
            let rec = rec.unwrap();
            assert_eq!(&rec[qps], "na");
            assert!(rec.iter().all(|c| !c.is_empty()));
        }
    }

    #[test]
    fn format_parses() {
        assert_eq!("CSV".parse::<ReportFormat>(), Ok(ReportFormat::Csv));
        assert!("xml".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn table_has_row_per_report() {
        let t = comparison_table(&[empty_report(), empty_report()]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("na"));
    }
}
