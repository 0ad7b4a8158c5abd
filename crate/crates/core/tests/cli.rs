use std::path::Path;
use std::process::{Command, Output};

use cxl_ssd_sim::report::CSV_COLUMNS;
use cxl_ssd_sim::{parse_config, StatsReport};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxl-ssd-sim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL_KV: &str = r#"{"workload": "kv", "op_count": 200}"#;

#[test]
fn single_run_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_KV);
    let out_path = dir.path().join("r.json");
    let out = sim(&["--config", &cfg, "--device", "pmem", "--output", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = StatsReport::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report.config.device.as_str(), "pmem");
    assert_eq!(report.config.policy, None);
    assert_eq!(report.config.op_count, 200);
    assert!(report.metrics.qps.is_some());
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"workload": "randlat", "op_count": 100, "seed": 1, "device": "dram"}"#);
    let out = sim(&["--config", &cfg, "--seed", "9", "--workload", "kv", "--format", "json"]);
    assert!(out.status.success());
    let report = StatsReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.config.seed, 9);
    assert_eq!(report.config.workload.as_str(), "kv");
}

#[test]
fn echoed_config_reparses_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_KV);
    let out = sim(&["--config", &cfg, "--policy", "2q"]);
    let report = StatsReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let echo = serde_json::to_string(&report.config).unwrap();
    assert_eq!(parse_config(&echo).unwrap(), report.config);
}

#[test]
fn policy_sweep_csv_has_header_and_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_KV);
    let out = sim(&["--config", &cfg, "--sweep", "policy", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    let policies: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(policies, ["direct", "lru", "fifo", "2q", "lfru"]);
    // comparison table goes to stderr
    assert!(String::from_utf8_lossy(&out.stderr).contains("hit_rate"));
}

#[test]
fn device_sweep_respects_value_order() {
    let out = sim(&["--workload", "randlat", "--sweep", "device", "--values", "cxl-ssd,dram", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let devices: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(devices, ["cxl-ssd", "dram"]);
}

#[test]
fn stream_csv_marks_qps_na() {
    let out = sim(&["--workload", "stream", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let qps = CSV_COLUMNS.iter().position(|c| *c == "qps").unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[qps], "na");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [r#"{"cache_capacity": "-1"}"#, r#"{"cache_capacty": 1}"#, "not json"] {
        let cfg = write_config(dir.path(), body);
        let out = sim(&["--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let out = sim(&["--device", "dram", "--policy", "lru"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("policy"));
    assert_eq!(sim(&["--sweep", "ways"]).status.code(), Some(2));
}

#[test]
fn simulation_fault_exits_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    // second read falls in the hole between main memory and the device window
    std::fs::write(&trace, "0 R 0x100000000 64\n1000 R 0x40000000 64\n").unwrap();
    let body = format!(r#"{{"workload": "trace", "trace_path": {:?}, "device": "dram"}}"#, trace.display().to_string());
    let cfg = write_config(dir.path(), &body);
    let out = sim(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0x40000000"));
    let partial = StatsReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(partial.metrics.requests, 1);
}

#[test]
fn io_errors_exit_4() {
    assert_eq!(sim(&["--config", "/nonexistent/run.json"]).status.code(), Some(4));
    let out = sim(&["--workload", "randlat", "--output", "/nonexistent/dir/r.json"]);
    assert_eq!(out.status.code(), Some(4));
    let out = sim(&["--workload", "trace"]);
    assert_eq!(out.status.code(), Some(2));
}
