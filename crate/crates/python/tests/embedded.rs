use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn check(script: &str) {
    Python::initialize();
    Python::attach(|py| {
        let module = wrap_pymodule!(cxl_ssd_sim_py::cxl_ssd_sim_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("sim", module).unwrap();
        let code = CString::new(script).unwrap();
        py.run(&code, Some(&globals), None).map_err(|e| e.display(py)).unwrap();
    });
}

#[test]
fn run_returns_report_dict() {
    check(
        r#"
r = sim.run({"device": "cxl-dram", "workload": "randlat", "op_count": 200})
assert r["metrics"]["latency_ns"]["mean"] == 95.0, r["metrics"]
assert r["config"]["device"] == "cxl-dram"
assert r["metrics"]["qps"] == "na"
"#,
    );
}

#[test]
fn bad_config_raises_value_error() {
    check(
        r#"
try:
    sim.run('{"cache_ways": 0}')
except ValueError as e:
    assert "cache_ways" in str(e)
else:
    raise AssertionError("accepted")
"#,
    );
}

#[test]
fn flit_round_trip_and_cache() {
    check(
        r#"
img = sim.encode_flit("S2MNDR", 0x2000, meta="Shared", req_id=3)
assert len(img) == 64
f = sim.decode_flit(img)
assert (f["txn"], f["meta"], f["req_id"], f["data"]) == ("S2MNDR", "Shared", 3, None)
c = sim.PageCache(capacity=8 * 4096, ways=8, policy="lru")
assert [c.access(p * 4096) for p in (1, 1, 2)] == [False, True, False]
assert c.resident_pages() == 2 and c.num_sets == 1
"#,
    );
}
