//! Python bindings. Configurations and reports cross the boundary as plain
//! dicts with the same keys as the JSON documents the CLI reads and writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyString};

use cxl_ssd_sim::cache::{AccessOutcome, CacheGeometry, PageCache as CorePageCache, PolicyKind, PolicyParams};
use cxl_ssd_sim::experiment::{self, SweepAxis};
use cxl_ssd_sim::protocol::codec;
use cxl_ssd_sim::protocol::{CxlFlit, CxlTransactionType, MetaValue, Payload};
use cxl_ssd_sim::report;
use cxl_ssd_sim::stats::AccessKind;
use cxl_ssd_sim::{parse_config, RunConfig, StatsReport, PAGE_SIZE};

fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

/// Accept a dict, a JSON string or None (defaults).
fn config_from(py: Python<'_>, config: Option<&Bound<'_, PyAny>>) -> PyResult<RunConfig> {
    let text = match config {
        None => String::new(),
        Some(c) if c.is_none() => String::new(),
        Some(c) => match c.cast::<PyString>() {
            Ok(s) => s.to_str()?.to_string(),
            Err(_) => py.import("json")?.call_method1("dumps", (c,))?.extract()?,
        },
    };
    parse_config(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn reports_from(py: Python<'_>, reports: &Bound<'_, PyAny>) -> PyResult<Vec<StatsReport>> {
    let text: String = py.import("json")?.call_method1("dumps", (reports,))?.extract()?;
    serde_json::from_str::<Vec<StatsReport>>(&text)
        .or_else(|_| serde_json::from_str::<StatsReport>(&text).map(|r| vec![r]))
        .map_err(|e| PyValueError::new_err(format!("not a report or list of reports: {e}")))
}

/// The default configuration as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    let cfg = parse_config("").expect("defaults are valid");
    to_py(py, &cfg.to_document())
}

/// Validate a configuration and return it with every default filled in.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn normalize_config<'py>(py: Python<'py>, config: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(py, config)?;
    to_py(py, &cfg.to_document())
}

/// Run one simulation and return its report.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn run<'py>(py: Python<'py>, config: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(py, config)?;
    let report = py.detach(|| experiment::run(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &report.to_json())
}

/// Run once per value of `axis` ("device" or "policy") over a shared trace.
#[pyfunction]
#[pyo3(signature = (config, axis, values=None))]
fn sweep<'py>(
    py: Python<'py>,
    config: Option<&Bound<'py, PyAny>>,
    axis: &str,
    values: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(py, config)?;
    let axis: SweepAxis = axis.parse().map_err(PyValueError::new_err)?;
    let values = values.unwrap_or_else(|| axis.all_values());
    let reports =
        py.detach(|| experiment::sweep(&cfg, axis, &values)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &serde_json::to_string(&reports).expect("reports serialize"))
}

/// Render reports (a dict or a list of dicts) as CSV.
#[pyfunction]
fn to_csv(py: Python<'_>, reports: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(report::to_csv(&reports_from(py, reports)?))
}

/// Side-by-side text table for a list of reports.
#[pyfunction]
fn comparison_table(py: Python<'_>, reports: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(report::comparison_table(&reports_from(py, reports)?))
}

/// The request trace a configuration generates, in the text trace format.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn generate_trace<'py>(py: Python<'py>, config: Option<&Bound<'py, PyAny>>) -> PyResult<String> {
    let cfg = config_from(py, config)?;
    let trace = cfg.generate_trace().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(trace.to_text())
}

fn txn_from(name: &str) -> PyResult<CxlTransactionType> {
    CxlTransactionType::ALL
        .into_iter()
        .find(|t| format!("{t:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| PyValueError::new_err(format!("unknown transaction type {name:?}")))
}

fn meta_from(name: &str) -> PyResult<MetaValue> {
    MetaValue::ALL
        .into_iter()
        .find(|m| format!("{m:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| PyValueError::new_err(format!("unknown MetaValue {name:?}")))
}

/// Serialize a single-line flit to its 64 or 128 byte wire image.
#[pyfunction]
#[pyo3(signature = (txn, addr, meta=None, req_id=0, data=None))]
fn encode_flit<'py>(
    py: Python<'py>,
    txn: &str,
    addr: u64,
    meta: Option<&str>,
    req_id: u32,
    data: Option<Vec<u8>>,
) -> PyResult<Bound<'py, PyBytes>> {
    let txn = txn_from(txn)?;
    let meta = meta.map(meta_from).transpose()?;
    if txn.is_host_to_device() && meta.is_none() {
        return Err(PyValueError::new_err("host-to-device flits need a MetaValue"));
    }
    let data = match (txn.carries_data(), data) {
        (true, Some(d)) => {
            let line: [u8; 64] = d.try_into().map_err(|_| PyValueError::new_err("data must be exactly 64 bytes"))?;
            Some(Payload(line))
        }
        (true, None) => Some(Payload::ZERO),
        (false, Some(_)) => return Err(PyValueError::new_err(format!("{txn:?} carries no data"))),
        (false, None) => None,
    };
    let flit = CxlFlit { txn, addr, meta, data, lba: addr / PAGE_SIZE, nlb: 1, req_id };
    Ok(PyBytes::new(py, &codec::encode(&flit)))
}

/// Parse a wire image back into a dict.
#[pyfunction]
fn decode_flit<'py>(py: Python<'py>, image: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let flit = codec::decode(image).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let doc = serde_json::json!({
        "txn": format!("{:?}", flit.txn),
        "addr": flit.addr,
        "meta": flit.meta.map(|m| format!("{m:?}")),
        "lba": flit.lba,
        "nlb": flit.nlb,
        "req_id": flit.req_id,
        "data": null,
    });
    let out = to_py(py, &doc.to_string())?;
    if let Some(d) = flit.data {
        out.set_item("data", PyBytes::new(py, &d.0))?;
    }
    Ok(out)
}

/// Functional set-associative page cache (no timing).
#[pyclass(name = "PageCache")]
struct PyPageCache {
    inner: CorePageCache,
}

#[pymethods]
impl PyPageCache {
    #[new]
    #[pyo3(signature = (capacity=16 << 20, ways=8, policy="lru"))]
    fn new(capacity: u64, ways: usize, policy: &str) -> PyResult<Self> {
        let policy: PolicyKind = policy.parse().map_err(|e| PyValueError::new_err(format!("{e}")))?;
        let geometry =
            CacheGeometry::for_policy(capacity, ways, policy).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyPageCache { inner: CorePageCache::new(geometry, policy, PolicyParams::default()) })
    }

    /// Access the page holding `addr`; returns True on a hit.
    #[pyo3(signature = (addr, write=false))]
    fn access(&mut self, addr: u64, write: bool) -> PyResult<bool> {
        let kind = if write { AccessKind::Write } else { AccessKind::Read };
        let outcome = self.inner.access_now(addr, kind).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(matches!(outcome, AccessOutcome::Hit))
    }

    #[getter]
    fn policy(&self) -> String {
        self.inner.policy().to_string()
    }

    #[getter]
    fn num_sets(&self) -> usize {
        self.inner.geometry().num_sets()
    }

    fn resident_pages(&self) -> usize {
        self.inner.resident_pages()
    }

    fn dirty_pages(&self) -> usize {
        self.inner.dirty_pages()
    }

    /// Write back every dirty page; returns how many there were.
    fn flush(&mut self) -> usize {
        self.inner.flush_all().len()
    }
}

#[pymodule]
pub fn cxl_ssd_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(comparison_table, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(encode_flit, m)?)?;
    m.add_function(wrap_pyfunction!(decode_flit, m)?)?;
    m.add_class::<PyPageCache>()?;
    m.add("CSV_COLUMNS", report::CSV_COLUMNS.to_vec())?;
    Ok(())
}
