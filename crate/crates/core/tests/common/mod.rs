#![allow(dead_code)]

pub mod reference_policy;

use cxl_ssd_sim::protocol::MemRequest;
use cxl_ssd_sim::workloads::RequestTrace;

pub fn trace(requests: Vec<MemRequest>, dependent: bool) -> RequestTrace {
    let n = requests.len();
    RequestTrace { requests, dependent: vec![dependent; n], warmup: 0, app_ops: None }
}
