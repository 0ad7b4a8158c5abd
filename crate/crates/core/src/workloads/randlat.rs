use rand::Rng;

use super::{RequestTrace, WorkloadError, WorkloadSpec};
use crate::protocol::RequestKind;
use crate::{LINE_SIZE, PAGE_SIZE};

/// Dependent pointer chase: each read targets a uniformly random line of the
/// region and issues only after the previous one returns.
pub fn gen_randlat(spec: &WorkloadSpec) -> Result<RequestTrace, WorkloadError> {
    if spec.footprint < LINE_SIZE || !spec.footprint.is_multiple_of(LINE_SIZE) {
        return Err(WorkloadError::BadFootprint(spec.footprint));
    }
    if spec.op_count == 0 {
        return Err(WorkloadError::ZeroOps);
    }
    let mut trace = RequestTrace::default();
    if spec.warmup {
        let pages = spec.footprint.div_ceil(PAGE_SIZE);
        for p in 0..pages {
            trace.push(spec.target_device_base + p * PAGE_SIZE, RequestKind::Read, true, 0);
        }
        trace.warmup = trace.len();
    }
    let lines = spec.footprint / LINE_SIZE;
    let mut rng = spec.rng();
    for _ in 0..spec.op_count {
        let line = rng.random_range(0..lines);
        trace.push(spec.target_device_base + line * LINE_SIZE, RequestKind::Read, true, 0);
    }
    Ok(trace)
}
