use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{mix64, RequestTrace, WorkloadError, WorkloadSpec};
use crate::protocol::RequestKind;
use crate::LINE_SIZE;

/// STREAM kernels over arrays `a`, `b`, `c`, one 64 B line per element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKernel {
    /// copy, scale, add and triad in sequence
    All,
    /// c = a
    Copy,
    /// b = s * c
    Scale,
    /// c = a + b
    Add,
    /// a = b + s * c
    Triad,
}

impl StreamKernel {
    pub const KERNELS: [StreamKernel; 4] =
        [StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad];

    pub fn as_str(self) -> &'static str {
        match self {
            StreamKernel::All => "all",
            StreamKernel::Copy => "copy",
            StreamKernel::Scale => "scale",
            StreamKernel::Add => "add",
            StreamKernel::Triad => "triad",
        }
    }

    /// (arrays read, array written), as indices into [a, b, c].
    fn operands(self) -> (&'static [usize], usize) {
        match self {
            StreamKernel::Copy => (&[0], 2),
            StreamKernel::Scale => (&[2], 1),
            StreamKernel::Add => (&[0, 1], 2),
            StreamKernel::Triad => (&[1, 2], 0),
            StreamKernel::All => unreachable!("composite kernel"),
        }
    }
}

impl fmt::Display for StreamKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StreamKernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [StreamKernel::All, StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad]
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown stream kernel {s:?} (expected all, copy, scale, add or triad)"))
    }
}

fn append_kernel(trace: &mut RequestTrace, spec: &WorkloadSpec, kernel: StreamKernel) {
    let elements = spec.footprint / LINE_SIZE;
    let array_base = |i: usize| spec.target_device_base + i as u64 * spec.footprint;
    let (reads, write) = kernel.operands();
    for e in 0..elements {
        let offset = e * LINE_SIZE;
        for &src in reads {
            trace.push(array_base(src) + offset, RequestKind::Read, false, 0);
        }
        let word = mix64(spec.seed ^ (trace.requests.len() as u64));
        trace.push(array_base(write) + offset, RequestKind::Write, false, word);
    }
}

/// The kernel(s) selected by `spec.stream_kernel`. Requests are independent,
/// so the run is bandwidth-bound.
pub fn gen_stream(spec: &WorkloadSpec) -> Result<RequestTrace, WorkloadError> {
    gen_stream_kernel(spec, spec.stream_kernel)
}

pub fn gen_stream_kernel(spec: &WorkloadSpec, kernel: StreamKernel) -> Result<RequestTrace, WorkloadError> {
    if spec.footprint < LINE_SIZE || !spec.footprint.is_multiple_of(LINE_SIZE) {
        return Err(WorkloadError::BadFootprint(spec.footprint));
    }
    let mut trace = RequestTrace::default();
    match kernel {
        StreamKernel::All => {
            for k in StreamKernel::KERNELS {
                append_kernel(&mut trace, spec, k);
            }
        }
        k => append_kernel(&mut trace, spec, k),
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::WorkloadKind;

    fn spec(footprint: u64) -> WorkloadSpec {
        WorkloadSpec { kind: WorkloadKind::Stream, footprint, ..Default::default() }
    }

    #[test]
    fn copy_over_8mb() {
        let t = gen_stream_kernel(&spec(8 << 20), StreamKernel::Copy).unwrap();
        assert_eq!((t.reads(), t.writes()), (131_072, 131_072));
        assert!(t.dependent.iter().all(|d| !d));
    }

    #[test]
    fn add_reads_two_writes_one() {
        let t = gen_stream_kernel(&spec(64 * 10), StreamKernel::Add).unwrap();
        assert_eq!((t.reads(), t.writes()), (20, 10));
        let kinds: Vec<_> = t.requests[..3].iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![RequestKind::Read, RequestKind::Read, RequestKind::Write]);
    }

    #[test]
    fn minimal_copy() {
        let t = gen_stream_kernel(&spec(128), StreamKernel::Copy).unwrap();
        assert_eq!((t.reads(), t.writes()), (2, 2));
        // c sits two arrays above a
        assert_eq!(t.requests[1].addr - t.requests[0].addr, 256);
    }

    #[test]
    fn all_kernels_in_sequence() {
        let t = gen_stream(&spec(64 * 4)).unwrap();
        assert_eq!(t.len(), 4 * (2 + 2 + 3 + 3));
    }

    #[test]
    fn tiny_footprint_rejected() {
        assert!(matches!(gen_stream(&spec(32)), Err(WorkloadError::BadFootprint(32))));
        assert!(matches!(gen_stream(&spec(100)), Err(WorkloadError::BadFootprint(100))));
    }
}
