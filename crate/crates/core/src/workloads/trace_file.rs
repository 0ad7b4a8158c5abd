//! Text traces: `<issue_ns> <R|W> <0x-addr> <size>` per line, `#` comments.

use std::path::Path;

use thiserror::Error;

use super::{mix64, RequestTrace};
use crate::engine::SimTime;
use crate::protocol::{MemRequest, Payload};
use crate::LINE_SIZE;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: address {addr:#x} is not 64-byte aligned")]
    Unaligned { line: usize, addr: u64 },
    #[error("reading trace {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub fn read_trace(path: &Path) -> Result<RequestTrace, TraceError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    parse_trace(&text)
}

/// Requests larger than 64 B split into consecutive lines. Trace requests are
/// independent and issue no earlier than their timestamp.
pub fn parse_trace(text: &str) -> Result<RequestTrace, TraceError> {
    let mut trace = RequestTrace::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |reason: String| TraceError::Parse { line, reason };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [issue, op, addr, size] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let issue_ns: u64 = issue.parse().map_err(|_| err(format!("bad issue time {issue:?}")))?;
        let write = match op {
            "R" => false,
            "W" => true,
            other => return Err(err(format!("unknown op {other:?}"))),
        };
        let hex = addr
            .strip_prefix("0x")
            .or_else(|| addr.strip_prefix("0X"))
            .ok_or_else(|| err(format!("address {addr:?} must be 0x-prefixed hex")))?;
        let addr = u64::from_str_radix(hex, 16).map_err(|_| err(format!("bad address {addr:?}")))?;
        let size: u64 = size.parse().map_err(|_| err(format!("bad size {size:?}")))?;
        if size == 0 {
            return Err(err("size must be positive".into()));
        }
        if addr % LINE_SIZE != 0 {
            return Err(TraceError::Unaligned { line, addr });
        }
        for l in 0..size.div_ceil(LINE_SIZE) {
            let a = addr
                .checked_add(l * LINE_SIZE)
                .ok_or_else(|| err("request runs past the end of the address space".into()))?;
            let id = u32::try_from(trace.requests.len()).map_err(|_| err("too many requests".into()))?;
            let t = SimTime::from_ns(issue_ns);
            let req = if write {
                MemRequest::write(id, a, t, Payload::from_word(mix64(a ^ id as u64)))
            } else {
                MemRequest::read(id, a, t)
            };
            trace.requests.push(req);
            trace.dependent.push(false);
        }
    }
    Ok(trace)
}
