//! Home Agent side of the CXL.mem path: request types, address routing,
//! flit conversion and the flit to SSD request translation.

mod address_map;
pub mod codec;

pub use address_map::{AddressMap, AddressRange, Target, EXPANDER_BASE, MAIN_MEMORY_BYTES};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::stats::AccessKind;
use crate::{LINE_SIZE, PAGE_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("address {addr:#x} is not mapped to any memory range")]
    AddressFault { addr: u64 },
    #[error("address {addr:#x} is not {LINE_SIZE}-byte aligned")]
    Unaligned { addr: u64 },
    #[error("unsupported command {0:?}")]
    UnsupportedCommand(RequestKind),
    #[error("payload must be present exactly for write requests (request {id})")]
    PayloadMismatch { id: u32 },
    #[error("read response for request {req_id} is missing data")]
    MissingData { req_id: u32 },
    #[error("{0:?} is a device-to-host transaction and cannot be answered or forwarded")]
    NotHostToDevice(CxlTransactionType),
    #[error("address ranges [{a_base:#x}, +{a_size:#x}) and [{b_base:#x}, +{b_size:#x}) overlap")]
    OverlappingRanges { a_base: u64, a_size: u64, b_base: u64, b_size: u64 },
    #[error("address range at {base:#x} is empty")]
    EmptyRange { base: u64 },
}

/// One cache line of write data.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Payload(pub [u8; LINE_SIZE as usize]);

impl Payload {
    pub const ZERO: Payload = Payload([0; LINE_SIZE as usize]);

    /// Deterministic filler derived from a 64-bit word.
    pub fn from_word(word: u64) -> Self {
        let mut bytes = [0u8; LINE_SIZE as usize];
        for (i, chunk) in bytes.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&word.rotate_left(i as u32 * 8).to_le_bytes());
        }
        Payload(bytes)
    }
}

impl Default for Payload {
    fn default() -> Self {
        Payload::ZERO
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestKind {
    Read,
    Write,
    InvalidateLine,
    FlushLine,
    FlushInvalidateLine,
}

impl RequestKind {
    pub const ALL: [RequestKind; 5] = [
        RequestKind::Read,
        RequestKind::Write,
        RequestKind::InvalidateLine,
        RequestKind::FlushLine,
        RequestKind::FlushInvalidateLine,
    ];

    pub fn access_kind(self) -> Option<AccessKind> {
        match self {
            RequestKind::Read => Some(AccessKind::Read),
            RequestKind::Write => Some(AccessKind::Write),
            _ => None,
        }
    }
}

/// A 64 B CPU-side memory request as it leaves the last-level CPU cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRequest {
    pub id: u32,
    pub addr: u64,
    pub kind: RequestKind,
    pub issue_time: SimTime,
    pub payload: Option<Payload>,
}

impl MemRequest {
    pub fn new(
        id: u32,
        addr: u64,
        kind: RequestKind,
        issue_time: SimTime,
        payload: Option<Payload>,
    ) -> Result<Self, ProtocolError> {
        if !addr.is_multiple_of(LINE_SIZE) {
            return Err(ProtocolError::Unaligned { addr });
        }
        if payload.is_some() != (kind == RequestKind::Write) {
            return Err(ProtocolError::PayloadMismatch { id });
        }
        Ok(MemRequest { id, addr, kind, issue_time, payload })
    }

    /// Panics on an unaligned address.
    pub fn read(id: u32, addr: u64, issue_time: SimTime) -> Self {
        Self::new(id, addr, RequestKind::Read, issue_time, None).expect("aligned read")
    }

    /// Panics on an unaligned address.
    pub fn write(id: u32, addr: u64, issue_time: SimTime, payload: Payload) -> Self {
        Self::new(id, addr, RequestKind::Write, issue_time, Some(payload)).expect("aligned write")
    }

    pub fn size(&self) -> u64 {
        LINE_SIZE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CxlTransactionType {
    M2SReq,
    M2SRwD,
    S2MDRS,
    S2MNDR,
}

impl CxlTransactionType {
    pub const ALL: [CxlTransactionType; 4] = [
        CxlTransactionType::M2SReq,
        CxlTransactionType::M2SRwD,
        CxlTransactionType::S2MDRS,
        CxlTransactionType::S2MNDR,
    ];

    pub fn is_host_to_device(self) -> bool {
        matches!(self, CxlTransactionType::M2SReq | CxlTransactionType::M2SRwD)
    }

    pub fn carries_data(self) -> bool {
        matches!(self, CxlTransactionType::M2SRwD | CxlTransactionType::S2MDRS)
    }
}

/// Coherence hint on host-to-device messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaValue {
    /// Host holds no cacheable copy.
    Invalid,
    /// Host may hold the line in shared, exclusive or modified state.
    Any,
    /// Host keeps at least one shared copy.
    Shared,
}

impl MetaValue {
    pub const ALL: [MetaValue; 3] = [MetaValue::Invalid, MetaValue::Any, MetaValue::Shared];
}

/// A CXL.mem transaction. `meta` is required on M2S flits and optional on
/// S2M; `data` is present only on M2SRwD / S2MDRS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CxlFlit {
    pub txn: CxlTransactionType,
    pub addr: u64,
    pub meta: Option<MetaValue>,
    pub data: Option<Payload>,
    pub lba: u64,
    pub nlb: u16,
    pub req_id: u32,
}

impl CxlFlit {
    /// Host-to-device flit for a single 64 B line.
    pub fn host_to_device(
        txn: CxlTransactionType,
        addr: u64,
        meta: MetaValue,
        data: Option<Payload>,
        req_id: u32,
    ) -> Self {
        debug_assert!(txn.is_host_to_device());
        CxlFlit { txn, addr, meta: Some(meta), data, lba: addr / PAGE_SIZE, nlb: 1, req_id }
    }
}

/// Page-granular request handed to the SSD backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsdRequest {
    pub kind: AccessKind,
    pub lba: u64,
    pub nlb: u16,
}

/// Coherence hint carried for a host request kind.
pub fn meta_value_for(kind: RequestKind) -> MetaValue {
    match kind {
        RequestKind::Read | RequestKind::Write => MetaValue::Any,
        RequestKind::InvalidateLine | RequestKind::FlushInvalidateLine => MetaValue::Invalid,
        RequestKind::FlushLine => MetaValue::Shared,
    }
}

/// Convert a host request to its CXL.mem flit. Reads become M2SReq, writes
/// M2SRwD; any other command is rejected.
pub fn to_flit(req: &MemRequest) -> Result<CxlFlit, ProtocolError> {
    let meta = meta_value_for(req.kind);
    match req.kind {
        RequestKind::Read => Ok(CxlFlit::host_to_device(CxlTransactionType::M2SReq, req.addr, meta, None, req.id)),
        RequestKind::Write => {
            let data = req.payload.ok_or(ProtocolError::PayloadMismatch { id: req.id })?;
            Ok(CxlFlit::host_to_device(CxlTransactionType::M2SRwD, req.addr, meta, Some(data), req.id))
        }
        other => Err(ProtocolError::UnsupportedCommand(other)),
    }
}

/// Build the device's response to a host-to-device flit.
pub fn to_response(flit: &CxlFlit, data: Option<Payload>) -> Result<CxlFlit, ProtocolError> {
    let (txn, data) = match flit.txn {
        CxlTransactionType::M2SReq => {
            let data = data.ok_or(ProtocolError::MissingData { req_id: flit.req_id })?;
            (CxlTransactionType::S2MDRS, Some(data))
        }
        CxlTransactionType::M2SRwD => (CxlTransactionType::S2MNDR, None),
        other => return Err(ProtocolError::NotHostToDevice(other)),
    };
    Ok(CxlFlit { txn, addr: flit.addr, meta: None, data, lba: flit.lba, nlb: flit.nlb, req_id: flit.req_id })
}

/// Extract the SSD-facing block request from a host-to-device flit.
pub fn flit_to_ssd_request(flit: &CxlFlit) -> Result<SsdRequest, ProtocolError> {
    let kind = match flit.txn {
        CxlTransactionType::M2SReq => AccessKind::Read,
        CxlTransactionType::M2SRwD => AccessKind::Write,
        other => return Err(ProtocolError::NotHostToDevice(other)),
    };
    Ok(SsdRequest { kind, lba: flit.lba, nlb: flit.nlb })
}
