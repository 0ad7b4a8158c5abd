//! Bit-exact wire image of a [`CxlFlit`].
//!
//! Header slot (64 bytes, little-endian integers):
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0      | transaction type (0 M2SReq, 1 M2SRwD, 2 S2MDRS, 3 S2MNDR) |
//! | 1      | MetaValue (0 Invalid, 2 Any, 3 Shared; 0xFF = none, S2M only) |
//! | 2..10  | address                                 |
//! | 10..18 | logical block address                   |
//! | 18..20 | number of logical blocks                |
//! | 20..24 | request id                              |
//! | 24..64 | reserved, zero                          |
//!
//! M2SRwD and S2MDRS append a second 64-byte slot holding the line data.

use thiserror::Error;

use super::{CxlFlit, CxlTransactionType, MetaValue, Payload};
use crate::{LINE_SIZE, PAGE_SIZE};

pub const SLOT_BYTES: usize = 64;

const META_ABSENT: u8 = 0xFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("flit image is {0} bytes; expected 64 or 128")]
    BadLength(usize),
    #[error("unknown transaction type code {0:#04x}")]
    UnknownTransaction(u8),
    #[error("invalid MetaValue code {code:#04x} for {txn:?}")]
    BadMeta { txn: CxlTransactionType, code: u8 },
    #[error("{txn:?} image has {len} bytes; data slot presence does not match the transaction type")]
    DataSlotMismatch { txn: CxlTransactionType, len: usize },
    #[error("reserved header byte {0} is non-zero")]
    ReservedNonZero(usize),
    #[error("nlb must be at least 1")]
    ZeroBlocks,
    #[error("address {addr:#x} lies outside blocks [{lba}, +{nlb})")]
    AddressOutsideBlocks { addr: u64, lba: u64, nlb: u16 },
}

fn txn_code(txn: CxlTransactionType) -> u8 {
    match txn {
        CxlTransactionType::M2SReq => 0,
        CxlTransactionType::M2SRwD => 1,
        CxlTransactionType::S2MDRS => 2,
        CxlTransactionType::S2MNDR => 3,
    }
}

fn meta_code(meta: Option<MetaValue>) -> u8 {
    match meta {
        Some(MetaValue::Invalid) => 0b00,
        Some(MetaValue::Any) => 0b10,
        Some(MetaValue::Shared) => 0b11,
        None => META_ABSENT,
    }
}

pub fn encode_header(flit: &CxlFlit) -> [u8; SLOT_BYTES] {
    let mut h = [0u8; SLOT_BYTES];
    h[0] = txn_code(flit.txn);
    h[1] = meta_code(flit.meta);
    h[2..10].copy_from_slice(&flit.addr.to_le_bytes());
    h[10..18].copy_from_slice(&flit.lba.to_le_bytes());
    h[18..20].copy_from_slice(&flit.nlb.to_le_bytes());
    h[20..24].copy_from_slice(&flit.req_id.to_le_bytes());
    h
}

/// Header slot, followed by the data slot for payload-bearing transactions.
pub fn encode(flit: &CxlFlit) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * SLOT_BYTES);
    out.extend_from_slice(&encode_header(flit));
    if flit.txn.carries_data() {
        out.extend_from_slice(&flit.data.unwrap_or_default().0);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<CxlFlit, CodecError> {
    if bytes.len() != SLOT_BYTES && bytes.len() != 2 * SLOT_BYTES {
        return Err(CodecError::BadLength(bytes.len()));
    }
    let txn = match bytes[0] {
        0 => CxlTransactionType::M2SReq,
        1 => CxlTransactionType::M2SRwD,
        2 => CxlTransactionType::S2MDRS,
        3 => CxlTransactionType::S2MNDR,
        code => return Err(CodecError::UnknownTransaction(code)),
    };
    if txn.carries_data() != (bytes.len() == 2 * SLOT_BYTES) {
        return Err(CodecError::DataSlotMismatch { txn, len: bytes.len() });
    }
    let meta = match (txn.is_host_to_device(), bytes[1]) {
        (_, 0b00) => Some(MetaValue::Invalid),
        (_, 0b10) => Some(MetaValue::Any),
        (_, 0b11) => Some(MetaValue::Shared),
        (false, META_ABSENT) => None,
        (_, code) => return Err(CodecError::BadMeta { txn, code }),
    };
    if let Some(i) = (24..SLOT_BYTES).find(|&i| bytes[i] != 0) {
        return Err(CodecError::ReservedNonZero(i));
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let addr = u64_at(2);
    let lba = u64_at(10);
    let nlb = u16::from_le_bytes([bytes[18], bytes[19]]);
    let req_id = u32::from_le_bytes(bytes[20..24].try_into().expect("4 bytes"));
    if nlb == 0 {
        return Err(CodecError::ZeroBlocks);
    }
    let start = lba.checked_mul(PAGE_SIZE);
    let end = lba.checked_add(nlb as u64).and_then(|e| e.checked_mul(PAGE_SIZE));
    match (start, end) {
        (Some(s), Some(e)) if s <= addr && addr < e => {}
        _ => return Err(CodecError::AddressOutsideBlocks { addr, lba, nlb }),
    }
    let data = txn.carries_data().then(|| {
        let mut line = [0u8; LINE_SIZE as usize];
        line.copy_from_slice(&bytes[SLOT_BYTES..]);
        Payload(line)
    });
    Ok(CxlFlit { txn, addr, meta, data, lba, nlb, req_id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimTime;
    use crate::protocol::{to_flit, to_response, MemRequest};

    #[test]
    fn header_layout_is_fixed() {
        let flit = to_flit(&MemRequest::read(0x0102_0304, 0x1_0000_1040, SimTime::ZERO)).unwrap();
        let h = encode_header(&flit);
        assert_eq!(h.len(), 64);
        assert_eq!(h[0], 0);
        assert_eq!(h[1], 0b10);
        assert_eq!(&h[2..10], &0x1_0000_1040u64.to_le_bytes());
        assert_eq!(&h[10..18], &0x10_0001u64.to_le_bytes());
        assert_eq!(&h[18..20], &[1, 0]);
        assert_eq!(&h[20..24], &[4, 3, 2, 1]);
        assert!(h[24..].iter().all(|&b| b == 0));
        assert_eq!(encode(&flit).len(), 64);
    }

    #[test]
    fn data_flits_take_two_slots() {
        let p = Payload::from_word(0xabcdef);
        let flit = to_flit(&MemRequest::write(1, 0x40, SimTime::ZERO, p)).unwrap();
        let img = encode(&flit);
        assert_eq!(img.len(), 128);
        assert_eq!(&img[64..], &p.0);
        let resp = to_response(&flit, None).unwrap();
        assert_eq!(encode(&resp).len(), 64);
        assert_eq!(encode(&resp)[1], 0xFF);
    }

    #[test]
    fn malformed_images_rejected() {
        let flit = to_flit(&MemRequest::read(1, 0x40, SimTime::ZERO)).unwrap();
        let good = encode(&flit);
        assert_eq!(decode(&good[..63]), Err(CodecError::BadLength(63)));

        let mut bad = good.clone();
        bad[0] = 9;
        assert_eq!(decode(&bad), Err(CodecError::UnknownTransaction(9)));

        let mut bad = good.clone();
        bad[1] = META_ABSENT;
        assert!(matches!(decode(&bad), Err(CodecError::BadMeta { .. })));

        let mut bad = good.clone();
        bad[1] = 0b01;
        assert!(matches!(decode(&bad), Err(CodecError::BadMeta { .. })));

        let mut bad = good.clone();
        bad[40] = 1;
        assert_eq!(decode(&bad), Err(CodecError::ReservedNonZero(40)));

        let mut bad = good.clone();
        bad[18] = 0;
        assert_eq!(decode(&bad), Err(CodecError::ZeroBlocks));

        let mut bad = good.clone();
        bad[10] = 5;
        assert!(matches!(decode(&bad), Err(CodecError::AddressOutsideBlocks { .. })));

        let mut long = good.clone();
        long.extend_from_slice(&[0; 64]);
        assert!(matches!(decode(&long), Err(CodecError::DataSlotMismatch { .. })));
    }
}
