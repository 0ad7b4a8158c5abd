use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Size of host main memory in the default system map.
pub const MAIN_MEMORY_BYTES: u64 = 512 << 20;
/// Host physical base address of the expansion window.
pub const EXPANDER_BASE: u64 = 4 << 30;

/// Where a physical address is served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    LocalDram,
    /// Persistent memory on the local memory bus.
    LocalPmem,
    CxlDevice(u16),
}

impl Target {
    pub fn is_cxl(self) -> bool {
        matches!(self, Target::CxlDevice(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressRange {
    pub base: u64,
    pub size: u64,
    pub target: Target,
}

impl AddressRange {
    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr - self.base < self.size
    }
}

/// Disjoint physical address ranges, sorted by base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressMap {
    ranges: Vec<AddressRange>,
}

impl AddressMap {
    pub fn new(mut ranges: Vec<AddressRange>) -> Result<Self, ProtocolError> {
        ranges.sort_by_key(|r| r.base);
        for r in &ranges {
            if r.size == 0 {
                return Err(ProtocolError::EmptyRange { base: r.base });
            }
        }
        for pair in ranges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.base.checked_add(a.size).is_none_or(|end| end > b.base) {
                return Err(ProtocolError::OverlappingRanges {
                    a_base: a.base,
                    a_size: a.size,
                    b_base: b.base,
                    b_size: b.size,
                });
            }
        }
        Ok(AddressMap { ranges })
    }

    /// Main memory at `[0, 512 MiB)` plus the device under test at
    /// `[4 GiB, 4 GiB + window)`.
    pub fn system(window_target: Target, window: u64) -> Result<Self, ProtocolError> {
        AddressMap::new(vec![
            AddressRange { base: 0, size: MAIN_MEMORY_BYTES, target: Target::LocalDram },
            AddressRange { base: EXPANDER_BASE, size: window, target: window_target },
        ])
    }

    pub fn ranges(&self) -> &[AddressRange] {
        &self.ranges
    }

    pub fn resolve(&self, addr: u64) -> Result<&AddressRange, ProtocolError> {
        let idx = self.ranges.partition_point(|r| r.base <= addr);
        match idx.checked_sub(1).map(|i| &self.ranges[i]) {
            Some(r) if r.contains(addr) => Ok(r),
            _ => Err(ProtocolError::AddressFault { addr }),
        }
    }

    pub fn route(&self, addr: u64) -> Result<Target, ProtocolError> {
        self.resolve(addr).map(|r| r.target)
    }
}
