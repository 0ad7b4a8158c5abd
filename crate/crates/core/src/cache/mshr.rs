use std::collections::HashMap;

use thiserror::Error;

pub const DEFAULT_MSHR_ENTRIES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MshrError {
    #[error("request {request} already waits on page {page}")]
    DuplicateRequest { page: u64, request: u32 },
    #[error("no MSHR entry for page {0}")]
    UnknownEntry(u64),
    #[error("MSHR entry for page {0} completed before its fill was issued")]
    NotIssued(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MshrOutcome {
    /// First miss on the page; the caller must issue one backend read.
    NewMiss,
    /// Joined an in-flight fill; no backend read.
    Coalesced,
    /// No free entry; retry once one completes.
    Stall,
}

/// An in-flight page fill and the requests waiting on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MshrEntry {
    pub page_number: u64,
    pub targets: Vec<u32>,
    pub issued: bool,
}

#[derive(Debug, Clone)]
pub struct Mshr {
    capacity: usize,
    entries: HashMap<u64, MshrEntry>,
}

impl Mshr {
    pub fn new(capacity: usize) -> Self {
        Mshr { capacity, entries: HashMap::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn contains(&self, page_number: u64) -> bool {
        self.entries.contains_key(&page_number)
    }

    pub fn entry(&self, page_number: u64) -> Option<&MshrEntry> {
        self.entries.get(&page_number)
    }

    pub fn register(&mut self, page_number: u64, request: u32) -> Result<MshrOutcome, MshrError> {
        if let Some(entry) = self.entries.get_mut(&page_number) {
            if entry.targets.contains(&request) {
                return Err(MshrError::DuplicateRequest { page: page_number, request });
            }
            entry.targets.push(request);
            return Ok(MshrOutcome::Coalesced);
        }
        if self.is_full() {
            return Ok(MshrOutcome::Stall);
        }
        self.entries.insert(page_number, MshrEntry { page_number, targets: vec![request], issued: false });
        Ok(MshrOutcome::NewMiss)
    }

    pub fn mark_issued(&mut self, page_number: u64) -> Result<(), MshrError> {
        let entry = self.entries.get_mut(&page_number).ok_or(MshrError::UnknownEntry(page_number))?;
        entry.issued = true;
        Ok(())
    }

    /// Retire the entry and hand back its waiters in arrival order.
    pub fn complete(&mut self, page_number: u64) -> Result<Vec<u32>, MshrError> {
        match self.entries.get(&page_number) {
            None => Err(MshrError::UnknownEntry(page_number)),
            Some(e) if !e.issued => Err(MshrError::NotIssued(page_number)),
            Some(_) => Ok(self.entries.remove(&page_number).expect("present").targets),
        }
    }
}
