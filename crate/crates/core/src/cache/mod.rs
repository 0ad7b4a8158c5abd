//! DRAM page cache in front of the SSD: set-associative 4 KiB pages with
//! valid and dirty bits, write-back and write-allocate.
//!
//! A miss installs the page tag immediately and marks the way pending; the
//! caller completes the fill once the backend read returns. Pending ways are
//! never chosen as victims.

mod mshr;
pub mod policy;

pub use mshr::{Mshr, MshrEntry, MshrError, MshrOutcome, DEFAULT_MSHR_ENTRIES};
pub use policy::{evict_victim, ParsePolicyError, PolicyKind, PolicyMeta, PolicyParams, Queue};

use thiserror::Error;

use crate::protocol::Payload;
use crate::stats::AccessKind;
use crate::{LINE_SIZE, PAGE_SIZE};

pub const DEFAULT_CACHE_CAPACITY: u64 = 16 << 20;
pub const DEFAULT_WAYS: usize = 8;

pub type PageData = [u8; PAGE_SIZE as usize];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CacheError {
    #[error("cache capacity {capacity} is not a multiple of {PAGE_SIZE} x {ways} ways")]
    UnevenCapacity { capacity: u64, ways: usize },
    #[error("set count {0} is not a power of two")]
    SetsNotPowerOfTwo(u64),
    #[error("associativity must be at least 1")]
    ZeroWays,
    #[error("every way of set {set} is waiting on a fill")]
    SetBusy { set: usize },
    #[error("page {0} is waiting on its fill")]
    FillPending(u64),
    #[error("page {0} is not resident")]
    NotResident(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheGeometry {
    pub capacity: u64,
    pub ways: usize,
}

impl CacheGeometry {
    pub fn new(capacity: u64, ways: usize) -> Result<Self, CacheError> {
        if ways == 0 {
            return Err(CacheError::ZeroWays);
        }
        let way_bytes = PAGE_SIZE * ways as u64;
        if capacity == 0 || !capacity.is_multiple_of(way_bytes) {
            return Err(CacheError::UnevenCapacity { capacity, ways });
        }
        let sets = capacity / way_bytes;
        if !sets.is_power_of_two() {
            return Err(CacheError::SetsNotPowerOfTwo(sets));
        }
        Ok(CacheGeometry { capacity, ways })
    }

    /// Direct mapping is one-way regardless of the requested associativity.
    pub fn for_policy(capacity: u64, ways: usize, policy: PolicyKind) -> Result<Self, CacheError> {
        let ways = if policy == PolicyKind::Direct { 1 } else { ways };
        Self::new(capacity, ways)
    }

    pub fn num_sets(&self) -> usize {
        (self.capacity / (PAGE_SIZE * self.ways as u64)) as usize
    }

    pub fn pages(&self) -> usize {
        (self.capacity / PAGE_SIZE) as usize
    }

    pub fn set_index(&self, page_number: u64) -> usize {
        (page_number % self.num_sets() as u64) as usize
    }
}

/// State of one way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CachePageMeta {
    pub tag: u64,
    pub valid: bool,
    pub dirty: bool,
    pub pending: bool,
    pub policy: PolicyMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Victim {
    pub page: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    Miss { victim: Option<Victim> },
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }
}

/// Where a page currently stands in the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residency {
    Absent,
    Pending,
    Resident,
}

pub struct PageCache {
    geometry: CacheGeometry,
    policy: PolicyKind,
    params: PolicyParams,
    ways: Vec<CachePageMeta>,
    data: Vec<Option<Box<PageData>>>,
    set_accesses: Vec<u64>,
    stamp: u64,
    /// Data of the most recent dirty victim, kept until taken.
    evicted: Option<(u64, Box<PageData>)>,
}

impl std::fmt::Debug for PageCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PageCache")
            .field("geometry", &self.geometry)
            .field("policy", &self.policy)
            .field("resident", &self.resident_pages())
            .finish()
    }
}

impl PageCache {
    pub fn new(geometry: CacheGeometry, policy: PolicyKind, params: PolicyParams) -> Self {
        let slots = geometry.num_sets() * geometry.ways;
        PageCache {
            geometry,
            policy,
            params,
            ways: vec![CachePageMeta::default(); slots],
            data: (0..slots).map(|_| None).collect(),
            set_accesses: vec![0; geometry.num_sets()],
            stamp: 0,
            evicted: None,
        }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn set(&self, set: usize) -> &[CachePageMeta] {
        let w = self.geometry.ways;
        &self.ways[set * w..(set + 1) * w]
    }

    pub fn resident_pages(&self) -> usize {
        self.ways.iter().filter(|w| w.valid).count()
    }

    pub fn dirty_pages(&self) -> usize {
        self.ways.iter().filter(|w| w.dirty).count()
    }

    pub fn all_ways(&self) -> &[CachePageMeta] {
        &self.ways
    }

    fn find(&self, page: u64) -> Option<usize> {
        let set = self.geometry.set_index(page);
        let base = set * self.geometry.ways;
        (base..base + self.geometry.ways).find(|&i| self.ways[i].valid && self.ways[i].tag == page)
    }

    pub fn residency(&self, page: u64) -> Residency {
        match self.find(page) {
            None => Residency::Absent,
            Some(i) if self.ways[i].pending => Residency::Pending,
            Some(_) => Residency::Resident,
        }
    }

    /// Whether a miss on `page` could be allocated right now.
    pub fn can_allocate(&self, page: u64) -> bool {
        self.set(self.geometry.set_index(page)).iter().any(|w| !w.valid || !w.pending)
    }

    /// Look up the page holding `addr`. A hit updates policy state and, for
    /// writes, marks the page dirty. A miss picks a way (invalid ways first,
    /// then the policy's victim) and installs the page as pending.
    pub fn access(&mut self, addr: u64, kind: AccessKind) -> Result<AccessOutcome, CacheError> {
        let page = addr / PAGE_SIZE;
        let set = self.geometry.set_index(page);
        let ways = self.geometry.ways;
        let base = set * ways;
        self.stamp += 1;
        let stamp = self.stamp;

        let outcome = if let Some(i) = self.find(page) {
            let way = &mut self.ways[i];
            if way.pending {
                return Err(CacheError::FillPending(page));
            }
            policy::on_hit(&mut way.policy, stamp);
            if kind == AccessKind::Write {
                way.dirty = true;
            }
            AccessOutcome::Hit
        } else {
            let slot = match self.set(set).iter().position(|w| !w.valid) {
                Some(free) => free,
                None => evict_victim(self.set(set), self.policy, &self.params).ok_or(CacheError::SetBusy { set })?,
            };
            let i = base + slot;
            let old = self.ways[i];
            let victim = old.valid.then_some(Victim { page: old.tag, dirty: old.dirty });
            if old.valid && old.dirty {
                let data = self.data[i].take().expect("dirty page has data");
                self.evicted = Some((old.tag, data));
            }
            let way = &mut self.ways[i];
            *way = CachePageMeta { tag: page, valid: true, dirty: false, pending: true, policy: PolicyMeta::default() };
            policy::on_insert(&mut way.policy, stamp);
            AccessOutcome::Miss { victim }
        };

        self.set_accesses[set] += 1;
        let count = self.set_accesses[set];
        policy::on_set_access(&mut self.ways[base..base + ways], self.policy, &self.params, count);
        Ok(outcome)
    }

    /// Take the contents of the last dirty victim for write-back.
    pub fn take_evicted(&mut self) -> Option<(u64, Box<PageData>)> {
        self.evicted.take()
    }

    /// Install fetched data into a pending page.
    pub fn complete_fill(&mut self, page: u64, contents: &PageData) -> Result<(), CacheError> {
        let i = self.find(page).ok_or(CacheError::NotResident(page))?;
        if !self.ways[i].pending {
            return Err(CacheError::NotResident(page));
        }
        match &mut self.data[i] {
            Some(buf) => buf.copy_from_slice(contents),
            slot => *slot = Some(Box::new(*contents)),
        }
        self.ways[i].pending = false;
        Ok(())
    }

    /// Access with an immediate zero fill; for functional use without timing.
    pub fn access_now(&mut self, addr: u64, kind: AccessKind) -> Result<AccessOutcome, CacheError> {
        let outcome = self.access(addr, kind)?;
        if !outcome.is_hit() {
            self.complete_fill(addr / PAGE_SIZE, &[0; PAGE_SIZE as usize])?;
            if kind == AccessKind::Write {
                self.mark_dirty(addr)?;
            }
        }
        Ok(outcome)
    }

    fn resident_slot(&self, addr: u64) -> Result<usize, CacheError> {
        let page = addr / PAGE_SIZE;
        let i = self.find(page).ok_or(CacheError::NotResident(page))?;
        if self.ways[i].pending {
            return Err(CacheError::FillPending(page));
        }
        Ok(i)
    }

    fn mark_dirty(&mut self, addr: u64) -> Result<(), CacheError> {
        let i = self.resident_slot(addr)?;
        self.ways[i].dirty = true;
        Ok(())
    }

    pub fn read_line(&self, addr: u64) -> Result<Payload, CacheError> {
        let i = self.resident_slot(addr)?;
        let offset = (addr % PAGE_SIZE) as usize / LINE_SIZE as usize * LINE_SIZE as usize;
        let mut line = Payload::ZERO;
        if let Some(buf) = &self.data[i] {
            line.0.copy_from_slice(&buf[offset..offset + LINE_SIZE as usize]);
        }
        Ok(line)
    }

    /// Merge one line into a resident page and mark it dirty.
    pub fn write_line(&mut self, addr: u64, payload: &Payload) -> Result<(), CacheError> {
        let i = self.resident_slot(addr)?;
        let offset = (addr % PAGE_SIZE) as usize / LINE_SIZE as usize * LINE_SIZE as usize;
        let buf = self.data[i].get_or_insert_with(|| Box::new([0; PAGE_SIZE as usize]));
        buf[offset..offset + LINE_SIZE as usize].copy_from_slice(&payload.0);
        self.ways[i].dirty = true;
        Ok(())
    }

    /// Write back every dirty page: returns their contents and clears the
    /// dirty bits.
    pub fn flush_all(&mut self) -> Vec<(u64, Box<PageData>)> {
        let mut out = Vec::new();
        for (way, data) in self.ways.iter_mut().zip(&self.data) {
            if way.dirty {
                way.dirty = false;
                let contents = data.clone().unwrap_or_else(|| Box::new([0; PAGE_SIZE as usize]));
                out.push((way.tag, contents));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PAGE: u64 = PAGE_SIZE;

    fn cache(pages: u64, ways: usize, policy: PolicyKind) -> PageCache {
        let g = CacheGeometry::for_policy(pages * PAGE, ways, policy).unwrap();
        PageCache::new(g, policy, PolicyParams::default())
    }

    #[test]
    fn geometry_defaults() {
        let g = CacheGeometry::new(DEFAULT_CACHE_CAPACITY, DEFAULT_WAYS).unwrap();
        assert_eq!(g.num_sets(), 512);
        assert_eq!(g.pages(), 4096);
        let d = CacheGeometry::for_policy(DEFAULT_CACHE_CAPACITY, DEFAULT_WAYS, PolicyKind::Direct).unwrap();
        assert_eq!((d.ways, d.num_sets()), (1, 4096));
    }

    #[test]
    fn geometry_validation() {
        assert_eq!(CacheGeometry::new(PAGE * 8, 0), Err(CacheError::ZeroWays));
        assert!(matches!(CacheGeometry::new(PAGE * 7, 2), Err(CacheError::UnevenCapacity { .. })));
        assert_eq!(CacheGeometry::new(PAGE * 6, 2), Err(CacheError::SetsNotPowerOfTwo(3)));
    }

    #[test]
    fn cold_read_misses_without_victim() {
        let mut c = cache(16, 8, PolicyKind::Lru);
        assert_eq!(c.access(5 * PAGE, AccessKind::Read).unwrap(), AccessOutcome::Miss { victim: None });
        assert_eq!(c.residency(5), Residency::Pending);
    }

    #[test]
    fn lru_evicts_older_page() {
        // One set of two ways.
        let mut c = cache(2, 2, PolicyKind::Lru);
        c.access_now(0xA * PAGE, AccessKind::Read).unwrap();
        c.access_now(0xB * PAGE, AccessKind::Read).unwrap();
        let out = c.access_now(0xC * PAGE, AccessKind::Read).unwrap();
        assert_eq!(out, AccessOutcome::Miss { victim: Some(Victim { page: 0xA, dirty: false }) });
    }

    #[test]
    fn fifo_and_lru_differ_after_touch() {
        for (policy, expect) in [(PolicyKind::Fifo, 0xA), (PolicyKind::Lru, 0xB)] {
            let mut c = cache(2, 2, policy);
            c.access_now(0xA * PAGE, AccessKind::Read).unwrap();
            c.access_now(0xB * PAGE, AccessKind::Read).unwrap();
            assert!(c.access_now(0xA * PAGE, AccessKind::Read).unwrap().is_hit());
            match c.access_now(0xC * PAGE, AccessKind::Read).unwrap() {
                AccessOutcome::Miss { victim: Some(v) } => assert_eq!(v.page, expect, "{policy}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn write_hit_dirties_and_evicts_once() {
        let mut c = cache(1, 1, PolicyKind::Lru);
        c.access_now(0, AccessKind::Read).unwrap();
        assert!(c.access_now(64, AccessKind::Write).unwrap().is_hit());
        c.write_line(64, &Payload::from_word(1)).unwrap();
        assert_eq!(c.dirty_pages(), 1);
        let out = c.access_now(PAGE, AccessKind::Read).unwrap();
        assert_eq!(out, AccessOutcome::Miss { victim: Some(Victim { page: 0, dirty: true }) });
        let (page, data) = c.take_evicted().unwrap();
        assert_eq!(page, 0);
        assert_eq!(&data[64..128], &Payload::from_word(1).0);
        assert!(c.take_evicted().is_none());
    }

    #[test]
    fn write_miss_allocates() {
        let mut c = cache(4, 2, PolicyKind::Lru);
        assert!(!c.access(3 * PAGE, AccessKind::Write).unwrap().is_hit());
        c.complete_fill(3, &[7; PAGE_SIZE as usize]).unwrap();
        c.write_line(3 * PAGE + 128, &Payload::from_word(9)).unwrap();
        assert_eq!(c.read_line(3 * PAGE + 128).unwrap(), Payload::from_word(9));
        assert_eq!(c.read_line(3 * PAGE).unwrap().0, [7; 64]);
        assert_eq!(c.dirty_pages(), 1);
    }

    #[test]
    fn pending_pages_are_protected() {
        let mut c = cache(1, 1, PolicyKind::Lru);
        c.access(0, AccessKind::Read).unwrap();
        assert!(!c.can_allocate(1));
        assert_eq!(c.access(PAGE, AccessKind::Read), Err(CacheError::SetBusy { set: 0 }));
        assert_eq!(c.access(0, AccessKind::Read), Err(CacheError::FillPending(0)));
        assert_eq!(c.read_line(0), Err(CacheError::FillPending(0)));
    }

    #[test]
    fn flush_counts_dirty_pages() {
        let mut c = cache(16, 4, PolicyKind::Lru);
        assert!(c.flush_all().is_empty());
        for p in 0..5 {
            c.access_now(p * PAGE, if p % 2 == 0 { AccessKind::Write } else { AccessKind::Read }).unwrap();
        }
        let flushed = c.flush_all();
        assert_eq!(flushed.len(), 3);
        assert_eq!(c.dirty_pages(), 0);
        assert!(c.flush_all().is_empty());
    }

    #[test]
    fn lfru_aging_halves_counts() {
        let params = PolicyParams { lfru_aging_interval: 4, ..Default::default() };
        let g = CacheGeometry::new(2 * PAGE, 2).unwrap();
        let mut c = PageCache::new(g, PolicyKind::Lfru, params);
        c.access_now(0, AccessKind::Read).unwrap();
        c.access_now(0, AccessKind::Read).unwrap();
        c.access_now(0, AccessKind::Read).unwrap();
        assert_eq!(c.set(0)[0].policy.frequency, 3);
        c.access_now(0, AccessKind::Read).unwrap();
        // fourth access: 4 then halved
        assert_eq!(c.set(0)[0].policy.frequency, 2);
    }

    proptest! {
        #[test]
        fn dirty_implies_valid(ops in proptest::collection::vec((0u64..40, any::<bool>()), 1..300), policy in 0usize..5) {
            let mut c = cache(8, 2, PolicyKind::ALL[policy]);
            for (page, write) in ops {
                let kind = if write { AccessKind::Write } else { AccessKind::Read };
                c.access_now(page * PAGE, kind).unwrap();
                prop_assert!(c.all_ways().iter().all(|w| !w.dirty || w.valid));
            }
        }

        #[test]
        fn footprint_within_capacity_always_hits_second_pass(pages in 1u64..=16, policy in 0usize..5) {
            let mut c = cache(16, 4, PolicyKind::ALL[policy]);
            for p in 0..pages { c.access_now(p * PAGE, AccessKind::Read).unwrap(); }
            for p in 0..pages { prop_assert!(c.access_now(p * PAGE, AccessKind::Read).unwrap().is_hit()); }
        }
    }
}
