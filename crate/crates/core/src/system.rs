//! Event-driven model of the host, Home Agent and device under test.
//!
//! A request leaves the host, is routed by the Home Agent and, for CXL
//! devices, converted to a flit (one conversion stage) and decoded by the
//! device (a second stage) before service. The cached SSD device then spends
//! one cache array access on the lookup; misses go through the MSHR to the
//! SSD. Responses carry no extra latency.

use std::collections::HashMap;

use log::warn;
use thiserror::Error;

use crate::cache::{
    AccessOutcome, CacheError, CacheGeometry, Mshr, MshrError, MshrOutcome, PageCache, PageData, PolicyKind,
    PolicyParams, Residency, DEFAULT_CACHE_CAPACITY, DEFAULT_MSHR_ENTRIES, DEFAULT_WAYS,
};
use crate::devices::{DeviceError, DeviceKind, SsdConfig, SsdModel, Timings};
use crate::engine::{EngineError, EventQueue, SimTime, DEFAULT_EVENT_BUDGET};
use crate::protocol::codec::{self, CodecError};
use crate::protocol::{
    flit_to_ssd_request, to_flit, to_response, AddressMap, CxlFlit, MemRequest, Payload, ProtocolError, Target,
};
use crate::stats::{AccessKind, AccessLevel, StatsAccumulator};
use crate::workloads::RequestTrace;
use crate::{LINE_SIZE, PAGE_SIZE};

pub const DEFAULT_MAX_OUTSTANDING: usize = 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Mshr(#[from] MshrError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub device: DeviceKind,
    pub policy: PolicyKind,
    pub policy_params: PolicyParams,
    pub cache_capacity: u64,
    pub cache_ways: usize,
    pub mshr_entries: usize,
    pub timings: Timings,
    pub ssd: SsdConfig,
    /// Cap on concurrently outstanding independent requests.
    pub max_outstanding: usize,
    pub event_budget: u64,
    /// Keep a per-request completion log (latency and read data).
    pub record_completions: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            device: DeviceKind::CxlSsdCached,
            policy: PolicyKind::Lru,
            policy_params: PolicyParams::default(),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            cache_ways: DEFAULT_WAYS,
            mshr_entries: DEFAULT_MSHR_ENTRIES,
            timings: Timings::default(),
            ssd: SsdConfig::default(),
            max_outstanding: DEFAULT_MAX_OUTSTANDING,
            event_budget: DEFAULT_EVENT_BUDGET,
            record_completions: false,
        }
    }
}

impl SystemConfig {
    pub fn for_device(device: DeviceKind) -> Self {
        SystemConfig { device, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub id: u32,
    pub issued: SimTime,
    pub completed: SimTime,
    /// Data returned to the host for reads.
    pub data: Option<Payload>,
}

impl Completion {
    pub fn latency(&self) -> SimTime {
        self.completed - self.issued
    }
}

#[derive(Debug)]
pub struct SimOutcome {
    pub stats: StatsAccumulator,
    /// Clock after the last dispatched event, including the final flush.
    pub end_time: SimTime,
    pub completions: Vec<Completion>,
    pub max_in_flight: usize,
    pub events: u64,
}

/// A run that stopped on a fault, with what was measured before it.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct SimFailure {
    pub error: SimError,
    pub partial: Box<SimOutcome>,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Wake,
    Decode(usize),
    Serve(usize),
    CacheLookup(usize),
    FillDone(u64),
    Complete(usize),
}

#[derive(Debug, Clone, Default)]
struct Slot {
    issued: SimTime,
    device_addr: u64,
    flit: Option<CxlFlit>,
    data: Option<Payload>,
}

/// Sparse backing memory keyed by host page number; unwritten memory reads
/// as zeros.
#[derive(Debug, Default)]
struct BackingStore {
    pages: HashMap<u64, Box<PageData>>,
}

impl BackingStore {
    fn read_page(&self, page: u64) -> PageData {
        self.pages.get(&page).map(|p| **p).unwrap_or([0; PAGE_SIZE as usize])
    }

    fn write_page(&mut self, page: u64, data: Box<PageData>) {
        self.pages.insert(page, data);
    }

    fn read_line(&self, addr: u64) -> Payload {
        let mut line = Payload::ZERO;
        if let Some(p) = self.pages.get(&(addr / PAGE_SIZE)) {
            let off = (addr % PAGE_SIZE) as usize;
            line.0.copy_from_slice(&p[off..off + LINE_SIZE as usize]);
        }
        line
    }

    fn write_line(&mut self, addr: u64, payload: &Payload) {
        let page = self.pages.entry(addr / PAGE_SIZE).or_insert_with(|| Box::new([0; PAGE_SIZE as usize]));
        let off = (addr % PAGE_SIZE) as usize;
        page[off..off + LINE_SIZE as usize].copy_from_slice(&payload.0);
    }
}

pub struct Simulator<'t> {
    config: SystemConfig,
    map: AddressMap,
    window_base: u64,
    queue: EventQueue<Action>,
    trace: &'t RequestTrace,
    slots: Vec<Slot>,
    next: usize,
    outstanding: usize,
    max_in_flight: usize,
    wake_at: Option<SimTime>,
    warmed: bool,
    stats: StatsAccumulator,
    ssd: SsdModel,
    cache: Option<PageCache>,
    mshr: Mshr,
    stalled: Vec<usize>,
    store: BackingStore,
    completions: Vec<Completion>,
}

impl<'t> Simulator<'t> {
    pub fn new(config: SystemConfig, trace: &'t RequestTrace) -> Result<Self, SimError> {
        let map = AddressMap::system(config.device.target(), config.ssd.capacity)?;
        let window_base = map.ranges().iter().find(|r| r.base > 0).map(|r| r.base).expect("device window");
        let cache = if config.device.has_cache() {
            let geometry = CacheGeometry::for_policy(config.cache_capacity, config.cache_ways, config.policy)?;
            Some(PageCache::new(geometry, config.policy, config.policy_params))
        } else {
            None
        };
        Ok(Simulator {
            map,
            window_base,
            queue: EventQueue::with_budget(config.event_budget),
            trace,
            slots: vec![Slot::default(); trace.len()],
            next: 0,
            outstanding: 0,
            max_in_flight: 0,
            wake_at: None,
            warmed: trace.warmup == 0,
            stats: StatsAccumulator::new(config.device.has_ssd(), config.device.has_cache()),
            ssd: SsdModel::new(config.ssd),
            cache,
            mshr: Mshr::new(config.mshr_entries),
            stalled: Vec::new(),
            store: BackingStore::default(),
            completions: Vec::new(),
            config,
        })
    }

    /// Replay the whole trace, then write back every dirty cache page. The
    /// final flush is counted in the SSD totals but not in the measured window.
    pub fn run(self) -> Result<SimOutcome, SimError> {
        self.run_partial().map_err(|f| f.error)
    }

    /// Like [`Simulator::run`], but a fault still hands back the statistics
    /// gathered up to the failing event.
    pub fn run_partial(mut self) -> Result<SimOutcome, SimFailure> {
        match self.drive() {
            Ok(()) => Ok(self.into_outcome()),
            Err(error) => Err(SimFailure { error, partial: Box::new(self.into_outcome()) }),
        }
    }

    fn drive(&mut self) -> Result<(), SimError> {
        self.try_issue()?;
        while let Some(event) = self.queue.pop()? {
            self.dispatch(event.action)?;
        }
        debug_assert!(self.stalled.is_empty() && self.mshr.is_empty());
        self.flush()?;
        while self.queue.pop()?.is_some() {}
        Ok(())
    }

    fn into_outcome(self) -> SimOutcome {
        SimOutcome {
            end_time: self.queue.now(),
            events: self.queue.dispatched(),
            stats: self.stats,
            completions: self.completions,
            max_in_flight: self.max_in_flight,
        }
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    fn dispatch(&mut self, action: Action) -> Result<(), SimError> {
        match action {
            Action::Wake => {
                self.wake_at = None;
                self.try_issue()
            }
            Action::Decode(idx) => self.decode(idx),
            Action::Serve(idx) => self.serve(idx),
            Action::CacheLookup(idx) => self.lookup(idx),
            Action::FillDone(page) => self.fill_done(page),
            Action::Complete(idx) => self.complete(idx),
        }
    }

    fn try_issue(&mut self) -> Result<(), SimError> {
        while self.next < self.trace.len() {
            let idx = self.next;
            if !self.warmed && idx == self.trace.warmup {
                if self.outstanding > 0 {
                    return Ok(());
                }
                self.warmed = true;
                let now = self.now();
                self.stats.reset(now);
            }
            if self.trace.dependent[idx] && self.outstanding > 0 {
                return Ok(());
            }
            if self.outstanding >= self.config.max_outstanding.max(1) {
                return Ok(());
            }
            let due = self.trace.requests[idx].issue_time;
            if due > self.now() {
                if self.wake_at.is_none_or(|w| w > due) {
                    self.queue.schedule(due, Action::Wake)?;
                    self.wake_at = Some(due);
                }
                return Ok(());
            }
            self.next += 1;
            self.issue(idx)?;
        }
        Ok(())
    }

    fn issue(&mut self, idx: usize) -> Result<(), SimError> {
        let req = &self.trace.requests[idx];
        let now = self.now();
        if req.kind.access_kind().is_none() {
            warn!("dropping request {} with unsupported command {:?}", req.id, req.kind);
            self.stats.dropped_unsupported += 1;
            return Ok(());
        }
        let range = *self.map.resolve(req.addr)?;
        self.outstanding += 1;
        self.max_in_flight = self.max_in_flight.max(self.outstanding);
        let slot = &mut self.slots[idx];
        slot.issued = now;
        slot.device_addr = req.addr - range.base;
        let t = &self.config.timings;
        match range.target {
            Target::LocalDram | Target::LocalPmem => {
                let timing = if range.target == Target::LocalDram { t.dram } else { t.pmem };
                let ns = timing.latency_ns(access_kind(req));
                self.queue.schedule_in(SimTime::from_ns(ns), Action::Complete(idx));
                self.access_store(idx);
            }
            Target::CxlDevice(_) => {
                // Home Agent: translate to a device address and build the flit.
                let device_req = MemRequest { addr: slot.device_addr, ..req.clone() };
                let flit = to_flit(&device_req)?;
                self.stats.record_meta(flit.meta.expect("host-to-device flit"));
                slot.flit = Some(flit);
                self.queue.schedule_in(SimTime::from_ns(t.cxl_stage_ns), Action::Decode(idx));
            }
        }
        Ok(())
    }

    fn decode(&mut self, idx: usize) -> Result<(), SimError> {
        let slot = &mut self.slots[idx];
        let wire = codec::encode(slot.flit.as_ref().expect("CXL request has a flit"));
        slot.flit = Some(codec::decode(&wire)?);
        self.queue.schedule_in(SimTime::from_ns(self.config.timings.cxl_stage_ns), Action::Serve(idx));
        Ok(())
    }

    fn serve(&mut self, idx: usize) -> Result<(), SimError> {
        let req = &self.trace.requests[idx];
        let kind = access_kind(req);
        match self.config.device {
            DeviceKind::CxlDram => {
                let ns = self.config.timings.dram.latency_ns(kind);
                self.queue.schedule_in(SimTime::from_ns(ns), Action::Complete(idx));
                self.access_store(idx);
            }
            DeviceKind::CxlSsd => {
                let ssd_req = flit_to_ssd_request(self.slots[idx].flit.as_ref().expect("flit"))?;
                let now = self.now();
                let done = self.ssd.page_op(now, ssd_req.kind, ssd_req.lba)?;
                self.stats.record_access(
                    SimTime::from_ns(self.ssd.config().latency_ns(kind)),
                    PAGE_SIZE,
                    kind,
                    AccessLevel::Backend,
                );
                self.access_store(idx);
                self.queue.schedule(done, Action::Complete(idx))?;
            }
            DeviceKind::CxlSsdCached => {
                let ns = self.config.timings.cache_access_ns;
                self.queue.schedule_in(SimTime::from_ns(ns), Action::CacheLookup(idx));
            }
            DeviceKind::Dram | DeviceKind::Pmem => unreachable!("local devices are served at issue"),
        }
        Ok(())
    }

    fn host_page(&self, device_page: u64) -> u64 {
        self.window_base / PAGE_SIZE + device_page
    }

    fn lookup(&mut self, idx: usize) -> Result<(), SimError> {
        let req = &self.trace.requests[idx];
        let kind = access_kind(req);
        let addr = self.slots[idx].device_addr;
        let page = addr / PAGE_SIZE;
        let now = self.now();

        if self.mshr.contains(page) {
            let outcome = self.mshr.register(page, req.id)?;
            debug_assert_eq!(outcome, MshrOutcome::Coalesced);
            self.stats.record_hit(false);
            return Ok(());
        }

        let cache = self.cache.as_mut().expect("cached device");
        match cache.residency(page) {
            Residency::Resident => {
                let outcome = cache.access(addr, kind)?;
                debug_assert!(outcome.is_hit());
                self.stats.record_hit(true);
                self.apply_cached(idx)?;
                self.complete(idx)
            }
            Residency::Pending => unreachable!("pending page {page} without MSHR entry"),
            Residency::Absent => {
                if self.mshr.is_full() || !cache.can_allocate(page) {
                    self.stalled.push(idx);
                    return Ok(());
                }
                let registered = self.mshr.register(page, req.id)?;
                debug_assert_eq!(registered, MshrOutcome::NewMiss);
                self.stats.record_hit(false);
                let AccessOutcome::Miss { victim } = cache.access(addr, kind)? else {
                    unreachable!("absent page hit");
                };
                let evicted = cache.take_evicted();
                // Fill first; the write-back queues behind it.
                let fill_done = self.ssd.page_op(now, AccessKind::Read, page)?;
                let ssd = *self.ssd.config();
                self.stats.record_access(
                    SimTime::from_ns(ssd.page_read_ns),
                    PAGE_SIZE,
                    AccessKind::Read,
                    AccessLevel::Backend,
                );
                if let Some((victim_page, data)) = evicted {
                    debug_assert!(victim.is_some_and(|v| v.dirty && v.page == victim_page));
                    let host_page = self.host_page(victim_page);
                    self.store.write_page(host_page, data);
                    self.ssd.page_op(now, AccessKind::Write, victim_page)?;
                    self.stats.record_access(
                        SimTime::from_ns(ssd.page_program_ns),
                        PAGE_SIZE,
                        AccessKind::Write,
                        AccessLevel::Backend,
                    );
                    self.stats.dirty_evictions += 1;
                }
                self.mshr.mark_issued(page)?;
                self.queue.schedule(fill_done, Action::FillDone(page))?;
                Ok(())
            }
        }
    }

    /// Serve a request from a resident cache page.
    fn apply_cached(&mut self, idx: usize) -> Result<(), SimError> {
        let req = &self.trace.requests[idx];
        let addr = self.slots[idx].device_addr;
        let cache = self.cache.as_mut().expect("cached device");
        match &req.payload {
            Some(p) => cache.write_line(addr, p)?,
            None => self.slots[idx].data = Some(cache.read_line(addr)?),
        }
        Ok(())
    }

    fn fill_done(&mut self, page: u64) -> Result<(), SimError> {
        let contents = self.store.read_page(self.host_page(page));
        self.cache.as_mut().expect("cached device").complete_fill(page, &contents)?;
        for id in self.mshr.complete(page)? {
            let idx = id as usize;
            self.apply_cached(idx)?;
            self.complete(idx)?;
        }
        for idx in std::mem::take(&mut self.stalled) {
            self.lookup(idx)?;
        }
        Ok(())
    }

    fn complete(&mut self, idx: usize) -> Result<(), SimError> {
        let now = self.now();
        let req = &self.trace.requests[idx];
        let slot = &mut self.slots[idx];
        if let Some(flit) = slot.flit.take() {
            let response = to_response(&flit, slot.data)?;
            debug_assert_eq!(response.req_id, req.id);
        }
        self.outstanding -= 1;
        if idx >= self.trace.warmup {
            let latency = now - slot.issued;
            self.stats.record_access(latency, LINE_SIZE, access_kind(req), AccessLevel::Cache);
            self.stats.mark_end(now);
            if self.config.record_completions {
                self.completions.push(Completion { id: req.id, issued: slot.issued, completed: now, data: slot.data });
            }
        }
        slot.data = None;
        self.try_issue()
    }

    /// Functional data access for devices without a page cache.
    fn access_store(&mut self, idx: usize) {
        let req = &self.trace.requests[idx];
        match &req.payload {
            Some(p) => self.store.write_line(req.addr, p),
            None => self.slots[idx].data = Some(self.store.read_line(req.addr)),
        }
    }

    fn flush(&mut self) -> Result<(), SimError> {
        let Some(cache) = self.cache.as_mut() else {
            return Ok(());
        };
        let now = self.queue.now();
        let program_ns = self.ssd.config().page_program_ns;
        for (page, data) in cache.flush_all() {
            let host_page = self.window_base / PAGE_SIZE + page;
            self.store.write_page(host_page, data);
            self.ssd.page_op(now, AccessKind::Write, page)?;
            self.stats.record_access(SimTime::from_ns(program_ns), PAGE_SIZE, AccessKind::Write, AccessLevel::Backend);
            self.stats.flush_writebacks += 1;
        }
        Ok(())
    }
}

fn access_kind(req: &MemRequest) -> AccessKind {
    req.kind.access_kind().expect("dropped before service")
}

/// Build a simulator for `config` and replay `trace` to completion.
pub fn simulate(config: &SystemConfig, trace: &RequestTrace) -> Result<SimOutcome, SimError> {
    Simulator::new(config.clone(), trace)?.run()
}

/// [`simulate`], keeping partial statistics when the run faults midway.
pub fn simulate_partial(config: &SystemConfig, trace: &RequestTrace) -> Result<SimOutcome, SimFailure> {
    let sim = Simulator::new(config.clone(), trace).map_err(|error| SimFailure {
        error,
        partial: Box::new(SimOutcome {
            stats: StatsAccumulator::new(config.device.has_ssd(), config.device.has_cache()),
            end_time: SimTime::ZERO,
            completions: Vec::new(),
            max_in_flight: 0,
            events: 0,
        }),
    })?;
    sim.run_partial()
}
