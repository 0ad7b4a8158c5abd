//! Brute-force replacement-policy models kept deliberately separate from the
//! library: ordered lists per set instead of timestamps, no pending state, no
//! data.

use cxl_ssd_sim::cache::PolicyKind;

#[derive(Debug, Clone)]
struct Entry {
    page: u64,
    freq: u32,
}

#[derive(Debug, Clone, Default)]
struct Set {
    /// LRU, LFRU: least recent first. FIFO, Direct: oldest first.
    main: Vec<Entry>,
    /// 2Q admission queue, oldest first. `main` is Am (least recent first).
    a1in: Vec<Entry>,
    accesses: u64,
}

pub struct ReferenceCache {
    policy: PolicyKind,
    ways: usize,
    sets: Vec<Set>,
    a1in_percent: usize,
    aging_interval: u64,
}

impl ReferenceCache {
    pub fn new(policy: PolicyKind, pages: usize, ways: usize, a1in_percent: usize, aging_interval: u64) -> Self {
        let ways = if policy == PolicyKind::Direct { 1 } else { ways };
        ReferenceCache { policy, ways, sets: vec![Set::default(); pages / ways], a1in_percent, aging_interval }
    }

    /// Returns true on a hit.
    pub fn access(&mut self, page: u64) -> bool {
        let n = self.sets.len() as u64;
        let ways = self.ways;
        let quota = (ways * self.a1in_percent / 100).max(1);
        let policy = self.policy;
        let set = &mut self.sets[(page % n) as usize];
        set.accesses += 1;

        match policy {
            PolicyKind::Direct | PolicyKind::Fifo => {
                let hit = set.main.iter().any(|e| e.page == page);
                if !hit {
                    if set.main.len() == ways {
                        set.main.remove(0);
                    }
                    set.main.push(Entry { page, freq: 1 });
                }
                hit
            }
            PolicyKind::Lru => {
                if let Some(i) = set.main.iter().position(|e| e.page == page) {
                    let e = set.main.remove(i);
                    set.main.push(e);
                    true
                } else {
                    if set.main.len() == ways {
                        set.main.remove(0);
                    }
                    set.main.push(Entry { page, freq: 1 });
                    false
                }
            }
            PolicyKind::TwoQ => {
                if let Some(i) = set.a1in.iter().position(|e| e.page == page) {
                    let e = set.a1in.remove(i);
                    set.main.push(e);
                    true
                } else if let Some(i) = set.main.iter().position(|e| e.page == page) {
                    let e = set.main.remove(i);
                    set.main.push(e);
                    true
                } else {
                    if set.a1in.len() + set.main.len() == ways {
                        if set.a1in.len() > quota || set.main.is_empty() {
                            set.a1in.remove(0);
                        } else {
                            set.main.remove(0);
                        }
                    }
                    set.a1in.push(Entry { page, freq: 1 });
                    false
                }
            }
            PolicyKind::Lfru => {
                let hit = if let Some(i) = set.main.iter().position(|e| e.page == page) {
                    let mut e = set.main.remove(i);
                    e.freq += 1;
                    set.main.push(e);
                    true
                } else {
                    if set.main.len() == ways {
                        // first minimum in recency order is the least recent
                        let min = set.main.iter().map(|e| e.freq).min().unwrap();
                        let i = set.main.iter().position(|e| e.freq == min).unwrap();
                        set.main.remove(i);
                    }
                    set.main.push(Entry { page, freq: 1 });
                    false
                };
                if set.accesses.is_multiple_of(self.aging_interval) {
                    for e in &mut set.main {
                        e.freq /= 2;
                    }
                }
                hit
            }
        }
    }
}
