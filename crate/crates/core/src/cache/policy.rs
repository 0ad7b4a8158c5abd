//! Replacement policies for the page cache.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CachePageMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "lru")]
    Lru,
    #[serde(rename = "fifo")]
    Fifo,
    #[serde(rename = "2q")]
    TwoQ,
    #[serde(rename = "lfru")]
    Lfru,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Direct, PolicyKind::Lru, PolicyKind::Fifo, PolicyKind::TwoQ, PolicyKind::Lfru];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Direct => "direct",
            PolicyKind::Lru => "lru",
            PolicyKind::Fifo => "fifo",
            PolicyKind::TwoQ => "2q",
            PolicyKind::Lfru => "lfru",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown replacement policy {0:?} (expected direct, lru, fifo, 2q or lfru)")]
pub struct ParsePolicyError(pub String);

impl FromStr for PolicyKind {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(PolicyKind::Direct),
            "lru" => Ok(PolicyKind::Lru),
            "fifo" => Ok(PolicyKind::Fifo),
            "2q" | "twoq" => Ok(PolicyKind::TwoQ),
            "lfru" => Ok(PolicyKind::Lfru),
            _ => Err(ParsePolicyError(s.to_string())),
        }
    }
}

/// Tunables for the parameterized policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Share of each set's ways reserved for the 2Q admission queue.
    pub twoq_a1in_percent: u32,
    /// LFRU frequency counters halve after this many accesses to a set.
    pub lfru_aging_interval: u64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams { twoq_a1in_percent: 25, lfru_aging_interval: 1024 }
    }
}

impl PolicyParams {
    pub fn a1in_quota(&self, ways: usize) -> usize {
        (ways * self.twoq_a1in_percent as usize / 100).max(1)
    }
}

/// 2Q queue membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Queue {
    #[default]
    A1in,
    Am,
}

/// Per-way bookkeeping used by the policies. Stamps come from a cache-wide
/// counter bumped on every access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PolicyMeta {
    pub inserted_at: u64,
    pub touched_at: u64,
    pub frequency: u32,
    pub queue: Queue,
}

pub(crate) fn on_insert(meta: &mut PolicyMeta, stamp: u64) {
    *meta = PolicyMeta { inserted_at: stamp, touched_at: stamp, frequency: 1, queue: Queue::A1in };
}

pub(crate) fn on_hit(meta: &mut PolicyMeta, stamp: u64) {
    meta.touched_at = stamp;
    meta.frequency = meta.frequency.saturating_add(1);
    // Re-reference while in the admission queue promotes to the main queue.
    meta.queue = Queue::Am;
}

/// Called after every access to a set; `accesses` is the set's running count.
pub(crate) fn on_set_access(set: &mut [CachePageMeta], policy: PolicyKind, params: &PolicyParams, accesses: u64) {
    if policy == PolicyKind::Lfru
        && params.lfru_aging_interval > 0
        && accesses.is_multiple_of(params.lfru_aging_interval)
    {
        for way in set.iter_mut().filter(|w| w.valid) {
            way.policy.frequency /= 2;
        }
    }
}

/// Choose the way to evict from a full set. Ways with an outstanding fill are
/// never chosen; returns `None` when every way is pending.
pub fn evict_victim(set: &[CachePageMeta], policy: PolicyKind, params: &PolicyParams) -> Option<usize> {
    let eligible = || set.iter().enumerate().filter(|(_, w)| w.valid && !w.pending);
    let oldest_inserted = |q: Option<Queue>| {
        eligible()
            .filter(|(_, w)| q.is_none_or(|q| w.policy.queue == q))
            .min_by_key(|(_, w)| w.policy.inserted_at)
            .map(|(i, _)| i)
    };
    let least_recent = |q: Option<Queue>| {
        eligible()
            .filter(|(_, w)| q.is_none_or(|q| w.policy.queue == q))
            .min_by_key(|(_, w)| w.policy.touched_at)
            .map(|(i, _)| i)
    };
    match policy {
        // One way per set: whatever occupies it goes.
        PolicyKind::Direct => eligible().next().map(|(i, _)| i),
        PolicyKind::Lru => least_recent(None),
        PolicyKind::Fifo => oldest_inserted(None),
        PolicyKind::TwoQ => {
            let a1in = set.iter().filter(|w| w.valid && w.policy.queue == Queue::A1in).count();
            if a1in > params.a1in_quota(set.len()) {
                oldest_inserted(Some(Queue::A1in)).or_else(|| least_recent(Some(Queue::Am)))
            } else {
                least_recent(Some(Queue::Am)).or_else(|| oldest_inserted(Some(Queue::A1in)))
            }
        }
        PolicyKind::Lfru => eligible().min_by_key(|(_, w)| (w.policy.frequency, w.policy.touched_at)).map(|(i, _)| i),
    }
}
