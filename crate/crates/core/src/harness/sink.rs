use std::fmt;
use std::time::Instant;

use crate::coverage::{edge_index, CoverageMap};

/// Instrumentation point id, derived from a label at compile time.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

impl BlockId {
    pub const fn new(label: &str) -> Self {
        BlockId(block_id(label))
    }
}

impl fmt::Debug for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockId({:08x})", self.0)
    }
}

/// 32-bit FNV-1a of the label.
pub const fn block_id(label: &str) -> u32 {
    let b = label.as_bytes();
    let mut h: u32 = 0x811c_9dc5;
    let mut i = 0;
    while i < b.len() {
        h ^= b[i] as u32;
        h = h.wrapping_mul(0x0100_0193);
        i += 1;
    }
    h
}

/// Processing stage a block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Parse,
    Check,
    Eval,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Check => "check",
            Stage::Eval => "eval",
        }
    }

    pub fn from_name(s: &str) -> Option<Stage> {
        match s {
            "parse" => Some(Stage::Parse),
            "check" => Some(Stage::Check),
            "eval" => Some(Stage::Eval),
            _ => None,
        }
    }
}

/// Panic payload used to abandon an execution past its deadline.
#[derive(Debug)]
pub struct Timeout;

const DEADLINE_EVERY: u64 = 1024;

/// Receives block hits from an in-process target.
pub struct CoverageSink {
    map: CoverageMap,
    prev: u32,
    trace: Option<Vec<BlockId>>,
    hits: u64,
    deadline: Option<Instant>,
}

impl CoverageSink {
    pub fn new(deadline: Option<Instant>) -> Self {
        CoverageSink { map: CoverageMap::new(), prev: 0, trace: None, hits: 0, deadline }
    }

    /// A sink that also records every block visited, in order.
    pub fn tracing() -> Self {
        CoverageSink { trace: Some(Vec::new()), ..Self::new(None) }
    }

    pub fn hit(&mut self, b: BlockId) {
        self.map.hit(edge_index(self.prev, b.0));
        self.prev = b.0;
        if let Some(t) = &mut self.trace {
            t.push(b);
        }
        self.hits += 1;
        if self.hits.is_multiple_of(DEADLINE_EVERY) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    std::panic::panic_any(Timeout);
                }
            }
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn map(&self) -> &CoverageMap {
        &self.map
    }

    pub fn into_map(self) -> CoverageMap {
        self.map
    }

    pub fn take_trace(&mut self) -> Vec<BlockId> {
        self.trace.take().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ids_are_fnv() {
        assert_eq!(block_id(""), 0x811c9dc5);
        assert_eq!(block_id("a"), 0xe40c292c);
    }

    #[test]
    fn edges_follow_transitions() {
        let a = BlockId(2);
        let b = BlockId(5);
        let mut s = CoverageSink::tracing();
        s.hit(a);
        s.hit(b);
        assert_eq!(s.map().get(2), 1);
        assert_eq!(s.map().get(4), 1);
        assert_eq!(s.take_trace(), vec![a, b]);
    }
}
