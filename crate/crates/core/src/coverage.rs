//! Edge-coverage maps, hit-count buckets and novelty tracking.

use std::fmt;

use thiserror::Error;

pub const MAP_SIZE: usize = 1 << 16;

/// Map slot for the transition `prev -> cur` between two block ids.
pub fn edge_index(prev: u32, cur: u32) -> usize {
    ((cur ^ (prev >> 1)) as usize) % MAP_SIZE
}

/// Hit-count class: 0 for no hits, then 1, 2, 3, 4-7, 8-15, 16-31,
/// 32-127 and 128-255 as classes 1 through 8.
pub fn bucket_class(count: u8) -> u8 {
    match count {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 3,
        4..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=127 => 7,
        128..=255 => 8,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("coverage map must be {MAP_SIZE} bytes, got {0}")]
pub struct MapSizeError(pub usize);

/// Saturating 8-bit hit counters, one per edge slot.
#[derive(Clone, PartialEq, Eq)]
pub struct CoverageMap {
    counts: Vec<u8>,
}

impl Default for CoverageMap {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for CoverageMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoverageMap({} edges, sig {})", self.edge_count(), signature(self))
    }
}

impl CoverageMap {
    pub fn new() -> Self {
        CoverageMap { counts: vec![0; MAP_SIZE] }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MapSizeError> {
        if bytes.len() != MAP_SIZE {
            return Err(MapSizeError(bytes.len()));
        }
        Ok(CoverageMap { counts: bytes.to_vec() })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.counts
    }

    pub fn hit(&mut self, index: usize) {
        let c = &mut self.counts[index % MAP_SIZE];
        *c = c.saturating_add(1);
    }

    pub fn get(&self, index: usize) -> u8 {
        self.counts[index]
    }

    pub fn set(&mut self, index: usize, count: u8) {
        self.counts[index] = count;
    }

    pub fn clear(&mut self) {
        self.counts.fill(0);
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|c| *c == 0)
    }

    pub fn edge_count(&self) -> usize {
        self.counts.iter().filter(|c| **c != 0).count()
    }

    /// Indices of all hit edges, ascending.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().enumerate().filter(|(_, c)| **c != 0).map(|(i, _)| i)
    }
}

/// What an execution contributed relative to everything seen before.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Novelty {
    None,
    NewBucket,
    NewEdge,
}

impl Novelty {
    pub fn is_interesting(self) -> bool {
        self != Novelty::None
    }
}

/// Per edge, the set of hit-count classes observed so far (bit `c - 1` for
/// class `c`).
#[derive(Clone, PartialEq, Eq)]
pub struct VirginMap {
    seen: Vec<u8>,
}

impl Default for VirginMap {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for VirginMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VirginMap({} edges seen)", self.edges_seen())
    }
}

impl VirginMap {
    pub fn new() -> Self {
        VirginMap { seen: vec![0; MAP_SIZE] }
    }

    pub fn classify(&self, map: &CoverageMap) -> Novelty {
        let mut out = Novelty::None;
        for (seen, &c) in self.seen.iter().zip(map.counts.iter()) {
            if c == 0 {
                continue;
            }
            let bit = 1u8 << (bucket_class(c) - 1);
            if *seen == 0 {
                return Novelty::NewEdge;
            }
            if seen & bit == 0 {
                out = Novelty::NewBucket;
            }
        }
        out
    }

    /// Classify, then fold the map's classes into the seen set.
    pub fn update(&mut self, map: &CoverageMap) -> Novelty {
        let novelty = self.classify(map);
        if novelty.is_interesting() {
            for (seen, &c) in self.seen.iter_mut().zip(map.counts.iter()) {
                if c != 0 {
                    *seen |= 1 << (bucket_class(c) - 1);
                }
            }
        }
        novelty
    }

    pub fn edges_seen(&self) -> usize {
        self.seen.iter().filter(|s| **s != 0).count()
    }

    /// Raw class bitmask for one edge.
    pub fn classes_at(&self, index: usize) -> u8 {
        self.seen[index]
    }
}

/// Bucketed coverage digest: two executions share a signature exactly when
/// they hit the same edges with the same hit-count classes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(pub u64);

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({self})")
    }
}

pub(crate) const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub(crate) const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over `(index as u16 LE, class)` for every hit edge in index order.
pub fn signature(map: &CoverageMap) -> Signature {
    let mut h = FNV_OFFSET;
    for (i, &c) in map.counts.iter().enumerate() {
        if c != 0 {
            let idx = (i as u16).to_le_bytes();
            h = fnv1a(h, &[idx[0], idx[1], bucket_class(c)]);
        }
    }
    Signature(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_edges() {
        let expect = [(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (7, 4), (8, 5), (15, 5), (16, 6), (31, 6), (32, 7), (127, 7), (128, 8), (255, 8)];
        for (c, k) in expect {
            assert_eq!(bucket_class(c), k, "count {c}");
        }
    }

    #[test]
    fn edge_index_mixes_and_wraps() {
        assert_eq!(edge_index(0, 5), 5);
        assert_eq!(edge_index(4, 5), 7);
        assert_eq!(edge_index(0, 0x1_0003), 3);
    }

    #[test]
    fn counters_saturate() {
        let mut m = CoverageMap::new();
        for _ in 0..300 {
            m.hit(9);
        }
        assert_eq!(m.get(9), 255);
    }

    #[test]
    fn novelty_sequence() {
        let mut v = VirginMap::new();
        let mut m = CoverageMap::new();
        assert_eq!(v.update(&m), Novelty::None);
        m.hit(10);
        assert_eq!(v.update(&m), Novelty::NewEdge);
        assert_eq!(v.update(&m), Novelty::None);
        m.hit(10);
        assert_eq!(v.update(&m), Novelty::NewBucket);
        m.hit(10);
        m.hit(11);
        assert_eq!(v.update(&m), Novelty::NewEdge);
        // 1 hit again on edge 10: class already seen.
        let mut once = CoverageMap::new();
        once.hit(10);
        assert_eq!(v.classify(&once), Novelty::None);
    }

    #[test]
    fn signature_ignores_within_bucket_changes() {
        let mut a = CoverageMap::new();
        let mut b = CoverageMap::new();
        a.set(3, 4);
        b.set(3, 7);
        assert_eq!(signature(&a), signature(&b));
        b.set(3, 8);
        assert_ne!(signature(&a), signature(&b));
    }

    #[test]
    fn empty_signature_is_fnv_offset() {
        assert_eq!(signature(&CoverageMap::new()), Signature(0xcbf29ce484222325));
    }

    #[test]
    fn from_bytes_checks_length() {
        assert_eq!(CoverageMap::from_bytes(&[0; 10]), Err(MapSizeError(10)));
        assert!(CoverageMap::from_bytes(&vec![0; MAP_SIZE]).is_ok());
    }
}
