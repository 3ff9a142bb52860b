use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use super::{MutationBatch, Strategy};

/// Largest value added or subtracted by the arithmetic stages.
pub const ARITH_MAX: u32 = 35;

pub const INTERESTING_8: [i8; 9] = [-128, -1, 0, 1, 16, 32, 64, 100, 127];

pub const INTERESTING_16: [i16; 19] =
    [-128, -1, 0, 1, 16, 32, 64, 100, 127, -32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767];

pub const INTERESTING_32: [i32; 27] = [
    -128,
    -1,
    0,
    1,
    16,
    32,
    64,
    100,
    127,
    -32768,
    -129,
    128,
    255,
    256,
    512,
    1000,
    1024,
    4096,
    32767,
    -2147483648,
    -100663046,
    -32769,
    32768,
    65535,
    65536,
    100663045,
    2147483647,
];

const STAGES: [Strategy; 12] = [
    Strategy::Flip1,
    Strategy::Flip2,
    Strategy::Flip4,
    Strategy::Flip8,
    Strategy::Flip16,
    Strategy::Flip32,
    Strategy::Arith8,
    Strategy::Arith16,
    Strategy::Arith32,
    Strategy::Interest8,
    Strategy::Interest16,
    Strategy::Interest32,
];

/// Mutants per batch yielded by [`deterministic_stages`].
pub const MAX_BATCH: usize = 4096;

/// The twelve deterministic stages in order, generated lazily. A stage may be
/// split over several consecutive batches of at most [`MAX_BATCH`] mutants.
/// Mutants equal to the input and repeats within a stage are dropped.
pub fn deterministic_stages(input: &[u8]) -> DeterministicStages<'_> {
    DeterministicStages { input, stage: 0, pos: 0, seen: HashSet::new() }
}

pub struct DeterministicStages<'a> {
    input: &'a [u8],
    stage: usize,
    pos: usize,
    seen: HashSet<u64>,
}

fn digest(m: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    m.hash(&mut h);
    h.finish()
}

/// Number of positions a stage iterates over.
fn positions(s: Strategy, n: usize) -> usize {
    match s {
        Strategy::Flip1 => n * 8,
        Strategy::Flip2 => (n * 8).saturating_sub(1),
        Strategy::Flip4 => (n * 8).saturating_sub(3),
        Strategy::Flip8 | Strategy::Arith8 | Strategy::Interest8 => n,
        Strategy::Flip16 | Strategy::Arith16 | Strategy::Interest16 => n.saturating_sub(1),
        _ => n.saturating_sub(3),
    }
}

impl Iterator for DeterministicStages<'_> {
    type Item = MutationBatch;

    fn next(&mut self) -> Option<MutationBatch> {
        while self.stage < STAGES.len() {
            let s = STAGES[self.stage];
            let total = positions(s, self.input.len());
            let mut out = Vec::new();
            // One position yields at most 4 * ARITH_MAX mutants.
            while self.pos < total && out.len() + 4 * ARITH_MAX as usize <= MAX_BATCH {
                let input = self.input;
                let seen = &mut self.seen;
                at(input, s, self.pos, &mut |m: Vec<u8>| {
                    if m != input && seen.insert(digest(&m)) {
                        out.push(m);
                    }
                });
                self.pos += 1;
            }
            if self.pos >= total {
                self.stage += 1;
                self.pos = 0;
                self.seen.clear();
            }
            if !out.is_empty() {
                return Some(MutationBatch::new(s, out));
            }
        }
        None
    }
}

/// Mutants of stage `s` at bit or byte position `p`.
fn at(input: &[u8], s: Strategy, p: usize, push: &mut impl FnMut(Vec<u8>)) {
    let window = |bytes: &[u8]| {
        let mut m = input.to_vec();
        m[p..p + bytes.len()].copy_from_slice(bytes);
        m
    };
    match s {
        Strategy::Flip1 | Strategy::Flip2 | Strategy::Flip4 => {
            let w = match s {
                Strategy::Flip1 => 1,
                Strategy::Flip2 => 2,
                _ => 4,
            };
            let mut m = input.to_vec();
            for k in p..p + w {
                m[k / 8] ^= 0x80 >> (k % 8);
            }
            push(m);
        }
        Strategy::Flip8 | Strategy::Flip16 | Strategy::Flip32 => {
            let w = match s {
                Strategy::Flip8 => 1,
                Strategy::Flip16 => 2,
                _ => 4,
            };
            let mut m = input.to_vec();
            m[p..p + w].iter_mut().for_each(|b| *b ^= 0xff);
            push(m);
        }
        Strategy::Arith8 => {
            for d in 1..=ARITH_MAX as u8 {
                push(window(&[input[p].wrapping_add(d)]));
                push(window(&[input[p].wrapping_sub(d)]));
            }
        }
        Strategy::Arith16 => {
            let w = [input[p], input[p + 1]];
            let (le, be) = (u16::from_le_bytes(w), u16::from_be_bytes(w));
            for d in 1..=ARITH_MAX as u16 {
                push(window(&le.wrapping_add(d).to_le_bytes()));
                push(window(&le.wrapping_sub(d).to_le_bytes()));
                push(window(&be.wrapping_add(d).to_be_bytes()));
                push(window(&be.wrapping_sub(d).to_be_bytes()));
            }
        }
        Strategy::Arith32 => {
            let w = [input[p], input[p + 1], input[p + 2], input[p + 3]];
            let (le, be) = (u32::from_le_bytes(w), u32::from_be_bytes(w));
            for d in 1..=ARITH_MAX {
                push(window(&le.wrapping_add(d).to_le_bytes()));
                push(window(&le.wrapping_sub(d).to_le_bytes()));
                push(window(&be.wrapping_add(d).to_be_bytes()));
                push(window(&be.wrapping_sub(d).to_be_bytes()));
            }
        }
        Strategy::Interest8 => {
            for v in INTERESTING_8 {
                push(window(&[v as u8]));
            }
        }
        Strategy::Interest16 => {
            for v in INTERESTING_16 {
                push(window(&v.to_le_bytes()));
                push(window(&v.to_be_bytes()));
            }
        }
        Strategy::Interest32 => {
            for v in INTERESTING_32 {
                push(window(&v.to_le_bytes()));
                push(window(&v.to_be_bytes()));
            }
        }
        _ => unreachable!("not a deterministic stage"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(input: &[u8], s: Strategy) -> Vec<Vec<u8>> {
        deterministic_stages(input).filter(|b| b.strategy == s).flat_map(|b| b.mutants).collect()
    }

    #[test]
    fn large_inputs_are_chunked() {
        let input = vec![b'a'; 1000];
        let batches: Vec<_> = deterministic_stages(&input).take_while(|b| b.strategy == Strategy::Flip1).collect();
        assert!(batches.iter().all(|b| b.len() <= MAX_BATCH));
        let flip1: usize = batches.iter().filter(|b| b.strategy == Strategy::Flip1).map(|b| b.len()).sum();
        assert_eq!(flip1, 8000);
    }

    #[test]
    fn stage_order() {
        let mut order: Vec<_> = deterministic_stages(b"abcd").map(|b| b.strategy).collect();
        order.dedup();
        assert_eq!(order, STAGES);
    }

    #[test]
    fn flip1_single_byte() {
        let m = batch(&[0], Strategy::Flip1);
        let want: Vec<Vec<u8>> = (0..8).map(|k| vec![0x80u8 >> k]).collect();
        assert_eq!(m.len(), 8);
        let mut got = m.clone();
        got.sort();
        let mut want = want;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn window_larger_than_input() {
        assert!(batch(b"abc", Strategy::Flip32).is_empty());
        assert!(batch(b"abc", Strategy::Arith32).is_empty());
        assert!(batch(b"a", Strategy::Interest16).is_empty());
    }

    #[test]
    fn arith8_is_bounded() {
        for b in [0u8, 17, 200, 255] {
            let m = batch(&[b], Strategy::Arith8);
            // Oracle: every byte within 35 of b, modulo 256, except b itself.
            let mut want: Vec<u8> = (1..=35u8).flat_map(|d| [b.wrapping_add(d), b.wrapping_sub(d)]).collect();
            want.sort();
            want.dedup();
            let mut got: Vec<u8> = m.iter().map(|v| v[0]).collect();
            got.sort();
            assert_eq!(got, want);
            assert!(m.len() <= 70);
        }
    }

    #[test]
    fn no_mutant_equals_input() {
        let input = b"\x00\x01\xff\x7f\x80";
        for b in deterministic_stages(input) {
            assert!(b.mutants.iter().all(|m| m != input && m.len() == input.len()));
            assert_eq!(b.generated_count, b.mutants.len());
        }
    }

    #[test]
    fn interest8_counts() {
        // 0 is already an interesting value, so it is skipped as a no-op.
        assert_eq!(batch(&[0], Strategy::Interest8).len(), 8);
        assert_eq!(batch(b"a", Strategy::Interest8).len(), 9);
    }
}
