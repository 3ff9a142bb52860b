use rand::Rng;

use super::deterministic::{ARITH_MAX, INTERESTING_16, INTERESTING_32, INTERESTING_8};
use super::{MutationBatch, Strategy};

/// Havoc never grows an input past this many bytes.
pub const MAX_INPUT_LEN: usize = 1 << 16;

const BLOCK_LIMITS: [usize; 3] = [32, 128, 1500];

fn block_len<R: Rng + ?Sized>(rng: &mut R, limit: usize) -> usize {
    let cap = BLOCK_LIMITS[rng.gen_range(0..BLOCK_LIMITS.len())].min(limit);
    rng.gen_range(1..=cap.max(1))
}

fn put(buf: &mut [u8], at: usize, bytes: &[u8]) {
    buf[at..at + bytes.len()].copy_from_slice(bytes);
}

/// Apply one randomly chosen elementary mutation in place. `buf` must be
/// nonempty and stays nonempty.
fn mutate_once<R: Rng + ?Sized>(buf: &mut Vec<u8>, rng: &mut R) {
    let n = buf.len();
    match rng.gen_range(0..14) {
        0 => {
            let bit = rng.gen_range(0..n * 8);
            buf[bit / 8] ^= 0x80 >> (bit % 8);
        }
        1 => {
            let at = rng.gen_range(0..n);
            buf[at] ^= 0xff;
        }
        2 => {
            let at = rng.gen_range(0..n);
            buf[at] = INTERESTING_8[rng.gen_range(0..INTERESTING_8.len())] as u8;
        }
        3 if n >= 2 => {
            let at = rng.gen_range(0..n - 1);
            let v = INTERESTING_16[rng.gen_range(0..INTERESTING_16.len())];
            put(buf, at, &if rng.gen() { v.to_le_bytes() } else { v.to_be_bytes() });
        }
        4 if n >= 4 => {
            let at = rng.gen_range(0..n - 3);
            let v = INTERESTING_32[rng.gen_range(0..INTERESTING_32.len())];
            put(buf, at, &if rng.gen() { v.to_le_bytes() } else { v.to_be_bytes() });
        }
        5 | 6 => {
            let at = rng.gen_range(0..n);
            let d = rng.gen_range(1..=ARITH_MAX as u8);
            buf[at] = if rng.gen() { buf[at].wrapping_add(d) } else { buf[at].wrapping_sub(d) };
        }
        7 if n >= 2 => {
            let at = rng.gen_range(0..n - 1);
            let d = rng.gen_range(1..=ARITH_MAX as u16);
            let w = [buf[at], buf[at + 1]];
            let add: bool = rng.gen();
            let bytes = if rng.gen() {
                let v = u16::from_le_bytes(w);
                (if add { v.wrapping_add(d) } else { v.wrapping_sub(d) }).to_le_bytes()
            } else {
                let v = u16::from_be_bytes(w);
                (if add { v.wrapping_add(d) } else { v.wrapping_sub(d) }).to_be_bytes()
            };
            put(buf, at, &bytes);
        }
        8 if n >= 4 => {
            let at = rng.gen_range(0..n - 3);
            let d = rng.gen_range(1..=ARITH_MAX);
            let w = [buf[at], buf[at + 1], buf[at + 2], buf[at + 3]];
            let add: bool = rng.gen();
            let bytes = if rng.gen() {
                let v = u32::from_le_bytes(w);
                (if add { v.wrapping_add(d) } else { v.wrapping_sub(d) }).to_le_bytes()
            } else {
                let v = u32::from_be_bytes(w);
                (if add { v.wrapping_add(d) } else { v.wrapping_sub(d) }).to_be_bytes()
            };
            put(buf, at, &bytes);
        }
        9 => {
            let at = rng.gen_range(0..n);
            buf[at] ^= rng.gen_range(1..=255u8);
        }
        10 | 11 if n >= 2 => {
            // Block delete, keeping at least one byte.
            let len = block_len(rng, n - 1);
            let at = rng.gen_range(0..=n - len);
            buf.drain(at..at + len);
        }
        12 if n < MAX_INPUT_LEN => {
            // Block duplicate, or a constant block a quarter of the time.
            let len = block_len(rng, n.min(MAX_INPUT_LEN - n));
            let to = rng.gen_range(0..=n);
            let block = if rng.gen_range(0..4) == 0 {
                let byte = if rng.gen() { rng.gen() } else { buf[rng.gen_range(0..n)] };
                vec![byte; len]
            } else {
                let from = rng.gen_range(0..=n - len);
                buf[from..from + len].to_vec()
            };
            buf.splice(to..to, block);
        }
        13 if n >= 2 => {
            // Block overwrite from elsewhere in the input, or a constant.
            let len = block_len(rng, n - 1);
            let from = rng.gen_range(0..=n - len);
            let to = rng.gen_range(0..=n - len);
            if rng.gen_range(0..4) == 0 {
                let byte = if rng.gen() { rng.gen() } else { buf[rng.gen_range(0..n)] };
                buf[to..to + len].fill(byte);
            } else if from != to {
                buf.copy_within(from..from + len, to);
            }
        }
        _ => {
            let at = rng.gen_range(0..n);
            buf[at] = rng.gen();
        }
    }
}

/// One havoc mutant: a stack of 2^k elementary mutations, k in [1,6].
pub fn havoc_one<R: Rng + ?Sized>(input: &[u8], rng: &mut R) -> Vec<u8> {
    assert!(!input.is_empty(), "havoc needs a nonempty input");
    let mut buf = input.to_vec();
    let stack = 1usize << rng.gen_range(1..=6);
    for _ in 0..stack {
        mutate_once(&mut buf, rng);
    }
    buf
}

pub fn havoc<R: Rng + ?Sized>(input: &[u8], rng: &mut R, count: usize) -> MutationBatch {
    let mutants = (0..count).map(|_| havoc_one(input, rng)).collect();
    MutationBatch::new(Strategy::Havoc, mutants)
}

/// Prefix of `a` and suffix of `b`, split inside the region where they
/// differ. `None` when either is shorter than two bytes or they agree on
/// every byte of their common length.
pub fn splice_inputs<R: Rng + ?Sized>(a: &[u8], b: &[u8], rng: &mut R) -> Option<Vec<u8>> {
    if a.len() < 2 || b.len() < 2 || a == b {
        return None;
    }
    let common = a.len().min(b.len());
    let first = (0..common).find(|&i| a[i] != b[i])?;
    let last = (0..common).rev().find(|&i| a[i] != b[i])?;
    let split = rng.gen_range(first..=last);
    let mut out = Vec::with_capacity(split + b.len() - split);
    out.extend_from_slice(&a[..split]);
    out.extend_from_slice(&b[split..]);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutate::random_source;

    #[test]
    fn count_and_determinism() {
        let mut r = random_source(42);
        assert!(havoc(b"abc", &mut r, 0).is_empty());
        let a = havoc(b"var x = 1;", &mut random_source(42), 50);
        let b = havoc(b"var x = 1;", &mut random_source(42), 50);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn never_empty() {
        let mut r = random_source(7);
        for i in 0..10_000 {
            let input = vec![b'x'; 1 + i % 5];
            assert!(!havoc_one(&input, &mut r).is_empty());
        }
    }

    #[test]
    fn splice_cases() {
        let mut r = random_source(1);
        assert_eq!(splice_inputs(b"aaaa", b"aaaa", &mut r), None);
        assert_eq!(splice_inputs(b"a", b"ab", &mut r), None);
        // One is a prefix of the other: nothing differs in the shared part.
        assert_eq!(splice_inputs(b"ab", b"abc", &mut r), None);
        for _ in 0..50 {
            let out = splice_inputs(b"abcdef", b"abXdYf", &mut r).unwrap();
            let allowed: Vec<Vec<u8>> = (2..=4).map(|s| [&b"abcdef"[..s], &b"abXdYf"[s..]].concat()).collect();
            assert!(allowed.contains(&out));
            assert!(out.len() <= 12);
        }
    }
}
