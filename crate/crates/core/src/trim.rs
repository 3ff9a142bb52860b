//! Coverage-preserving input reduction: chunked byte trimming and
//! grammar-aware subtree trimming.
//!
//! Both trimmers take an oracle that executes a candidate and returns its
//! coverage signature. A removal is kept only when the signature matches the
//! original input's.

use std::fmt;

use crate::coverage::Signature;
use crate::grammar::{enumerate_subtrees, excise, parse, GrammarSpec, Span};

/// Chunk divisors tried by [`builtin_trim`], in order.
pub const TRIM_DIVISORS: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];
/// Chunks shorter than this are never attempted.
pub const MIN_CHUNK: usize = 4;

/// Chunk size used by the pass with divisor `n` on an input of `len` bytes,
/// or `None` if the pass is skipped.
pub fn chunk_size(len: usize, n: usize) -> Option<usize> {
    let c = len / n;
    (c >= MIN_CHUNK).then_some(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrimMode {
    Tree,
    Builtin,
    BuiltinFallback,
}

impl TrimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrimMode::Tree => "tree",
            TrimMode::Builtin => "builtin",
            TrimMode::BuiltinFallback => "builtin_fallback",
        }
    }
}

impl fmt::Display for TrimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted removal: the span removed from the input as it was at that
/// moment, and the candidate's signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimStep {
    pub removed: Span,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimOutcome {
    pub trimmed: Vec<u8>,
    pub bytes_removed: usize,
    /// Candidate executions; the baseline run is not counted.
    pub executions_used: usize,
    pub mode: TrimMode,
    pub still_parses: bool,
    pub steps: Vec<TrimStep>,
}

/// An oracle error stopped trimming; `partial` is what was kept so far.
#[derive(Debug)]
pub struct TrimAborted<E> {
    pub partial: TrimOutcome,
    pub error: E,
}

impl<E: fmt::Display> fmt::Display for TrimAborted<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trimming aborted after {} executions: {}", self.partial.executions_used, self.error)
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for TrimAborted<E> {}

fn outcome(original: &[u8], trimmed: Vec<u8>, executions_used: usize, mode: TrimMode, steps: Vec<TrimStep>) -> TrimOutcome {
    TrimOutcome {
        bytes_removed: original.len() - trimmed.len(),
        trimmed,
        executions_used,
        mode,
        still_parses: mode == TrimMode::Tree,
        steps,
    }
}

/// Chunked trimming against a precomputed baseline signature.
pub fn builtin_trim_from<E>(
    input: &[u8],
    baseline: Signature,
    oracle: &mut impl FnMut(&[u8]) -> Result<Signature, E>,
) -> Result<TrimOutcome, TrimAborted<E>> {
    let mut cur = input.to_vec();
    let mut execs = 0;
    let mut steps = Vec::new();
    for n in TRIM_DIVISORS {
        let Some(chunk) = chunk_size(cur.len(), n) else { continue };
        let mut pos = 0;
        while pos + chunk <= cur.len() {
            let mut cand = Vec::with_capacity(cur.len() - chunk);
            cand.extend_from_slice(&cur[..pos]);
            cand.extend_from_slice(&cur[pos + chunk..]);
            execs += 1;
            match oracle(&cand) {
                Ok(sig) if sig == baseline => {
                    steps.push(TrimStep { removed: Span::new(pos, pos + chunk), signature: sig });
                    cur = cand;
                }
                Ok(_) => pos += chunk,
                Err(error) => {
                    // The original is returned untouched.
                    let partial = outcome(input, input.to_vec(), execs, TrimMode::Builtin, Vec::new());
                    return Err(TrimAborted { partial, error });
                }
            }
        }
    }
    Ok(outcome(input, cur, execs, TrimMode::Builtin, steps))
}

/// Chunked trimming: for each divisor n, try removing every `len/n`-byte
/// chunk in turn.
pub fn builtin_trim<E>(
    input: &[u8],
    oracle: &mut impl FnMut(&[u8]) -> Result<Signature, E>,
) -> Result<TrimOutcome, TrimAborted<E>> {
    let baseline = match oracle(input) {
        Ok(s) => s,
        Err(error) => {
            let partial = outcome(input, input.to_vec(), 0, TrimMode::Builtin, Vec::new());
            return Err(TrimAborted { partial, error });
        }
    };
    builtin_trim_from(input, baseline, oracle)
}

/// Subtree trimming against a precomputed baseline signature.
///
/// Subtrees are tried in pre-order sorted by depth, larger spans first.
/// Candidates that no longer parse are skipped without execution, so every
/// accepted step keeps the input inside the grammar's language. After each
/// acceptance the remainder is re-parsed and the scan restarts.
pub fn tree_trim_from<E>(
    input: &[u8],
    baseline: Signature,
    g: &GrammarSpec,
    oracle: &mut impl FnMut(&[u8]) -> Result<Signature, E>,
) -> Result<TrimOutcome, TrimAborted<E>> {
    let Ok(mut tree) = parse(g, input) else {
        return builtin_trim_from(input, baseline, oracle).map_err(|mut a| {
            a.partial.mode = TrimMode::BuiltinFallback;
            a.partial.still_parses = false;
            a
        }).map(|mut o| {
            o.mode = TrimMode::BuiltinFallback;
            o.still_parses = parse(g, &o.trimmed).is_ok();
            o
        });
    };
    let mut cur = input.to_vec();
    let mut execs = 0;
    let mut steps = Vec::new();
    'outer: loop {
        let mut subs = enumerate_subtrees(&tree, None);
        subs.sort_by_key(|s| (s.depth(), std::cmp::Reverse(s.size_bytes)));
        for s in subs {
            let cand = excise(&cur, s.span).expect("subtree span lies within its source");
            if cand.is_empty() {
                continue;
            }
            let Ok(next) = parse(g, &cand) else { continue };
            execs += 1;
            match oracle(&cand) {
                Ok(sig) if sig == baseline => {
                    steps.push(TrimStep { removed: s.span, signature: sig });
                    cur = cand;
                    tree = next;
                    continue 'outer;
                }
                Ok(_) => {}
                Err(error) => {
                    let partial = outcome(input, cur, execs, TrimMode::Tree, steps);
                    return Err(TrimAborted { partial, error });
                }
            }
        }
        break;
    }
    Ok(outcome(input, cur, execs, TrimMode::Tree, steps))
}

/// Grammar-aware trimming, falling back to [`builtin_trim`] when the input
/// does not parse.
pub fn tree_trim<E>(
    input: &[u8],
    g: &GrammarSpec,
    oracle: &mut impl FnMut(&[u8]) -> Result<Signature, E>,
) -> Result<TrimOutcome, TrimAborted<E>> {
    let baseline = match oracle(input) {
        Ok(s) => s,
        Err(error) => {
            let mode = if parse(g, input).is_ok() { TrimMode::Tree } else { TrimMode::BuiltinFallback };
            let partial = outcome(input, input.to_vec(), 0, mode, Vec::new());
            return Err(TrimAborted { partial, error });
        }
    };
    tree_trim_from(input, baseline, g, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;
    use std::convert::Infallible;

    fn sig(v: u64) -> Signature {
        Signature(v)
    }

    #[test]
    fn schedule() {
        assert_eq!(chunk_size(64, 16), Some(4));
        assert_eq!(chunk_size(63, 16), None);
        assert_eq!(chunk_size(4096, 1024), Some(4));
    }

    #[test]
    fn nothing_removable() {
        let input = vec![7u8; 100];
        let mut calls = 0;
        let out = builtin_trim(&input, &mut |c: &[u8]| {
            calls += 1;
            Ok::<_, Infallible>(sig(c.len() as u64))
        })
        .unwrap();
        assert_eq!(out.trimmed, input);
        assert_eq!(out.bytes_removed, 0);
        // 100/16 = 6 -> 16 chunks, 100/32 = 3 skipped.
        assert_eq!(out.executions_used, 16);
        assert_eq!(calls, 17);
    }

    #[test]
    fn keeps_marked_bytes() {
        let mut input = vec![b'.'; 256];
        input[100] = b'X';
        let mut oracle = |c: &[u8]| Ok::<_, Infallible>(sig(c.contains(&b'X') as u64));
        let out = builtin_trim(&input, &mut oracle).unwrap();
        assert!(out.trimmed.contains(&b'X'));
        assert!(out.trimmed.len() <= 32, "{}", out.trimmed.len());
        assert!(out.steps.iter().all(|s| s.signature == sig(1)));
    }

    #[test]
    fn oracle_error_returns_original() {
        let input = vec![1u8; 128];
        let mut n = 0;
        let err = builtin_trim(&input, &mut |_c: &[u8]| {
            n += 1;
            if n > 3 { Err("boom") } else { Ok(sig(0)) }
        })
        .unwrap_err();
        assert_eq!(err.partial.trimmed, input);
        assert_eq!(err.error, "boom");
    }

    #[test]
    fn tree_trim_removes_irrelevant_items() {
        let g = load_grammar(b"list := list item | item ; item := A | B ; A := /a/ ; B := /b/ ; WS skip / +/ ;").unwrap();
        let mut oracle = |c: &[u8]| Ok::<_, Infallible>(sig(c.contains(&b'b') as u64));
        let out = tree_trim(b"a a b a", &g, &mut oracle).unwrap();
        assert_eq!(out.mode, TrimMode::Tree);
        assert!(out.still_parses);
        assert_eq!(out.trimmed, b" b ");
        let fallback = tree_trim(b"a c", &g, &mut |_c: &[u8]| Ok::<_, Infallible>(sig(0))).unwrap();
        assert_eq!(fallback.mode, TrimMode::BuiltinFallback);
    }
}
