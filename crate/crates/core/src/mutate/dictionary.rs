use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MutationBatch, Strategy};
use crate::grammar::GrammarSpec;

/// Longest dictionary entry accepted.
pub const MAX_TOKEN_LEN: usize = 128;
/// Number of frequent corpus runs added by [`extract_auto_tokens`].
pub const AUTO_RUNS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    User,
    Auto,
}

/// How dictionary tokens are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictMode {
    /// Only at alphanumeric run boundaries.
    Enhanced,
    /// At every byte position.
    Naive,
    Off,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    entries: Vec<(Vec<u8>, Origin)>,
    index: HashSet<Vec<u8>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a token. Empty, oversized and duplicate tokens are ignored and
    /// reported as `false`.
    pub fn add(&mut self, token: &[u8], origin: Origin) -> bool {
        if token.is_empty() || token.len() > MAX_TOKEN_LEN || self.index.contains(token) {
            return false;
        }
        self.index.insert(token.to_vec());
        self.entries.push((token.to_vec(), origin));
        true
    }

    pub fn merge(&mut self, other: &Dictionary) {
        for (t, o) in &other.entries {
            self.add(t, *o);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &[u8]) -> bool {
        self.index.contains(token)
    }

    pub fn entries(&self) -> &[(Vec<u8>, Origin)] {
        &self.entries
    }

    pub fn tokens(&self, origin: Origin) -> impl Iterator<Item = &[u8]> {
        self.entries.iter().filter(move |(_, o)| *o == origin).map(|(t, _)| t.as_slice())
    }

    /// Render in the dictionary file format.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for (i, (t, o)) in self.entries.iter().enumerate() {
            let prefix = match o {
                Origin::User => "user",
                Origin::Auto => "auto",
            };
            let _ = writeln!(s, "{prefix}_{i}=\"{}\"", escape(t));
        }
        s
    }
}

fn escape(t: &[u8]) -> String {
    let mut s = String::new();
    for &b in t {
        match b {
            b'\\' => s.push_str("\\\\"),
            b'"' => s.push_str("\\\""),
            0x20..=0x7e => s.push(b as char),
            _ => {
                let _ = write!(s, "\\x{b:02x}");
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dictionary line {line}: {message}")]
pub struct DictError {
    pub line: usize,
    pub message: String,
}

/// Parse a dictionary file: one `name="value"` (or bare `"value"`) per
/// line, `#` comments, escapes `\xNN`, `\\` and `\"`. A `name@N` level
/// suffix is accepted and ignored.
pub fn parse_dictionary(text: &str, origin: Origin) -> Result<Dictionary, DictError> {
    let mut d = Dictionary::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| DictError { line: n + 1, message: message.to_string() };
        let value = match line.find('"') {
            Some(0) => line,
            Some(q) => {
                let name = line[..q].trim_end();
                let Some(name) = name.strip_suffix('=') else { return Err(err("expected `=` before the value")) };
                let name = name.trim_end();
                let bare = name.split('@').next().unwrap_or("");
                if bare.is_empty() || !bare.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                    return Err(err("bad entry name"));
                }
                &line[q..]
            }
            None => return Err(err("expected a quoted value")),
        };
        let body = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .filter(|_| value.len() >= 2)
            .ok_or_else(|| err("unterminated value"))?;
        let mut bytes = Vec::new();
        let mut it = body.bytes();
        while let Some(b) = it.next() {
            match b {
                b'\\' => match it.next() {
                    Some(b'\\') => bytes.push(b'\\'),
                    Some(b'"') => bytes.push(b'"'),
                    Some(b'x') => {
                        let hi = it.next().and_then(|c| (c as char).to_digit(16));
                        let lo = it.next().and_then(|c| (c as char).to_digit(16));
                        match (hi, lo) {
                            (Some(h), Some(l)) => bytes.push((h * 16 + l) as u8),
                            _ => return Err(err("bad \\x escape")),
                        }
                    }
                    _ => return Err(err("unknown escape")),
                },
                b'"' => return Err(err("unescaped quote inside value")),
                0x20..=0x7e => bytes.push(b),
                _ => return Err(err("non-printable byte must be escaped")),
            }
        }
        if bytes.is_empty() {
            return Err(err("empty value"));
        }
        if bytes.len() > MAX_TOKEN_LEN {
            return Err(err("value longer than 128 bytes"));
        }
        d.add(&bytes, origin);
    }
    Ok(d)
}

/// A maximal run of ASCII alphanumeric bytes, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenRun {
    pub start: usize,
    pub end: usize,
}

pub fn locate_token_runs(input: &[u8]) -> Vec<TokenRun> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < input.len() {
        if input[i].is_ascii_alphanumeric() {
            let start = i;
            while i < input.len() && input[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(TokenRun { start, end: i });
        } else {
            i += 1;
        }
    }
    out
}

/// Scan positions `[i, j)` visited by the boundary scan: a whole run when
/// it is at least two bytes long, otherwise a single byte.
fn scan_segments(input: &[u8]) -> Vec<(usize, usize)> {
    let l = input.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < l {
        let mut j = i + 1;
        while j < l && input[j - 1].is_ascii_alphanumeric() && input[j].is_ascii_alphanumeric() {
            j += 1;
        }
        out.push((i, j));
        i = j;
    }
    out
}

fn with(input: &[u8], at: usize, end: usize, token: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(input.len() - (end - at) + token.len());
    m.extend_from_slice(&input[..at]);
    m.extend_from_slice(token);
    m.extend_from_slice(&input[end..]);
    m
}

fn batches(
    d: &Dictionary,
    mut per_origin: impl FnMut(&[&[u8]]) -> (Vec<Vec<u8>>, Vec<Vec<u8>>),
) -> Vec<MutationBatch> {
    let mut out = Vec::new();
    for (origin, ins, ovr) in [
        (Origin::User, Strategy::UserInsert, Strategy::UserOverwrite),
        (Origin::Auto, Strategy::AutoInsert, Strategy::AutoOverwrite),
    ] {
        let tokens: Vec<&[u8]> = d.tokens(origin).collect();
        if tokens.is_empty() {
            continue;
        }
        let (i, o) = per_origin(&tokens);
        out.push(MutationBatch::new(ins, i));
        out.push(MutationBatch::new(ovr, o));
    }
    out
}

/// Token-boundary dictionary mutation. At every scan position `i` (the start
/// of each alphanumeric run, or each other byte) every token is inserted at
/// `i` and written over `[i, j)`, where `j` is the end of the run. Each token
/// is also appended at the end of the input. Mutants are ordered by position,
/// then token. Returns insert and overwrite batches for user tokens, then for
/// auto tokens, skipping origins with no tokens.
pub fn dictionary_mutate(input: &[u8], d: &Dictionary) -> Vec<MutationBatch> {
    let segs = scan_segments(input);
    batches(d, |tokens| {
        let mut ins = Vec::new();
        let mut ovr = Vec::new();
        for &(i, j) in &segs {
            for t in tokens {
                ins.push(with(input, i, i, t));
                ovr.push(with(input, i, j, t));
            }
        }
        for t in tokens {
            ins.push(with(input, input.len(), input.len(), t));
        }
        (ins, ovr)
    })
}

/// Per-byte dictionary mutation: every token inserted at each of the
/// `len + 1` positions and written over the bytes starting at each of the
/// `len` positions (clipped at the end of the input).
pub fn naive_dictionary_mutate(input: &[u8], d: &Dictionary) -> Vec<MutationBatch> {
    let l = input.len();
    batches(d, |tokens| {
        let mut ins = Vec::new();
        let mut ovr = Vec::new();
        for i in 0..=l {
            for t in tokens {
                ins.push(with(input, i, i, t));
                if i < l {
                    ovr.push(with(input, i, (i + t.len()).min(l), t));
                }
            }
        }
        (ins, ovr)
    })
}

/// Grammar terminal literals plus the most frequent alphanumeric runs of
/// 2 to 32 bytes in the corpus, all tagged as automatic.
pub fn extract_auto_tokens(corpus: &[Vec<u8>], g: &GrammarSpec) -> Dictionary {
    let mut d = Dictionary::new();
    for lit in g.terminal_literals() {
        d.add(&lit, Origin::Auto);
    }
    let mut freq: HashMap<&[u8], usize> = HashMap::new();
    for input in corpus {
        for r in locate_token_runs(input) {
            let run = &input[r.start..r.end];
            if (2..=32).contains(&run.len()) {
                *freq.entry(run).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&[u8], usize)> = freq.into_iter().filter(|(t, _)| !d.contains(t)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    for (t, _) in ranked.into_iter().take(AUTO_RUNS) {
        d.add(t, Origin::Auto);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(tokens: &[&str]) -> Dictionary {
        let mut d = Dictionary::new();
        for t in tokens {
            d.add(t.as_bytes(), Origin::User);
        }
        d
    }

    #[test]
    fn runs() {
        let r = locate_token_runs(b"var x=01;");
        let spans: Vec<_> = r.iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(spans, [(0, 3), (4, 5), (6, 8)]);
        assert!(locate_token_runs(b"").is_empty());
        assert_eq!(locate_token_runs(b"a1 b"), [TokenRun { start: 0, end: 2 }, TokenRun { start: 3, end: 4 }]);
    }

    #[test]
    fn single_run() {
        let b = dictionary_mutate(b"abc", &user(&["X"]));
        assert_eq!(b[0].strategy, Strategy::UserInsert);
        assert_eq!(b[0].mutants, [b"Xabc".to_vec(), b"abcX".to_vec()]);
        assert_eq!(b[1].strategy, Strategy::UserOverwrite);
        assert_eq!(b[1].mutants, [b"X".to_vec()]);
    }

    #[test]
    fn no_insertion_inside_leading_zero_number() {
        let b = dictionary_mutate(b"var x=01;", &user(&["const", "+"]));
        assert!(b[0].mutants.iter().all(|m| m != b"var x=0const1;"));
        assert!(b[1].mutants.iter().all(|m| m != b"var x=0+;"));
        assert!(b[1].mutants.contains(&b"var x=+;".to_vec()));
        let naive = naive_dictionary_mutate(b"var x=01;", &user(&["const", "+"]));
        assert!(naive[0].mutants.contains(&b"var x=0const1;".to_vec()));
        assert!(naive[1].mutants.contains(&b"var x=0+;".to_vec()));
    }

    #[test]
    fn counts_match_naive_without_runs() {
        let d = user(&["a", "bb"]);
        let input = b"x;y(z)";
        let e: usize = dictionary_mutate(input, &d).iter().map(|b| b.len()).sum();
        let n: usize = naive_dictionary_mutate(input, &d).iter().map(|b| b.len()).sum();
        assert_eq!(e, n);
        assert_eq!(n, 2 * (2 * input.len() + 1));
    }

    #[test]
    fn dictionary_dedup_and_limits() {
        let mut d = Dictionary::new();
        assert!(d.add(b"if", Origin::User));
        assert!(!d.add(b"if", Origin::Auto));
        assert!(!d.add(b"", Origin::User));
        assert!(!d.add(&[b'a'; 129], Origin::User));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn file_format() {
        let d = parse_dictionary("# c\nkw_if=\"if\"\n\"\\x00\\\\\\\"\"\nlvl@2=\"while\"\n\n", Origin::User).unwrap();
        let toks: Vec<&[u8]> = d.tokens(Origin::User).collect();
        assert_eq!(toks, [&b"if"[..], b"\x00\\\"", b"while"]);
        let again = parse_dictionary(&d.to_file_string(), Origin::User).unwrap();
        assert_eq!(again.entries(), d.entries());
        assert_eq!(parse_dictionary("x=\"a\nb", Origin::User).unwrap_err().line, 1);
        assert!(parse_dictionary("x=\"\\q\"", Origin::User).is_err());
        assert!(parse_dictionary("x \"a\"", Origin::User).is_err());
        assert!(parse_dictionary("x=\"\"", Origin::User).is_err());
    }

    #[test]
    fn auto_tokens() {
        let g = crate::grammar::minijs();
        let corpus = vec![b"var counter = 1; counter = counter + 1;".to_vec()];
        let d = extract_auto_tokens(&corpus, &g);
        assert!(d.contains(b"var"));
        assert!(d.contains(b"function"));
        assert!(d.contains(b"counter"));
        assert!(d.entries().iter().all(|(t, o)| !t.is_empty() && *o == Origin::Auto));
    }
}
