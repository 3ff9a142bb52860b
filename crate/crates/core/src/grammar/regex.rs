//! Restricted regular expressions for token definitions.
//!
//! Supported syntax: literals, `.`, escapes (`\n \t \r \\ \/ \xNN \d \w \s`
//! and any escaped punctuation), bracket classes with ranges and negation,
//! grouping with `( )` or `(?: )`, alternation `|` and the postfix
//! quantifiers `* + ?`. Patterns are compiled to a dense byte DFA so that
//! the lexer can ask for the longest match at an offset in linear time.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::GrammarError;

/// Set of bytes, 256 bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ByteSet([u64; 4]);

impl ByteSet {
    pub fn empty() -> Self {
        ByteSet([0; 4])
    }

    pub fn full() -> Self {
        ByteSet([u64::MAX; 4])
    }

    pub fn single(b: u8) -> Self {
        let mut s = Self::empty();
        s.insert(b);
        s
    }

    pub fn range(lo: u8, hi: u8) -> Self {
        let mut s = Self::empty();
        for b in lo..=hi {
            s.insert(b);
        }
        s
    }

    pub fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1 << (b & 63);
    }

    pub fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] & (1 << (b & 63)) != 0
    }

    pub fn union(&self, other: &ByteSet) -> ByteSet {
        let mut out = *self;
        for (o, x) in out.0.iter_mut().zip(other.0.iter()) {
            *o |= x;
        }
        out
    }

    pub fn complement(&self) -> ByteSet {
        let mut out = *self;
        for o in out.0.iter_mut() {
            *o = !*o;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first(&self) -> Option<u8> {
        (0u16..256).map(|b| b as u8).find(|b| self.contains(*b))
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0u16..256).map(|b| b as u8).filter(move |b| self.contains(*b))
    }
}

impl std::fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ByteSet({} bytes)", self.len())
    }
}

/// Parsed pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ast {
    Empty,
    Class(ByteSet),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Star(Box<Ast>),
    Plus(Box<Ast>),
    Opt(Box<Ast>),
}

impl Ast {
    /// The literal byte string this pattern denotes, when it matches exactly
    /// one string.
    pub fn as_literal(&self) -> Option<Vec<u8>> {
        match self {
            Ast::Empty => Some(Vec::new()),
            Ast::Class(set) if set.len() == 1 => set.iter().next().map(|b| vec![b]),
            Ast::Concat(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.as_literal()?);
                }
                Some(out)
            }
            Ast::Alt(alts) if alts.len() == 1 => alts[0].as_literal(),
            _ => None,
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> GrammarError {
        GrammarError::Regex {
            pattern: String::from_utf8_lossy(self.src).into_owned(),
            offset: self.pos,
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    fn parse_alt(&mut self) -> Result<Ast, GrammarError> {
        let mut alts = vec![self.parse_concat()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            alts.push(self.parse_concat()?);
        }
        Ok(if alts.len() == 1 { alts.pop().unwrap() } else { Ast::Alt(alts) })
    }

    fn parse_concat(&mut self) -> Result<Ast, GrammarError> {
        let mut parts = Vec::new();
        while let Some(b) = self.peek() {
            if b == b'|' || b == b')' {
                break;
            }
            let atom = self.parse_atom()?;
            parts.push(self.parse_quantifiers(atom)?);
        }
        Ok(match parts.len() {
            0 => Ast::Empty,
            1 => parts.pop().unwrap(),
            _ => Ast::Concat(parts),
        })
    }

    fn parse_quantifiers(&mut self, mut atom: Ast) -> Result<Ast, GrammarError> {
        loop {
            atom = match self.peek() {
                Some(b'*') => Ast::Star(Box::new(atom)),
                Some(b'+') => Ast::Plus(Box::new(atom)),
                Some(b'?') => Ast::Opt(Box::new(atom)),
                _ => return Ok(atom),
            };
            self.pos += 1;
        }
    }

    fn parse_atom(&mut self) -> Result<Ast, GrammarError> {
        match self.bump() {
            Some(b'(') => {
                if self.src[self.pos..].starts_with(b"?:") {
                    self.pos += 2;
                }
                let inner = self.parse_alt()?;
                if self.bump() != Some(b')') {
                    return Err(self.err("unclosed group"));
                }
                Ok(inner)
            }
            Some(b'[') => self.parse_class(),
            Some(b'.') => Ok(Ast::Class(ByteSet::full())),
            Some(b'\\') => Ok(Ast::Class(self.parse_escape()?)),
            Some(b @ (b'*' | b'+' | b'?')) => {
                Err(self.err(format!("quantifier '{}' with nothing to repeat", b as char)))
            }
            Some(b) => Ok(Ast::Class(ByteSet::single(b))),
            None => Err(self.err("unexpected end of pattern")),
        }
    }

    fn parse_escape(&mut self) -> Result<ByteSet, GrammarError> {
        let b = self.bump().ok_or_else(|| self.err("dangling escape"))?;
        Ok(match b {
            b'n' => ByteSet::single(b'\n'),
            b't' => ByteSet::single(b'\t'),
            b'r' => ByteSet::single(b'\r'),
            b'0' => ByteSet::single(0),
            b'd' => ByteSet::range(b'0', b'9'),
            b'w' => ByteSet::range(b'a', b'z')
                .union(&ByteSet::range(b'A', b'Z'))
                .union(&ByteSet::range(b'0', b'9'))
                .union(&ByteSet::single(b'_')),
            b's' => [b' ', b'\t', b'\n', b'\r', 0x0b, 0x0c]
                .iter()
                .fold(ByteSet::empty(), |s, b| s.union(&ByteSet::single(*b))),
            b'x' => {
                let hex = self
                    .src
                    .get(self.pos..self.pos + 2)
                    .ok_or_else(|| self.err("truncated \\x escape"))?;
                let text = std::str::from_utf8(hex).map_err(|_| self.err("bad \\x escape"))?;
                let v = u8::from_str_radix(text, 16).map_err(|_| self.err("bad \\x escape"))?;
                self.pos += 2;
                ByteSet::single(v)
            }
            b if b.is_ascii_alphanumeric() => {
                return Err(self.err(format!("unknown escape '\\{}'", b as char)))
            }
            other => ByteSet::single(other),
        })
    }

    fn parse_class(&mut self) -> Result<Ast, GrammarError> {
        let negate = if self.peek() == Some(b'^') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut set = ByteSet::empty();
        let mut first = true;
        loop {
            let b = self.bump().ok_or_else(|| self.err("unclosed character class"))?;
            if b == b']' && !first {
                break;
            }
            first = false;
            let lo = if b == b'\\' {
                let esc = self.parse_escape()?;
                if esc.len() != 1 {
                    set = set.union(&esc);
                    continue;
                }
                esc.first().unwrap()
            } else {
                b
            };
            if self.peek() == Some(b'-') && self.src.get(self.pos + 1).is_some_and(|c| *c != b']') {
                self.pos += 1;
                let hb = self.bump().unwrap();
                let hi = if hb == b'\\' {
                    let esc = self.parse_escape()?;
                    if esc.len() != 1 {
                        return Err(self.err("class shorthand cannot end a range"));
                    }
                    esc.first().unwrap()
                } else {
                    hb
                };
                if hi < lo {
                    return Err(self.err("inverted range in class"));
                }
                set = set.union(&ByteSet::range(lo, hi));
            } else {
                set.insert(lo);
            }
        }
        if negate {
            set = set.complement();
        }
        if set.is_empty() {
            return Err(self.err("empty character class"));
        }
        Ok(Ast::Class(set))
    }
}

/// Parse a pattern body (without the surrounding slashes).
pub fn parse(pattern: &[u8]) -> Result<Ast, GrammarError> {
    let mut p = Parser { src: pattern, pos: 0 };
    let ast = p.parse_alt()?;
    if p.pos != pattern.len() {
        return Err(p.err("unbalanced ')'"));
    }
    Ok(ast)
}

// Thompson NFA used only during compilation.
#[derive(Default)]
struct Nfa {
    // (byte set, target) transitions per state
    edges: Vec<Vec<(ByteSet, usize)>>,
    eps: Vec<Vec<usize>>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.eps.push(Vec::new());
        self.edges.len() - 1
    }

    // Returns (start, accept) of the fragment.
    fn build(&mut self, ast: &Ast) -> (usize, usize) {
        match ast {
            Ast::Empty => {
                let s = self.state();
                (s, s)
            }
            Ast::Class(set) => {
                let s = self.state();
                let e = self.state();
                self.edges[s].push((*set, e));
                (s, e)
            }
            Ast::Concat(parts) => {
                let (start, mut end) = self.build(&parts[0]);
                for p in &parts[1..] {
                    let (s, e) = self.build(p);
                    self.eps[end].push(s);
                    end = e;
                }
                (start, end)
            }
            Ast::Alt(alts) => {
                let s = self.state();
                let e = self.state();
                for a in alts {
                    let (as_, ae) = self.build(a);
                    self.eps[s].push(as_);
                    self.eps[ae].push(e);
                }
                (s, e)
            }
            Ast::Star(inner) => {
                let s = self.state();
                let e = self.state();
                let (is, ie) = self.build(inner);
                self.eps[s].push(is);
                self.eps[s].push(e);
                self.eps[ie].push(is);
                self.eps[ie].push(e);
                (s, e)
            }
            Ast::Plus(inner) => {
                let (is, ie) = self.build(inner);
                let e = self.state();
                self.eps[ie].push(is);
                self.eps[ie].push(e);
                (is, e)
            }
            Ast::Opt(inner) => {
                let s = self.state();
                let e = self.state();
                let (is, ie) = self.build(inner);
                self.eps[s].push(is);
                self.eps[s].push(e);
                self.eps[ie].push(e);
                (s, e)
            }
        }
    }

    fn closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for &t in &self.eps[s] {
                if set.insert(t) {
                    stack.push(t);
                }
            }
        }
    }
}

const DEAD: u32 = u32::MAX;

/// Dense deterministic automaton over bytes.
#[derive(Clone)]
pub struct Dfa {
    table: Vec<[u32; 256]>,
    accepting: Vec<bool>,
}

impl std::fmt::Debug for Dfa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dfa({} states)", self.table.len())
    }
}

impl Dfa {
    pub fn compile(ast: &Ast) -> Dfa {
        let mut nfa = Nfa::default();
        let (start, accept) = nfa.build(ast);

        let mut init = BTreeSet::from([start]);
        nfa.closure(&mut init);

        let mut ids: HashMap<BTreeSet<usize>, u32> = HashMap::new();
        let mut sets = vec![init.clone()];
        ids.insert(init, 0);
        let mut table = Vec::new();
        let mut accepting = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        table.push([DEAD; 256]);
        accepting.push(sets[0].contains(&accept));

        while let Some(id) = queue.pop_front() {
            let current = sets[id].clone();
            for byte in 0u16..256 {
                let b = byte as u8;
                let mut next = BTreeSet::new();
                for &s in &current {
                    for (set, t) in &nfa.edges[s] {
                        if set.contains(b) {
                            next.insert(*t);
                        }
                    }
                }
                if next.is_empty() {
                    continue;
                }
                nfa.closure(&mut next);
                let target = match ids.get(&next) {
                    Some(t) => *t,
                    None => {
                        let t = sets.len() as u32;
                        accepting.push(next.contains(&accept));
                        table.push([DEAD; 256]);
                        ids.insert(next.clone(), t);
                        sets.push(next);
                        queue.push_back(t as usize);
                        t
                    }
                };
                table[id][b as usize] = target;
            }
        }
        Dfa { table, accepting }
    }

    /// Length of the longest match of this automaton anchored at `input[0]`.
    /// Zero-length matches are reported as `None`.
    pub fn longest_match(&self, input: &[u8]) -> Option<usize> {
        let mut state = 0u32;
        let mut best = None;
        for (i, &b) in input.iter().enumerate() {
            state = self.table[state as usize][b as usize];
            if state == DEAD {
                break;
            }
            if self.accepting[state as usize] {
                best = Some(i + 1);
            }
        }
        best
    }

    /// Whether the whole of `input` is accepted.
    pub fn matches(&self, input: &[u8]) -> bool {
        let mut state = 0u32;
        for &b in input {
            state = self.table[state as usize][b as usize];
            if state == DEAD {
                return false;
            }
        }
        self.accepting[state as usize]
    }

    /// Whether some nonempty string made only of bytes in `alphabet` is
    /// accepted.
    pub fn accepts_nonempty_over(&self, alphabet: &ByteSet) -> bool {
        let mut seen = vec![false; self.table.len()];
        let mut stack = vec![0u32];
        while let Some(s) = stack.pop() {
            for b in alphabet.iter() {
                let t = self.table[s as usize][b as usize];
                if t != DEAD && !seen[t as usize] {
                    seen[t as usize] = true;
                    if self.accepting[t as usize] {
                        return true;
                    }
                    stack.push(t);
                }
            }
        }
        false
    }

    /// Whether some nonempty string is accepted.
    pub fn accepts_nonempty(&self) -> bool {
        // Every state other than the start is reached by at least one byte.
        let mut seen = vec![false; self.table.len()];
        let mut stack = vec![0u32];
        while let Some(s) = stack.pop() {
            for &t in self.table[s as usize].iter() {
                if t != DEAD && !seen[t as usize] {
                    seen[t as usize] = true;
                    if self.accepting[t as usize] {
                        return true;
                    }
                    stack.push(t);
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfa(p: &str) -> Dfa {
        Dfa::compile(&parse(p.as_bytes()).unwrap())
    }

    #[test]
    fn longest_match_not_leftmost_first() {
        assert_eq!(dfa("a|ab").longest_match(b"abc"), Some(2));
        assert_eq!(dfa("[0-9]+").longest_match(b"123x"), Some(3));
        assert_eq!(dfa("[0-9]+").longest_match(b"x"), None);
    }

    #[test]
    fn block_comment() {
        let d = dfa(r"/\*([^*]|\*+[^*/])*\*+/");
        assert_eq!(d.longest_match(b"/* a * b */x"), Some(11));
        assert_eq!(d.longest_match(b"/* open"), None);
        assert!(d.matches(b"/**/"));
    }

    #[test]
    fn classes_and_escapes() {
        let d = dfa(r#""([^"\\]|\\.)*""#);
        assert_eq!(d.longest_match(br#""a\"b" rest"#), Some(6));
        assert!(dfa(r"\x41\d").matches(b"A7"));
        assert!(dfa("[^<]*").matches(b"abc"));
        assert!(!dfa("[^<]").matches(b"<"));
        assert!(dfa("[a-c-]").matches(b"-"));
    }

    #[test]
    fn literal_detection() {
        assert_eq!(parse(b"var").unwrap().as_literal(), Some(b"var".to_vec()));
        assert_eq!(parse(br"\(").unwrap().as_literal(), Some(b"(".to_vec()));
        assert_eq!(parse(b"a+").unwrap().as_literal(), None);
    }

    #[test]
    fn empty_only_patterns_are_detected() {
        assert!(!dfa("a?").accepts_nonempty() || dfa("a?").matches(b"a"));
        assert!(!dfa("()").accepts_nonempty());
        assert!(dfa("x*").accepts_nonempty());
    }

    #[test]
    fn syntax_errors() {
        assert!(parse(b"(ab").is_err());
        assert!(parse(b"ab)").is_err());
        assert!(parse(b"*a").is_err());
        assert!(parse(b"[z-a]").is_err());
        assert!(parse(br"\q").is_err());
    }
}
