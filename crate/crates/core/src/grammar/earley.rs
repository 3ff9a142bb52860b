//! Earley chart parser over arbitrary context-free grammars.
//!
//! Recognition builds the usual item sets over the non-trivia lexemes; the
//! tree is then read back top-down. Ambiguity is settled by taking the
//! earliest-listed alternative that derives the span and, within it, the
//! longest possible leftmost child.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::lexer::{tokenize, Lexeme};
use super::tree::{Node, NodeKind, ParseTree, Span};
use super::{GrammarSpec, RuleId, Symbol};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ParseError {
    #[error("no token matches at byte {offset}")]
    Tokenize { offset: usize },
    #[error("unexpected token at byte {offset}")]
    UnexpectedToken { offset: usize },
    #[error("input ends before a complete derivation (byte {offset})")]
    UnexpectedEnd { offset: usize },
}

impl ParseError {
    /// Byte offset of the first failure.
    pub fn offset(&self) -> usize {
        match *self {
            ParseError::Tokenize { offset }
            | ParseError::UnexpectedToken { offset }
            | ParseError::UnexpectedEnd { offset } => offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    rule: u32,
    alt: u32,
    dot: u32,
    origin: u32,
}

struct Chart<'g> {
    g: &'g GrammarSpec,
    sets: Vec<Vec<Item>>,
    seen: Vec<HashSet<Item>>,
    // items in set k whose next symbol is the given rule
    waiting: Vec<HashMap<u32, Vec<Item>>>,
}

impl<'g> Chart<'g> {
    fn next_symbol(&self, it: &Item) -> Option<Symbol> {
        self.g.rules[it.rule as usize].alternatives[it.alt as usize].get(it.dot as usize).copied()
    }

    fn add(&mut self, k: usize, it: Item) {
        if self.seen[k].insert(it) {
            if let Some(Symbol::Rule(r)) = self.next_symbol(&it) {
                self.waiting[k].entry(r.0).or_default().push(it);
            }
            self.sets[k].push(it);
        }
    }
}

/// Parse `input` into a concrete syntax tree rooted at the start rule.
pub fn parse(g: &GrammarSpec, input: &[u8]) -> Result<ParseTree, ParseError> {
    let lexemes = tokenize(g, input)?;
    let toks: Vec<Lexeme> = lexemes.into_iter().filter(|l| !l.skip).collect();
    let n = toks.len();

    let mut chart = Chart {
        g,
        sets: vec![Vec::new(); n + 1],
        seen: vec![HashSet::new(); n + 1],
        waiting: vec![HashMap::new(); n + 1],
    };
    // (rule, start) -> ends
    let mut completed: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    let mut completed_set: HashSet<(u32, u32, u32)> = HashSet::new();

    let start = g.start_rule.0;
    for alt in 0..g.rules[start as usize].alternatives.len() {
        chart.add(0, Item { rule: start, alt: alt as u32, dot: 0, origin: 0 });
    }

    #[allow(clippy::needless_range_loop)]
    for k in 0..=n {
        let mut i = 0;
        while i < chart.sets[k].len() {
            let it = chart.sets[k][i];
            i += 1;
            match chart.next_symbol(&it) {
                None => {
                    if !completed_set.insert((it.rule, it.origin, k as u32)) {
                        continue;
                    }
                    completed.entry((it.rule, it.origin)).or_default().push(k as u32);
                    let parents = chart.waiting[it.origin as usize].get(&it.rule).cloned().unwrap_or_default();
                    for p in parents {
                        chart.add(k, Item { dot: p.dot + 1, ..p });
                    }
                }
                Some(Symbol::Rule(r)) => {
                    for alt in 0..g.rules[r.0 as usize].alternatives.len() {
                        chart.add(k, Item { rule: r.0, alt: alt as u32, dot: 0, origin: k as u32 });
                    }
                    if g.is_nullable(r) {
                        chart.add(k, Item { dot: it.dot + 1, ..it });
                    }
                }
                Some(Symbol::Token(t)) => {
                    if k < n && toks[k].token == t {
                        chart.add(k + 1, Item { dot: it.dot + 1, ..it });
                    }
                }
            }
        }
        if k < n && chart.sets[k + 1].is_empty() {
            return Err(ParseError::UnexpectedToken { offset: toks[k].span.start });
        }
    }

    if !completed_set.contains(&(start, 0, n as u32)) {
        return Err(ParseError::UnexpectedEnd { offset: input.len() });
    }

    for ends in completed.values_mut() {
        ends.sort_unstable_by(|a, b| b.cmp(a));
    }
    let mut builder = Builder {
        g,
        toks: &toks,
        input_len: input.len(),
        completed: &completed,
        completed_set: &completed_set,
        memo: HashMap::new(),
        in_progress: HashSet::new(),
    };
    let mut root = builder
        .build(g.start_rule, 0, n as u32)
        .ok_or(ParseError::UnexpectedEnd { offset: input.len() })?;
    root.span = Span::new(0, input.len());
    Ok(ParseTree { source: input.to_vec(), root })
}

struct Builder<'a> {
    g: &'a GrammarSpec,
    toks: &'a [Lexeme],
    input_len: usize,
    completed: &'a HashMap<(u32, u32), Vec<u32>>,
    completed_set: &'a HashSet<(u32, u32, u32)>,
    // (rule, alt, pos, from, to) -> symbols alt[pos..] derive toks[from..to]
    memo: HashMap<(u32, u32, u32, u32, u32), bool>,
    in_progress: HashSet<(u32, u32, u32)>,
}

impl Builder<'_> {
    fn position(&self, tok: u32) -> usize {
        match self.toks.get(tok as usize) {
            Some(l) => l.span.start,
            None => self.toks.last().map_or(0, |l| l.span.end).min(self.input_len),
        }
    }

    fn suffix_derives(&mut self, rule: u32, alt: u32, pos: u32, from: u32, to: u32) -> bool {
        let syms = &self.g.rules[rule as usize].alternatives[alt as usize];
        if pos as usize == syms.len() {
            return from == to;
        }
        let key = (rule, alt, pos, from, to);
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let ok = match syms[pos as usize] {
            Symbol::Token(t) => {
                from < to
                    && self.toks[from as usize].token == t
                    && self.suffix_derives(rule, alt, pos + 1, from + 1, to)
            }
            Symbol::Rule(b) => {
                let ends = self.completed.get(&(b.0, from)).cloned().unwrap_or_default();
                ends.into_iter()
                    .filter(|e| *e <= to)
                    .any(|e| self.suffix_derives(rule, alt, pos + 1, e, to))
            }
        };
        self.memo.insert(key, ok);
        ok
    }

    fn build(&mut self, rule: RuleId, from: u32, to: u32) -> Option<Node> {
        let key = (rule.0, from, to);
        if !self.completed_set.contains(&key) || !self.in_progress.insert(key) {
            return None;
        }
        let mut result = None;
        for alt in 0..self.g.rule(rule).alternatives.len() as u32 {
            if !self.suffix_derives(rule.0, alt, 0, from, to) {
                continue;
            }
            let mut children = Vec::new();
            if self.build_children(rule.0, alt, 0, from, to, &mut children) {
                result = Some(children);
                break;
            }
        }
        self.in_progress.remove(&key);
        let children = result?;
        let span = match (children.first(), children.last()) {
            (Some(a), Some(b)) => Span::new(a.span.start, b.span.end),
            _ => {
                let p = self.position(from);
                Span::new(p, p)
            }
        };
        Some(Node { kind: NodeKind::Rule(rule), span, children })
    }

    fn build_children(&mut self, rule: u32, alt: u32, pos: u32, from: u32, to: u32, out: &mut Vec<Node>) -> bool {
        let syms = &self.g.rules[rule as usize].alternatives[alt as usize];
        if pos as usize == syms.len() {
            return from == to;
        }
        match syms[pos as usize] {
            Symbol::Token(t) => {
                if from >= to || self.toks[from as usize].token != t {
                    return false;
                }
                out.push(Node { kind: NodeKind::Token(t), span: self.toks[from as usize].span, children: Vec::new() });
                if self.build_children(rule, alt, pos + 1, from + 1, to, out) {
                    return true;
                }
                out.pop();
                false
            }
            Symbol::Rule(b) => {
                // Ends are sorted descending: longest child first.
                let ends = self.completed.get(&(b.0, from)).cloned().unwrap_or_default();
                for end in ends.into_iter().filter(|e| *e <= to) {
                    if !self.suffix_derives(rule, alt, pos + 1, end, to) {
                        continue;
                    }
                    let Some(child) = self.build(b, from, end) else { continue };
                    out.push(child);
                    if self.build_children(rule, alt, pos + 1, end, to, out) {
                        return true;
                    }
                    out.pop();
                }
                false
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;

    fn leaves(t: &ParseTree) -> Vec<String> {
        t.leaves().iter().map(|n| String::from_utf8_lossy(t.lexeme(n)).into_owned()).collect()
    }

    #[test]
    fn ambiguous_sum_prefers_long_left_child() {
        let g = load_grammar(b"e := e P e | N ; N := /[0-9]/ ; P := /\\+/ ;").unwrap();
        let t = parse(&g, b"1+2+3").unwrap();
        // Left child covers "1+2".
        assert_eq!(t.root.children[0].span, Span::new(0, 3));
        assert_eq!(leaves(&t), ["1", "+", "2", "+", "3"]);
    }

    #[test]
    fn earliest_alternative_wins() {
        let g = load_grammar(b"s := a | b ; a := X ; b := X ; X := /x/ ;").unwrap();
        let t = parse(&g, b"x").unwrap();
        assert_eq!(t.root.children[0].kind, NodeKind::Rule(g.rule_id("a").unwrap()));
    }

    #[test]
    fn nullable_rules_and_trivia() {
        let g = load_grammar(b"s := opt X opt ; opt := Y | ; X := /x/ ; Y := /y/ ; WS skip / +/ ;").unwrap();
        let t = parse(&g, b"  x y ").unwrap();
        assert_eq!(t.root.span, Span::new(0, 6));
        assert_eq!(t.serialize(), b"  x y ");
        assert_eq!(t.root.children[0].span, Span::new(2, 2));
        assert_eq!(t.root.children[2].span, Span::new(4, 5));
    }

    #[test]
    fn empty_input() {
        let g = load_grammar(b"s := X ; X := /x/ ;").unwrap();
        assert_eq!(parse(&g, b""), Err(ParseError::UnexpectedEnd { offset: 0 }));
        let g = load_grammar(b"s := X | ; X := /x/ ;").unwrap();
        assert!(parse(&g, b"").is_ok());
    }

    #[test]
    fn error_offsets() {
        let g = load_grammar(b"s := X X ; X := /x/ ; WS skip / +/ ;").unwrap();
        assert_eq!(parse(&g, b"x x x"), Err(ParseError::UnexpectedToken { offset: 4 }));
        assert_eq!(parse(&g, b"x "), Err(ParseError::UnexpectedEnd { offset: 2 }));
        assert_eq!(parse(&g, b"x?"), Err(ParseError::Tokenize { offset: 1 }));
    }

    #[test]
    fn unit_cycles_terminate() {
        let g = load_grammar(b"s := a ; a := b | X ; b := a ; X := /x/ ;").unwrap();
        let t = parse(&g, b"x").unwrap();
        assert_eq!(t.serialize(), b"x");
    }
}
