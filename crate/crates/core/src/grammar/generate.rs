//! Random sentence generation from a grammar.
//!
//! Used to build test corpora. Every returned input is checked to parse and
//! to re-serialize to itself.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::regex::{Ast, ByteSet};
use super::{parse, tokenize, GrammarSpec, RuleId, Symbol, TokenId};

/// How trivia is placed between tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trivia {
    /// Only where two tokens would otherwise lex differently.
    Minimal,
    /// Random instances of the grammar's skip tokens, comments included.
    Random,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: usize,
    /// Soft cap on emitted tokens; past it derivations close off as fast
    /// as the grammar allows.
    pub max_tokens: usize,
    pub max_repeat: usize,
    pub trivia: Trivia,
    pub attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 10, max_tokens: 60, max_repeat: 4, trivia: Trivia::Minimal, attempts: 64 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("no valid sentence after {0} attempts")]
    Exhausted(usize),
    #[error("rule '{0}' derives no finite sentence")]
    Unproductive(String),
}

/// Minimum derivation height of every rule, `None` when unproductive.
fn min_heights(g: &GrammarSpec) -> Vec<Option<usize>> {
    let mut h: Vec<Option<usize>> = vec![None; g.rules.len()];
    loop {
        let mut changed = false;
        for (i, r) in g.rules.iter().enumerate() {
            let best = r.alternatives.iter().filter_map(|alt| alt_height(alt, &h)).min();
            if best.is_some() && (h[i].is_none() || best < h[i]) {
                h[i] = best;
                changed = true;
            }
        }
        if !changed {
            return h;
        }
    }
}

fn alt_height(alt: &[Symbol], h: &[Option<usize>]) -> Option<usize> {
    let mut m = 0;
    for s in alt {
        if let Symbol::Rule(r) = s {
            m = m.max(h[r.0 as usize]?);
        }
    }
    Some(m + 1)
}

fn pick_byte(set: &ByteSet, rng: &mut impl Rng) -> u8 {
    let printable: Vec<u8> = set.iter().filter(|b| (0x20..0x7f).contains(b)).collect();
    if !printable.is_empty() {
        return *printable.choose(rng).unwrap();
    }
    let white: Vec<u8> = set.iter().filter(|b| b"\t\n\r".contains(b)).collect();
    if !white.is_empty() {
        return *white.choose(rng).unwrap();
    }
    let all: Vec<u8> = set.iter().collect();
    *all.choose(rng).unwrap()
}

fn sample_ast(ast: &Ast, rng: &mut impl Rng, max_repeat: usize, out: &mut Vec<u8>) {
    match ast {
        Ast::Empty => {}
        Ast::Class(set) => out.push(pick_byte(set, rng)),
        Ast::Concat(parts) => parts.iter().for_each(|p| sample_ast(p, rng, max_repeat, out)),
        Ast::Alt(alts) => sample_ast(alts.choose(rng).unwrap(), rng, max_repeat, out),
        Ast::Star(a) => (0..rng.gen_range(0..=max_repeat)).for_each(|_| sample_ast(a, rng, max_repeat, out)),
        Ast::Plus(a) => (0..rng.gen_range(1..=max_repeat.max(1))).for_each(|_| sample_ast(a, rng, max_repeat, out)),
        Ast::Opt(a) => {
            if rng.gen_bool(0.5) {
                sample_ast(a, rng, max_repeat, out)
            }
        }
    }
}

/// Lexes as exactly one lexeme of `tok`.
fn lexes_as(g: &GrammarSpec, text: &[u8], tok: TokenId) -> bool {
    matches!(tokenize(g, text).as_deref(), Ok([l]) if l.token == tok)
}

fn sample_token(g: &GrammarSpec, tok: TokenId, rng: &mut impl Rng, max_repeat: usize) -> Option<Vec<u8>> {
    let def = g.token(tok);
    if let Some(lit) = def.literal() {
        return lexes_as(g, &lit, tok).then_some(lit);
    }
    for _ in 0..32 {
        let mut text = Vec::new();
        sample_ast(def.ast(), rng, max_repeat, &mut text);
        if !text.is_empty() && lexes_as(g, &text, tok) {
            return Some(text);
        }
    }
    None
}

struct Gen<'a, R> {
    g: &'a GrammarSpec,
    rng: &'a mut R,
    cfg: &'a GenConfig,
    heights: &'a [Option<usize>],
    tokens: Vec<TokenId>,
}

impl<R: Rng> Gen<'_, R> {
    fn expand(&mut self, rule: RuleId, depth: usize) {
        let alts = &self.g.rule(rule).alternatives;
        let finite: Vec<usize> =
            (0..alts.len()).filter(|&i| alt_height(&alts[i], self.heights).is_some()).collect();
        let choice = if depth >= self.cfg.max_depth || self.tokens.len() >= self.cfg.max_tokens {
            let best = finite.iter().map(|&i| alt_height(&alts[i], self.heights).unwrap()).min().unwrap();
            let shortest: Vec<usize> =
                finite.into_iter().filter(|&i| alt_height(&alts[i], self.heights) == Some(best)).collect();
            *shortest.choose(self.rng).unwrap()
        } else {
            *finite.choose(self.rng).unwrap()
        };
        for sym in alts[choice].clone() {
            match sym {
                Symbol::Token(t) => self.tokens.push(t),
                Symbol::Rule(r) => self.expand(r, depth + 1),
            }
        }
    }
}

/// Two adjacent pieces lex back into themselves.
fn boundary_ok(g: &GrammarSpec, a: &[u8], b: &[u8]) -> bool {
    let (Ok(la), Ok(lb)) = (tokenize(g, a), tokenize(g, b)) else { return false };
    let mut joined = a.to_vec();
    joined.extend_from_slice(b);
    let Ok(lj) = tokenize(g, &joined) else { return false };
    lj.len() == la.len() + lb.len()
        && lj.iter().zip(la.iter().chain(lb.iter())).all(|(x, y)| x.token == y.token)
}

fn separator(g: &GrammarSpec) -> Option<Vec<u8>> {
    [b" ".as_slice(), b"\n"]
        .into_iter()
        .find(|s| matches!(tokenize(g, s).as_deref(), Ok([l]) if l.skip))
        .map(<[u8]>::to_vec)
}

fn attempt(g: &GrammarSpec, rng: &mut impl Rng, cfg: &GenConfig, heights: &[Option<usize>]) -> Option<Vec<u8>> {
    let mut gen = Gen { g, rng, cfg, heights, tokens: Vec::new() };
    gen.expand(g.start_rule, 0);
    let tokens = std::mem::take(&mut gen.tokens);
    let sep = separator(g);
    let skips: Vec<TokenId> =
        (0..g.tokens.len()).map(|i| TokenId(i as u32)).filter(|t| g.token(*t).skip).collect();

    let mut out: Vec<u8> = Vec::new();
    let mut last: Vec<u8> = Vec::new();
    let push = |piece: Vec<u8>, out: &mut Vec<u8>, last: &mut Vec<u8>| -> bool {
        if !last.is_empty() && !boundary_ok(g, last, &piece) {
            let Some(sep) = &sep else { return false };
            if !boundary_ok(g, sep, &piece) {
                return false;
            }
            out.extend_from_slice(sep);
        }
        out.extend_from_slice(&piece);
        *last = piece;
        true
    };
    for tok in tokens {
        if cfg.trivia == Trivia::Random && !skips.is_empty() && rng.gen_bool(0.3) {
            let t = *skips.choose(rng).unwrap();
            if let Some(text) = sample_token(g, t, rng, cfg.max_repeat) {
                if !push(text, &mut out, &mut last) {
                    return None;
                }
            }
        }
        let text = sample_token(g, tok, rng, cfg.max_repeat)?;
        if !push(text, &mut out, &mut last) {
            return None;
        }
    }
    let tree = parse(g, &out).ok()?;
    (tree.serialize() == out).then_some(out)
}

/// One random sentence of the grammar's language.
pub fn generate(g: &GrammarSpec, rng: &mut impl Rng, cfg: &GenConfig) -> Result<Vec<u8>, GenerateError> {
    let heights = min_heights(g);
    if heights[g.start_rule.0 as usize].is_none() {
        return Err(GenerateError::Unproductive(g.rule_name(g.start_rule).to_string()));
    }
    for _ in 0..cfg.attempts {
        if let Some(s) = attempt(g, rng, cfg, &heights) {
            return Ok(s);
        }
    }
    Err(GenerateError::Exhausted(cfg.attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{load_grammar, minijs, plist_xml};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sentences_parse_for_bundled_grammars() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [minijs(), plist_xml()] {
            for trivia in [Trivia::Minimal, Trivia::Random] {
                let cfg = GenConfig { trivia, ..GenConfig::default() };
                for _ in 0..20 {
                    let s = generate(&g, &mut rng, &cfg).unwrap();
                    assert!(parse(&g, &s).is_ok(), "{}", String::from_utf8_lossy(&s));
                }
            }
        }
    }

    #[test]
    fn keywords_get_separated() {
        let g = load_grammar(b"s := K I ; K := /var/ ; I := /[a-z]+/ ; WS skip / +/ ;").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate(&g, &mut rng, &GenConfig::default()).unwrap();
        assert!(s.starts_with(b"var "));
    }

    #[test]
    fn unproductive_start() {
        let g = load_grammar(b"s := s X ; X := /x/ ;").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(generate(&g, &mut rng, &GenConfig::default()), Err(GenerateError::Unproductive(_))));
    }
}
