//! Context-free grammars, span-annotated concrete syntax trees and the
//! byte-level surgery used by trimming and tree mutation.
//!
//! Grammar files are line-oriented UTF-8:
//!
//! ```text
//! # comment
//! start program ;              # optional, defaults to the first rule
//! program := program stmt | stmt ;
//! VAR     := /var/ ;           # token: the right-hand side is a /regex/
//! WS      skip /[ \t\r\n]+/ ;  # trivia, recorded in spans but never a leaf
//! ```
//!
//! A rule alternative may be empty (`opt := x | ;`).

mod earley;
pub mod generate;
mod lexer;
pub mod regex;
mod tree;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use earley::{parse, ParseError};
pub use generate::{generate, GenConfig, GenerateError, Trivia};
pub use lexer::{tokenize, Lexeme};
pub use tree::{enumerate_subtrees, excise, splice, Node, NodeKind, ParseTree, Span, SubtreeRef};

use self::regex::{Ast, Dfa};

/// Source text of the bundled property-list grammar.
pub const PLIST_XML_GRAMMAR: &str = include_str!("../../grammars/plist-xml.g");
/// Source text of the bundled mini-JS grammar.
pub const MINIJS_GRAMMAR: &str = include_str!("../../grammars/minijs.g");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("undefined symbol `{name}` referenced by rule `{rule}`")]
    UndefinedSymbol { name: String, rule: String },
    #[error("duplicate definition of `{0}`")]
    Duplicate(String),
    #[error("start rule `{0}` is not defined")]
    UnknownStart(String),
    #[error("grammar defines no rules")]
    NoRules,
    #[error("rule `{0}` has no alternatives")]
    NoAlternatives(String),
    #[error("token `{0}` matches no nonempty string")]
    EmptyToken(String),
    #[error("bad pattern /{pattern}/ at offset {offset}: {message}")]
    Regex { pattern: String, offset: usize, message: String },
    #[error("grammar file is not valid UTF-8")]
    Utf8,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenId(pub u32);

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

/// A grammar symbol appearing in a rule body.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Token(TokenId),
    Rule(RuleId),
}

#[derive(Debug, Clone)]
pub struct TokenDef {
    pub name: String,
    /// Pattern source, without the delimiting slashes.
    pub pattern: String,
    pub skip: bool,
    ast: Ast,
    dfa: Dfa,
}

impl TokenDef {
    pub fn new(name: &str, pattern: &str, skip: bool) -> Result<Self, GrammarError> {
        let ast = regex::parse(pattern.as_bytes())?;
        let dfa = Dfa::compile(&ast);
        if !dfa.accepts_nonempty() {
            return Err(GrammarError::EmptyToken(name.to_string()));
        }
        Ok(TokenDef { name: name.to_string(), pattern: pattern.to_string(), skip, ast, dfa })
    }

    /// The exact text of this token if its pattern is a plain literal.
    pub fn literal(&self) -> Option<Vec<u8>> {
        self.ast.as_literal().filter(|l| !l.is_empty())
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn longest_match(&self, input: &[u8]) -> Option<usize> {
        self.dfa.longest_match(input)
    }

    pub fn matches(&self, input: &[u8]) -> bool {
        self.dfa.matches(input)
    }

    /// A skip token is comment-like when it matches no run of ASCII
    /// whitespace.
    pub fn is_comment(&self) -> bool {
        let mut ws = regex::ByteSet::empty();
        for b in *b" \t\r\n\x0b\x0c" {
            ws.insert(b);
        }
        self.skip && !self.dfa.accepts_nonempty_over(&ws)
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub alternatives: Vec<Vec<Symbol>>,
}

/// A validated context-free grammar. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct GrammarSpec {
    pub name: String,
    pub tokens: Vec<TokenDef>,
    pub rules: Vec<Rule>,
    pub start_rule: RuleId,
    nullable: Vec<bool>,
}

impl GrammarSpec {
    pub fn token(&self, id: TokenId) -> &TokenDef {
        &self.tokens[id.0 as usize]
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0 as usize]
    }

    pub fn rule_name(&self, id: RuleId) -> &str {
        &self.rule(id).name
    }

    pub fn token_name(&self, id: TokenId) -> &str {
        &self.token(id).name
    }

    pub fn rule_id(&self, name: &str) -> Option<RuleId> {
        self.rules.iter().position(|r| r.name == name).map(|i| RuleId(i as u32))
    }

    pub fn token_id(&self, name: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t.name == name).map(|i| TokenId(i as u32))
    }

    pub fn skip_tokens(&self) -> impl Iterator<Item = &TokenDef> {
        self.tokens.iter().filter(|t| t.skip)
    }

    /// Grammar size in symbols: the number of nonterminals.
    pub fn symbol_count(&self) -> usize {
        self.rules.len()
    }

    pub fn is_nullable(&self, rule: RuleId) -> bool {
        self.nullable[rule.0 as usize]
    }

    /// Literal spellings of every non-trivia token with a fixed pattern.
    pub fn terminal_literals(&self) -> Vec<Vec<u8>> {
        self.tokens.iter().filter(|t| !t.skip).filter_map(TokenDef::literal).collect()
    }

    fn compute_nullable(rules: &[Rule]) -> Vec<bool> {
        let mut nullable = vec![false; rules.len()];
        let mut changed = true;
        while changed {
            changed = false;
            for (i, r) in rules.iter().enumerate() {
                if nullable[i] {
                    continue;
                }
                let derives_empty = r.alternatives.iter().any(|alt| {
                    alt.iter().all(|s| match s {
                        Symbol::Token(_) => false,
                        Symbol::Rule(r) => nullable[r.0 as usize],
                    })
                });
                if derives_empty {
                    nullable[i] = true;
                    changed = true;
                }
            }
        }
        nullable
    }
}

impl fmt::Display for GrammarSpec {
    /// Renders the grammar back into the file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {} ;", self.rule_name(self.start_rule))?;
        for r in &self.rules {
            let alts: Vec<String> = r
                .alternatives
                .iter()
                .map(|alt| {
                    alt.iter()
                        .map(|s| match s {
                            Symbol::Token(t) => self.token_name(*t).to_string(),
                            Symbol::Rule(r) => self.rule_name(*r).to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            writeln!(f, "{} := {} ;", r.name, alts.join(" | "))?;
        }
        for t in &self.tokens {
            let op = if t.skip { "skip" } else { ":=" };
            writeln!(f, "{} {} /{}/ ;", t.name, op, t.pattern.replace('/', "\\/"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Define,
    Bar,
    Semi,
    Pattern(String),
}

struct FileLexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> FileLexer<'a> {
    fn err(&self, message: impl Into<String>) -> GrammarError {
        GrammarError::Syntax { line: self.line, column: self.col, message: message.into() }
    }

    fn advance(&mut self, c: char) {
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
    }

    fn next(&mut self) -> Result<Option<(Tok, usize, usize)>, GrammarError> {
        loop {
            let Some(c) = self.text[self.pos..].chars().next() else {
                return Ok(None);
            };
            if c.is_whitespace() {
                self.advance(c);
            } else if c == '#' {
                while let Some(c) = self.text[self.pos..].chars().next() {
                    if c == '\n' {
                        break;
                    }
                    self.advance(c);
                }
            } else {
                break;
            }
        }
        let (line, col) = (self.line, self.col);
        let rest = &self.text[self.pos..];
        let c = rest.chars().next().unwrap();
        let tok = if rest.starts_with(":=") {
            self.advance(':');
            self.advance('=');
            Tok::Define
        } else if c == '|' {
            self.advance(c);
            Tok::Bar
        } else if c == ';' {
            self.advance(c);
            Tok::Semi
        } else if c == '/' {
            self.advance(c);
            let mut pat = String::new();
            loop {
                let Some(c) = self.text[self.pos..].chars().next() else {
                    return Err(GrammarError::Syntax {
                        line,
                        column: col,
                        message: "unterminated /pattern/".into(),
                    });
                };
                if c == '\n' {
                    return Err(self.err("newline inside /pattern/"));
                }
                self.advance(c);
                if c == '/' {
                    break;
                }
                if c == '\\' {
                    let Some(n) = self.text[self.pos..].chars().next() else {
                        return Err(self.err("dangling escape in /pattern/"));
                    };
                    self.advance(n);
                    // `\/` is the pattern-file escape for a slash.
                    if n != '/' {
                        pat.push('\\');
                    }
                    pat.push(n);
                } else {
                    pat.push(c);
                }
            }
            Tok::Pattern(pat)
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(c) = self.text[self.pos..].chars().next() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                    ident.push(c);
                    self.advance(c);
                } else {
                    break;
                }
            }
            Tok::Ident(ident)
        } else {
            return Err(self.err(format!("unexpected character '{c}'")));
        };
        Ok(Some((tok, line, col)))
    }
}

enum RawDef {
    Rule { name: String, alternatives: Vec<Vec<String>> },
    Token { name: String, pattern: String, skip: bool },
}

/// Load and validate a grammar from file bytes.
pub fn load_grammar(text: &[u8]) -> Result<GrammarSpec, GrammarError> {
    load_grammar_named("grammar", text)
}

pub fn load_grammar_named(name: &str, text: &[u8]) -> Result<GrammarSpec, GrammarError> {
    let text = std::str::from_utf8(text).map_err(|_| GrammarError::Utf8)?;
    let mut lx = FileLexer { text, pos: 0, line: 1, col: 1 };
    let mut toks = Vec::new();
    while let Some(t) = lx.next()? {
        toks.push(t);
    }
    let eof = (lx.line, lx.col);

    let mut defs: Vec<(RawDef, usize, usize)> = Vec::new();
    let mut start_directive: Option<String> = None;
    let mut i = 0;
    let syntax = |pos: Option<&(Tok, usize, usize)>, msg: &str| {
        let (line, column) = pos.map(|(_, l, c)| (*l, *c)).unwrap_or(eof);
        GrammarError::Syntax { line, column, message: msg.to_string() }
    };

    while i < toks.len() {
        let (Tok::Ident(name), line, col) = &toks[i] else {
            return Err(syntax(toks.get(i), "expected a definition name"));
        };
        let (name, line, col) = (name.clone(), *line, *col);
        i += 1;
        match toks.get(i).map(|t| &t.0) {
            Some(Tok::Ident(kw)) if kw == "skip" => {
                i += 1;
                let Some((Tok::Pattern(p), _, _)) = toks.get(i) else {
                    return Err(syntax(toks.get(i), "expected /pattern/ after `skip`"));
                };
                defs.push((RawDef::Token { name, pattern: p.clone(), skip: true }, line, col));
                i += 1;
            }
            Some(Tok::Ident(target)) if name == "start" => {
                if start_directive.is_some() {
                    return Err(GrammarError::Duplicate("start".into()));
                }
                start_directive = Some(target.clone());
                i += 1;
            }
            Some(Tok::Define) => {
                i += 1;
                if let Some((Tok::Pattern(p), _, _)) = toks.get(i) {
                    defs.push((RawDef::Token { name, pattern: p.clone(), skip: false }, line, col));
                    i += 1;
                } else {
                    let mut alternatives = vec![Vec::new()];
                    while let Some((t, _, _)) = toks.get(i) {
                        match t {
                            Tok::Ident(s) => alternatives.last_mut().unwrap().push(s.clone()),
                            Tok::Bar => alternatives.push(Vec::new()),
                            Tok::Semi => break,
                            Tok::Define => {
                                return Err(syntax(toks.get(i), "missing `;` before this definition"))
                            }
                            Tok::Pattern(_) => {
                                return Err(syntax(toks.get(i), "patterns are only allowed in token definitions"))
                            }
                        }
                        i += 1;
                    }
                    // A trailing `Name :=` at the start of the next definition
                    // means the `;` was forgotten.
                    if toks.get(i).is_none() {
                        if let Some(last) = alternatives.last() {
                            if last.is_empty() && alternatives.len() == 1 {
                                return Err(syntax(None, "rule has no body"));
                            }
                        }
                    }
                    defs.push((RawDef::Rule { name, alternatives }, line, col));
                }
            }
            _ => return Err(syntax(toks.get(i), "expected `:=`, `skip` or a start rule name")),
        }
        match toks.get(i) {
            Some((Tok::Semi, _, _)) => i += 1,
            None => {}
            other => return Err(syntax(other, "expected `;`")),
        }
    }

    // Assign ids.
    let mut token_ids: HashMap<String, TokenId> = HashMap::new();
    let mut rule_ids: HashMap<String, RuleId> = HashMap::new();
    let mut tokens = Vec::new();
    for (d, _, _) in &defs {
        match d {
            RawDef::Token { name, pattern, skip } => {
                if token_ids.contains_key(name) || rule_ids.contains_key(name) {
                    return Err(GrammarError::Duplicate(name.clone()));
                }
                token_ids.insert(name.clone(), TokenId(tokens.len() as u32));
                tokens.push(TokenDef::new(name, pattern, *skip)?);
            }
            RawDef::Rule { name, .. } => {
                if token_ids.contains_key(name) || rule_ids.contains_key(name) {
                    return Err(GrammarError::Duplicate(name.clone()));
                }
                rule_ids.insert(name.clone(), RuleId(rule_ids.len() as u32));
            }
        }
    }
    if rule_ids.is_empty() {
        return Err(GrammarError::NoRules);
    }

    let mut rules = Vec::new();
    for (d, _, _) in &defs {
        let RawDef::Rule { name, alternatives } = d else { continue };
        let mut alts = Vec::new();
        for alt in alternatives {
            let mut syms = Vec::new();
            for s in alt {
                let sym = if let Some(r) = rule_ids.get(s) {
                    Symbol::Rule(*r)
                } else if let Some(t) = token_ids.get(s) {
                    if tokens[t.0 as usize].skip {
                        return Err(GrammarError::UndefinedSymbol { name: s.clone(), rule: name.clone() });
                    }
                    Symbol::Token(*t)
                } else {
                    return Err(GrammarError::UndefinedSymbol { name: s.clone(), rule: name.clone() });
                };
                syms.push(sym);
            }
            alts.push(syms);
        }
        if alts.is_empty() {
            return Err(GrammarError::NoAlternatives(name.clone()));
        }
        rules.push(Rule { name: name.clone(), alternatives: alts });
    }

    let start_rule = match start_directive {
        Some(s) => *rule_ids.get(&s).ok_or(GrammarError::UnknownStart(s))?,
        None => RuleId(0),
    };
    let nullable = GrammarSpec::compute_nullable(&rules);
    Ok(GrammarSpec { name: name.to_string(), tokens, rules, start_rule, nullable })
}

/// The bundled property-list grammar.
pub fn plist_xml() -> GrammarSpec {
    load_grammar_named("plist-xml", PLIST_XML_GRAMMAR.as_bytes()).expect("bundled plist grammar is valid")
}

/// The bundled mini-JS grammar.
pub fn minijs() -> GrammarSpec {
    load_grammar_named("minijs", MINIJS_GRAMMAR.as_bytes()).expect("bundled minijs grammar is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_grammar() {
        let g = load_grammar(b"start := NUM ; NUM := /[0-9]+/ ; WS skip /[ \\t\\n]+/").unwrap();
        assert_eq!(g.rules.len(), 1);
        assert_eq!(g.tokens.len(), 2);
        assert_eq!(g.rule_name(g.start_rule), "start");
        assert!(g.tokens[1].skip);
    }

    #[test]
    fn start_directive_overrides_first_rule() {
        let g = load_grammar(b"start b ;\na := X ;\nb := a a ;\nX := /x/ ;").unwrap();
        assert_eq!(g.rule_name(g.start_rule), "b");
    }

    #[test]
    fn undefined_symbol_is_named() {
        let err = load_grammar(b"prog := expr ;").unwrap_err();
        assert_eq!(err, GrammarError::UndefinedSymbol { name: "expr".into(), rule: "prog".into() });
    }

    #[test]
    fn duplicates_are_rejected() {
        assert_eq!(
            load_grammar(b"a := X ; a := X ; X := /x/ ;").unwrap_err(),
            GrammarError::Duplicate("a".into())
        );
        assert_eq!(
            load_grammar(b"a := X ; X := /x/ ; X := /y/ ;").unwrap_err(),
            GrammarError::Duplicate("X".into())
        );
        assert_eq!(load_grammar(b"a := a ; a := /x/ ;").unwrap_err(), GrammarError::Duplicate("a".into()));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match load_grammar(b"a := X ;\nX := /x/ ;\nb = X ;").unwrap_err() {
            GrammarError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 3)),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(load_grammar(b"X := /abc"), Err(GrammarError::Syntax { line: 1, .. })));
    }

    #[test]
    fn empty_matching_token_rejected() {
        assert_eq!(load_grammar(b"a := E ; E := /x?/ ;").map(|_| ()), Ok(()));
        assert_eq!(load_grammar(b"a := E ; E := /()/ ;").unwrap_err(), GrammarError::EmptyToken("E".into()));
    }

    #[test]
    fn empty_alternatives_and_nullability() {
        let g = load_grammar(b"s := A opt ; opt := A | ; A := /a/ ;").unwrap();
        assert!(!g.is_nullable(RuleId(0)));
        assert!(g.is_nullable(RuleId(1)));
    }

    #[test]
    fn bundled_grammars_load() {
        assert_eq!(plist_xml().symbol_count(), 8);
        let js = minijs();
        let lits = js.terminal_literals();
        assert!(lits.contains(&b"var".to_vec()));
        assert!(lits.contains(&b"function".to_vec()));
    }

    #[test]
    fn display_round_trips() {
        let g = minijs();
        let again = load_grammar(g.to_string().as_bytes()).unwrap();
        assert_eq!(again.rules.len(), g.rules.len());
        assert_eq!(again.tokens.len(), g.tokens.len());
        assert_eq!(again.to_string(), g.to_string());
    }

    #[test]
    fn minijs_declaration_subtrees() {
        let g = minijs();
        let t = parse(&g, b"var x=1;").unwrap();
        let names: Vec<&str> = enumerate_subtrees(&t, None).iter().map(|s| g.rule_name(s.kind)).collect();
        assert_eq!(names, ["stmt", "expr", "primary"]);
    }

    #[test]
    fn plist_document_parses_and_mangled_header_does_not() {
        let g = plist_xml();
        let doc: &[u8] = b"<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<!DOCTYPE plist PUBLIC \"-//Apple//DTD PLIST 1.0//EN\" \"http://www.apple.com/DTDs/PropertyList-1.0.dtd\">\n\
<plist version=\"1.0\">\n<dict>\n  <key>Name</key>\n  <string>demo</string>\n  <key>List</key>\n  <array>\n    <integer>1</integer>\n    <true/>\n  </array>\n</dict>\n</plist>\n";
        let t = parse(&g, doc).unwrap();
        assert_eq!(t.serialize(), doc);
        let mangled = [b"<?xmn".as_slice(), &doc[5..]].concat();
        assert_eq!(parse(&g, &mangled), Err(ParseError::Tokenize { offset: 0 }));
    }
}
