use super::{GrammarSpec, ParseError, Span, TokenId};

/// One lexed token, trivia included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme {
    pub token: TokenId,
    pub span: Span,
    pub skip: bool,
}

/// Split `input` into lexemes by maximal munch; on equal lengths the token
/// defined first wins. Trivia (skip tokens) is kept in the output.
pub fn tokenize(g: &GrammarSpec, input: &[u8]) -> Result<Vec<Lexeme>, ParseError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < input.len() {
        let rest = &input[pos..];
        let mut best: Option<(usize, usize)> = None;
        for (i, t) in g.tokens.iter().enumerate() {
            if let Some(len) = t.longest_match(rest) {
                if best.is_none_or(|(_, l)| len > l) {
                    best = Some((i, len));
                }
            }
        }
        let Some((i, len)) = best else {
            return Err(ParseError::Tokenize { offset: pos });
        };
        out.push(Lexeme {
            token: TokenId(i as u32),
            span: Span::new(pos, pos + len),
            skip: g.tokens[i].skip,
        });
        pos += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;

    #[test]
    fn keywords_win_ties_identifiers_win_longer() {
        let g = load_grammar(
            b"p := X ; VAR := /var/ ; ID := /[a-z]+/ ; X := /=/ ; WS skip /[ ]+/ ;",
        )
        .unwrap();
        let lx = tokenize(&g, b"var variable").unwrap();
        let names: Vec<&str> = lx.iter().map(|l| g.token_name(l.token)).collect();
        assert_eq!(names, ["VAR", "WS", "ID"]);
        assert_eq!(lx[2].span, Span::new(4, 12));
        assert!(lx[1].skip);
    }

    #[test]
    fn failure_offset() {
        let g = load_grammar(b"p := A ; A := /a/ ;").unwrap();
        assert_eq!(tokenize(&g, b"aab"), Err(ParseError::Tokenize { offset: 2 }));
    }
}
