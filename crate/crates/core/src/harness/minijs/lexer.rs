use super::*;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Str(Vec<u8>),
    Ident(String),
    Kw(&'static str),
    Op(&'static str),
}

const KEYWORDS: &[&str] = &[
    "var", "function", "if", "else", "while", "for", "return", "try", "catch", "throw", "break", "continue", "true",
    "false", "null",
];

// Longest first so that maximal munch falls out of a linear scan.
const OPS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "=", ";", ",", ".", "(", ")", "{",
    "}", "[", "]",
];

fn ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$'
}

fn ident_byte(b: u8) -> bool {
    ident_start(b) || b.is_ascii_digit()
}

fn lex_number(src: &[u8], i: &mut usize, sink: &mut CoverageSink) -> Option<f64> {
    let start = *i;
    if src[*i..].starts_with(b"0x") || src[*i..].starts_with(b"0X") {
        sink.hit(LEX_NUMBER_HEX);
        *i += 2;
        let h0 = *i;
        while *i < src.len() && src[*i].is_ascii_hexdigit() {
            *i += 1;
        }
        if *i == h0 {
            sink.hit(LEX_ERR_NUMBER);
            return None;
        }
        let text = std::str::from_utf8(&src[h0..*i]).ok()?;
        return Some(u64::from_str_radix(text, 16).map(|v| v as f64).unwrap_or(f64::INFINITY));
    }
    while *i < src.len() && src[*i].is_ascii_digit() {
        *i += 1;
    }
    if src.get(*i) == Some(&b'.') && src.get(*i + 1).is_some_and(u8::is_ascii_digit) {
        sink.hit(LEX_NUMBER_FRAC);
        *i += 1;
        while *i < src.len() && src[*i].is_ascii_digit() {
            *i += 1;
        }
    }
    if matches!(src.get(*i), Some(b'e' | b'E')) {
        let mut j = *i + 1;
        if matches!(src.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if src.get(j).is_some_and(u8::is_ascii_digit) {
            sink.hit(LEX_NUMBER_EXP);
            while j < src.len() && src[j].is_ascii_digit() {
                j += 1;
            }
            *i = j;
        }
    }
    if src.get(*i).is_some_and(|b| ident_byte(*b)) {
        sink.hit(LEX_ERR_NUMBER);
        return None;
    }
    std::str::from_utf8(&src[start..*i]).ok()?.parse().ok()
}

fn lex_string(src: &[u8], i: &mut usize, sink: &mut CoverageSink) -> Option<Vec<u8>> {
    let quote = src[*i];
    *i += 1;
    let mut out = Vec::new();
    loop {
        match src.get(*i) {
            None | Some(b'\n') => {
                sink.hit(LEX_ERR_STRING);
                return None;
            }
            Some(&b) if b == quote => {
                *i += 1;
                return Some(out);
            }
            Some(b'\\') => {
                sink.hit(LEX_STRING_ESCAPE);
                let Some(&e) = src.get(*i + 1).filter(|e| **e != b'\n') else {
                    sink.hit(LEX_ERR_STRING);
                    return None;
                };
                out.push(match e {
                    b'n' => b'\n',
                    b't' => b'\t',
                    b'0' => 0,
                    other => other,
                });
                *i += 2;
            }
            Some(&b) => {
                out.push(b);
                *i += 1;
            }
        }
    }
}

pub fn lex(src: &[u8], sink: &mut CoverageSink) -> Option<Vec<Tok>> {
    sink.hit(LEX_START);
    if src.is_empty() {
        sink.hit(LEX_EMPTY);
    }
    let mut toks = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let b = src[i];
        if b.is_ascii_whitespace() {
            sink.hit(LEX_WS);
            while i < src.len() && src[i].is_ascii_whitespace() {
                i += 1;
            }
        } else if src[i..].starts_with(b"//") {
            sink.hit(LEX_LINE_COMMENT);
            while i < src.len() && src[i] != b'\n' {
                i += 1;
            }
        } else if src[i..].starts_with(b"/*") {
            sink.hit(LEX_BLOCK_COMMENT);
            let Some(end) = src[i + 2..].windows(2).position(|w| w == b"*/") else {
                sink.hit(LEX_ERR_COMMENT);
                return None;
            };
            i += end + 4;
        } else if ident_start(b) {
            let s = i;
            while i < src.len() && ident_byte(src[i]) {
                i += 1;
            }
            let word = std::str::from_utf8(&src[s..i]).ok()?;
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => {
                    sink.hit(LEX_KEYWORD);
                    toks.push(Tok::Kw(k));
                }
                None => {
                    sink.hit(LEX_IDENT);
                    toks.push(Tok::Ident(word.to_string()));
                }
            }
        } else if b.is_ascii_digit() {
            sink.hit(LEX_NUMBER);
            toks.push(Tok::Num(lex_number(src, &mut i, sink)?));
        } else if b == b'"' || b == b'\'' {
            sink.hit(LEX_STRING);
            toks.push(Tok::Str(lex_string(src, &mut i, sink)?));
        } else if let Some(op) = OPS.iter().find(|op| src[i..].starts_with(op.as_bytes())) {
            sink.hit(LEX_OP);
            toks.push(Tok::Op(op));
            i += op.len();
        } else {
            sink.hit(LEX_ERR_CHAR);
            return None;
        }
    }
    sink.hit(LEX_DONE);
    Some(toks)
}
