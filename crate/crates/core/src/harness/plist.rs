//! Toy XML property-list reader: tokenizer, well-formedness checker and
//! value interpreter, instrumented block by block.
//!
//! Planted fault: a well-formed `<data>` element whose payload decodes to
//! exactly 13 bytes panics in the interpreter.

use super::CoverageSink;

crate::define_blocks! {
    Parse {
        TOK_START = "plist.tok.start",
        TOK_EMPTY_INPUT = "plist.tok.empty_input",
        TOK_DECL = "plist.tok.decl",
        TOK_DOCTYPE = "plist.tok.doctype",
        TOK_COMMENT = "plist.tok.comment",
        TOK_OPEN = "plist.tok.open",
        TOK_CLOSE = "plist.tok.close",
        TOK_SELF_CLOSE = "plist.tok.self_close",
        TOK_ATTR = "plist.tok.attr",
        TOK_TEXT = "plist.tok.text",
        TOK_WS = "plist.tok.ws",
        TOK_ENTITY = "plist.tok.entity",
        TOK_ERR_EOF = "plist.tok.err_eof",
        TOK_ERR_NAME = "plist.tok.err_name",
        TOK_ERR_ATTR = "plist.tok.err_attr",
        TOK_ERR_ENTITY = "plist.tok.err_entity",
        TOK_DONE = "plist.tok.done",
    }
    Check {
        WF_START = "plist.wf.start",
        WF_PUSH = "plist.wf.push",
        WF_POP = "plist.wf.pop",
        WF_ERR_MISMATCH = "plist.wf.err_mismatch",
        WF_ERR_UNCLOSED = "plist.wf.err_unclosed",
        WF_ERR_ROOT = "plist.wf.err_root",
        WF_ERR_TRAILING = "plist.wf.err_trailing",
        WF_VERSION = "plist.wf.version",
        WF_ERR_VERSION = "plist.wf.err_version",
        WF_ERR_ELEMENT = "plist.wf.err_element",
        WF_ERR_TEXT = "plist.wf.err_text",
        WF_ERR_KEY_POS = "plist.wf.err_key_pos",
        WF_ERR_DICT_ORDER = "plist.wf.err_dict_order",
        WF_ERR_NESTING = "plist.wf.err_nesting",
        WF_OK = "plist.wf.ok",
    }
    Eval {
        VAL_START = "plist.val.start",
        VAL_EMPTY_PLIST = "plist.val.empty_plist",
        VAL_DICT = "plist.val.dict",
        VAL_DICT_ENTRY = "plist.val.dict_entry",
        VAL_DUP_KEY = "plist.val.dup_key",
        VAL_ARRAY = "plist.val.array",
        VAL_ARRAY_ITEM = "plist.val.array_item",
        VAL_STRING = "plist.val.string",
        VAL_STRING_EMPTY = "plist.val.string_empty",
        VAL_INT = "plist.val.int",
        VAL_INT_NEG = "plist.val.int_neg",
        VAL_INT_HEX = "plist.val.int_hex",
        VAL_INT_OVERFLOW = "plist.val.int_overflow",
        VAL_INT_BAD = "plist.val.int_bad",
        VAL_REAL = "plist.val.real",
        VAL_REAL_EXP = "plist.val.real_exp",
        VAL_REAL_SPECIAL = "plist.val.real_special",
        VAL_REAL_BAD = "plist.val.real_bad",
        VAL_BOOL_TRUE = "plist.val.true",
        VAL_BOOL_FALSE = "plist.val.false",
        VAL_DATE = "plist.val.date",
        VAL_DATE_LEAP = "plist.val.date_leap",
        VAL_DATE_BAD = "plist.val.date_bad",
        VAL_DATA = "plist.val.data",
        VAL_DATA_WS = "plist.val.data_ws",
        VAL_DATA_PAD = "plist.val.data_pad",
        VAL_DATA_BAD = "plist.val.data_bad",
        VAL_DATA_EMPTY = "plist.val.data_empty",
        VAL_DATA_LARGE = "plist.val.data_large",
        VAL_DEEP = "plist.val.deep",
        VAL_DONE = "plist.val.done",
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(Vec<u8>, Vec<(Vec<u8>, Vec<u8>)>),
    Close(Vec<u8>),
    SelfClose(Vec<u8>),
    Text(Vec<u8>),
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b == b':' || b == b'.'
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn decode_entities(text: &[u8], sink: &mut CoverageSink) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        if text[i] == b'&' {
            sink.hit(TOK_ENTITY);
            let end = text[i..].iter().position(|b| *b == b';')? + i;
            let rep = match &text[i + 1..end] {
                b"lt" => b'<',
                b"gt" => b'>',
                b"amp" => b'&',
                b"quot" => b'"',
                b"apos" => b'\'',
                _ => {
                    sink.hit(TOK_ERR_ENTITY);
                    return None;
                }
            };
            out.push(rep);
            i = end + 1;
        } else {
            out.push(text[i]);
            i += 1;
        }
    }
    Some(out)
}

fn tokenize(input: &[u8], sink: &mut CoverageSink) -> Option<Vec<Tok>> {
    sink.hit(TOK_START);
    if input.is_empty() {
        sink.hit(TOK_EMPTY_INPUT);
        return None;
    }
    let mut toks = Vec::new();
    let mut i = 0;
    while i < input.len() {
        let rest = &input[i..];
        if rest[0] != b'<' {
            let end = rest.iter().position(|b| *b == b'<').unwrap_or(rest.len());
            let text = &rest[..end];
            if text.iter().all(u8::is_ascii_whitespace) {
                sink.hit(TOK_WS);
            } else {
                sink.hit(TOK_TEXT);
                toks.push(Tok::Text(decode_entities(text, sink)?));
            }
            i += end;
            continue;
        }
        if rest.starts_with(b"<?") {
            sink.hit(TOK_DECL);
            let Some(end) = find(rest, b"?>") else {
                sink.hit(TOK_ERR_EOF);
                return None;
            };
            if !rest[2..].starts_with(b"xml") {
                sink.hit(TOK_ERR_NAME);
                return None;
            }
            i += end + 2;
        } else if rest.starts_with(b"<!--") {
            sink.hit(TOK_COMMENT);
            let Some(end) = find(&rest[4..], b"-->") else {
                sink.hit(TOK_ERR_EOF);
                return None;
            };
            i += end + 7;
        } else if rest.starts_with(b"<!") {
            sink.hit(TOK_DOCTYPE);
            let Some(end) = rest.iter().position(|b| *b == b'>') else {
                sink.hit(TOK_ERR_EOF);
                return None;
            };
            i += end + 1;
        } else {
            let closing = rest.get(1) == Some(&b'/');
            let mut j = if closing { 2 } else { 1 };
            let name_start = j;
            while j < rest.len() && is_name_byte(rest[j]) {
                j += 1;
            }
            if j == name_start {
                sink.hit(TOK_ERR_NAME);
                return None;
            }
            let name = rest[name_start..j].to_vec();
            let mut attrs = Vec::new();
            loop {
                while j < rest.len() && rest[j].is_ascii_whitespace() {
                    j += 1;
                }
                match rest.get(j) {
                    None => {
                        sink.hit(TOK_ERR_EOF);
                        return None;
                    }
                    Some(b'>') => {
                        if closing {
                            sink.hit(TOK_CLOSE);
                            toks.push(Tok::Close(name));
                        } else {
                            sink.hit(TOK_OPEN);
                            toks.push(Tok::Open(name, attrs));
                        }
                        j += 1;
                        break;
                    }
                    Some(b'/') if !closing && rest.get(j + 1) == Some(&b'>') => {
                        sink.hit(TOK_SELF_CLOSE);
                        toks.push(Tok::SelfClose(name));
                        j += 2;
                        break;
                    }
                    Some(b) if is_name_byte(*b) && !closing => {
                        sink.hit(TOK_ATTR);
                        let a0 = j;
                        while j < rest.len() && is_name_byte(rest[j]) {
                            j += 1;
                        }
                        let key = rest[a0..j].to_vec();
                        if rest.get(j) != Some(&b'=') || rest.get(j + 1) != Some(&b'"') {
                            sink.hit(TOK_ERR_ATTR);
                            return None;
                        }
                        let v0 = j + 2;
                        let Some(len) = rest[v0..].iter().position(|b| *b == b'"') else {
                            sink.hit(TOK_ERR_EOF);
                            return None;
                        };
                        attrs.push((key, rest[v0..v0 + len].to_vec()));
                        j = v0 + len + 1;
                    }
                    Some(_) => {
                        sink.hit(TOK_ERR_ATTR);
                        return None;
                    }
                }
            }
            i += j;
        }
    }
    sink.hit(TOK_DONE);
    Some(toks)
}

#[derive(Debug, Clone, PartialEq)]
enum Elem {
    Node(Vec<u8>, Vec<(Vec<u8>, Vec<u8>)>, Vec<Elem>),
    Text(Vec<u8>),
}

const SCALARS: [&[u8]; 7] = [b"string", b"data", b"integer", b"real", b"date", b"true", b"false"];

fn known(name: &[u8]) -> bool {
    matches!(name, b"plist" | b"dict" | b"array" | b"key") || SCALARS.contains(&name)
}

// An element still open: name, attributes, children so far.
type Open = (Vec<u8>, Vec<(Vec<u8>, Vec<u8>)>, Vec<Elem>);

/// Balance tags into an element tree and check the property-list shape.
fn well_formed(toks: Vec<Tok>, sink: &mut CoverageSink) -> Option<Elem> {
    sink.hit(WF_START);
    let mut stack: Vec<Open> = Vec::new();
    let mut root = None;
    for t in toks {
        if root.is_some() {
            sink.hit(WF_ERR_TRAILING);
            return None;
        }
        let finished = match t {
            Tok::Open(name, attrs) => {
                sink.hit(WF_PUSH);
                stack.push((name, attrs, Vec::new()));
                None
            }
            Tok::SelfClose(name) => Some(Elem::Node(name, Vec::new(), Vec::new())),
            Tok::Text(text) => match stack.last_mut() {
                Some(top) => {
                    top.2.push(Elem::Text(text));
                    None
                }
                None => {
                    sink.hit(WF_ERR_TEXT);
                    return None;
                }
            },
            Tok::Close(name) => {
                sink.hit(WF_POP);
                match stack.pop() {
                    Some((open, attrs, kids)) if open == name => Some(Elem::Node(open, attrs, kids)),
                    _ => {
                        sink.hit(WF_ERR_MISMATCH);
                        return None;
                    }
                }
            }
        };
        if let Some(e) = finished {
            match stack.last_mut() {
                Some(top) => top.2.push(e),
                None => root = Some(e),
            }
        }
    }
    if !stack.is_empty() || root.is_none() {
        sink.hit(WF_ERR_UNCLOSED);
        return None;
    }
    let root = root?;
    let Elem::Node(name, attrs, kids) = &root else { return None };
    if name != b"plist" {
        sink.hit(WF_ERR_ROOT);
        return None;
    }
    if let Some((_, v)) = attrs.iter().find(|(k, _)| k == b"version") {
        sink.hit(WF_VERSION);
        if v != b"1.0" {
            sink.hit(WF_ERR_VERSION);
            return None;
        }
    }
    let values: Vec<&Elem> = kids.iter().collect();
    if values.len() > 1 {
        sink.hit(WF_ERR_NESTING);
        return None;
    }
    for v in values {
        check_value(v, sink, 0)?;
    }
    sink.hit(WF_OK);
    Some(root)
}

fn check_value(e: &Elem, sink: &mut CoverageSink, depth: usize) -> Option<()> {
    let Elem::Node(name, _, kids) = e else {
        sink.hit(WF_ERR_TEXT);
        return None;
    };
    if !known(name) || name == b"plist" {
        sink.hit(WF_ERR_ELEMENT);
        return None;
    }
    if depth > 64 {
        sink.hit(WF_ERR_NESTING);
        return None;
    }
    match name.as_slice() {
        b"key" => {
            sink.hit(WF_ERR_KEY_POS);
            None
        }
        b"dict" => {
            if kids.len() % 2 != 0 {
                sink.hit(WF_ERR_DICT_ORDER);
                return None;
            }
            for pair in kids.chunks(2) {
                match &pair[0] {
                    Elem::Node(k, _, kk) if k == b"key" && kk.iter().all(|c| matches!(c, Elem::Text(_))) => {}
                    _ => {
                        sink.hit(WF_ERR_DICT_ORDER);
                        return None;
                    }
                }
                check_value(&pair[1], sink, depth + 1)?;
            }
            Some(())
        }
        b"array" => kids.iter().try_for_each(|k| check_value(k, sink, depth + 1)),
        _ => {
            if kids.iter().all(|k| matches!(k, Elem::Text(_))) {
                Some(())
            } else {
                sink.hit(WF_ERR_NESTING);
                None
            }
        }
    }
}

fn text_of(kids: &[Elem]) -> Vec<u8> {
    let mut out = Vec::new();
    for k in kids {
        if let Elem::Text(t) = k {
            out.extend_from_slice(t);
        }
    }
    out
}

fn parse_int(text: &[u8], sink: &mut CoverageSink) {
    let t = text.trim_ascii();
    let (neg, digits) = match t.first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    if neg {
        sink.hit(VAL_INT_NEG);
    }
    let (radix, digits) = if digits.starts_with(b"0x") || digits.starts_with(b"0X") {
        sink.hit(VAL_INT_HEX);
        (16, &digits[2..])
    } else {
        (10, digits)
    };
    if digits.is_empty() {
        sink.hit(VAL_INT_BAD);
        return;
    }
    let mut v: u64 = 0;
    for &d in digits {
        let Some(x) = (d as char).to_digit(radix) else {
            sink.hit(VAL_INT_BAD);
            return;
        };
        match v.checked_mul(radix as u64).and_then(|v| v.checked_add(x as u64)) {
            Some(n) => v = n,
            None => {
                sink.hit(VAL_INT_OVERFLOW);
                return;
            }
        }
    }
    sink.hit(VAL_INT);
}

fn parse_real(text: &[u8], sink: &mut CoverageSink) {
    let t = text.trim_ascii();
    match t {
        b"nan" | b"+infinity" | b"-infinity" | b"inf" | b"-inf" => {
            sink.hit(VAL_REAL_SPECIAL);
            return;
        }
        _ => {}
    }
    if t.iter().any(|b| *b == b'e' || *b == b'E') {
        sink.hit(VAL_REAL_EXP);
    }
    match std::str::from_utf8(t).ok().and_then(|s| s.parse::<f64>().ok()) {
        Some(_) => sink.hit(VAL_REAL),
        None => sink.hit(VAL_REAL_BAD),
    }
}

fn num(t: &[u8]) -> Option<u32> {
    if t.is_empty() || !t.iter().all(u8::is_ascii_digit) {
        return None;
    }
    std::str::from_utf8(t).ok()?.parse().ok()
}

fn parse_date(text: &[u8], sink: &mut CoverageSink) {
    // YYYY-MM-DDTHH:MM:SSZ
    let t = text.trim_ascii();
    let ok = t.len() == 20
        && t[4] == b'-'
        && t[7] == b'-'
        && t[10] == b'T'
        && t[13] == b':'
        && t[16] == b':'
        && t[19] == b'Z';
    let fields = ok.then(|| {
        [num(&t[0..4]), num(&t[5..7]), num(&t[8..10]), num(&t[11..13]), num(&t[14..16]), num(&t[17..19])]
    });
    let Some([Some(y), Some(mo), Some(d), Some(h), Some(mi), Some(s)]) = fields else {
        sink.hit(VAL_DATE_BAD);
        return;
    };
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match mo {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => 0,
    };
    if d == 0 || d > days || h > 23 || mi > 59 || s > 59 {
        sink.hit(VAL_DATE_BAD);
        return;
    }
    if mo == 2 && d == 29 {
        sink.hit(VAL_DATE_LEAP);
    }
    sink.hit(VAL_DATE);
}

fn b64_value(b: u8) -> Option<u32> {
    Some(match b {
        b'A'..=b'Z' => b - b'A',
        b'a'..=b'z' => b - b'a' + 26,
        b'0'..=b'9' => b - b'0' + 52,
        b'+' => 62,
        b'/' => 63,
        _ => return None,
    } as u32)
}

fn decode_data(text: &[u8], sink: &mut CoverageSink) -> Option<Vec<u8>> {
    let mut clean = Vec::with_capacity(text.len());
    for &b in text {
        if b.is_ascii_whitespace() {
            sink.hit(VAL_DATA_WS);
        } else {
            clean.push(b);
        }
    }
    if clean.len() % 4 != 0 {
        sink.hit(VAL_DATA_BAD);
        return None;
    }
    let mut out = Vec::new();
    for (ci, chunk) in clean.chunks(4).enumerate() {
        let last = ci + 1 == clean.len() / 4;
        let pad = chunk.iter().rev().take_while(|b| **b == b'=').count();
        if pad > 2 || (pad > 0 && !last) {
            sink.hit(VAL_DATA_BAD);
            return None;
        }
        if pad > 0 {
            sink.hit(VAL_DATA_PAD);
        }
        let mut acc = 0u32;
        for &b in &chunk[..4 - pad] {
            acc = (acc << 6) | b64_value(b).or_else(|| {
                sink.hit(VAL_DATA_BAD);
                None
            })?;
        }
        acc <<= 6 * pad as u32;
        let bytes = [(acc >> 16) as u8, (acc >> 8) as u8, acc as u8];
        out.extend_from_slice(&bytes[..3 - pad]);
    }
    Some(out)
}

fn interpret(e: &Elem, sink: &mut CoverageSink, depth: usize) {
    let Elem::Node(name, _, kids) = e else { return };
    if depth > 8 {
        sink.hit(VAL_DEEP);
    }
    match name.as_slice() {
        b"dict" => {
            sink.hit(VAL_DICT);
            let mut keys: Vec<Vec<u8>> = Vec::new();
            for pair in kids.chunks(2) {
                sink.hit(VAL_DICT_ENTRY);
                let Elem::Node(_, _, kk) = &pair[0] else { continue };
                let key = text_of(kk);
                if keys.contains(&key) {
                    sink.hit(VAL_DUP_KEY);
                }
                keys.push(key);
                interpret(&pair[1], sink, depth + 1);
            }
        }
        b"array" => {
            sink.hit(VAL_ARRAY);
            for k in kids {
                sink.hit(VAL_ARRAY_ITEM);
                interpret(k, sink, depth + 1);
            }
        }
        b"string" => {
            if kids.is_empty() {
                sink.hit(VAL_STRING_EMPTY);
            } else {
                sink.hit(VAL_STRING);
            }
        }
        b"integer" => parse_int(&text_of(kids), sink),
        b"real" => parse_real(&text_of(kids), sink),
        b"true" => sink.hit(VAL_BOOL_TRUE),
        b"false" => sink.hit(VAL_BOOL_FALSE),
        b"date" => parse_date(&text_of(kids), sink),
        b"data" => {
            sink.hit(VAL_DATA);
            let Some(bytes) = decode_data(&text_of(kids), sink) else { return };
            match bytes.len() {
                0 => sink.hit(VAL_DATA_EMPTY),
                13 => {
                    // Sized header read past a 12-byte buffer.
                    let header = [0u8; 12];
                    let idx = bytes.len() - 1;
                    panic!("planted: data header read at {idx} of {}", header.len());
                }
                n if n > 64 => sink.hit(VAL_DATA_LARGE),
                _ => {}
            }
        }
        _ => {}
    }
}

/// Target entry point.
pub fn run(input: &[u8], sink: &mut CoverageSink) {
    let Some(toks) = tokenize(input, sink) else { return };
    let Some(root) = well_formed(toks, sink) else { return };
    sink.hit(VAL_START);
    let Elem::Node(_, _, kids) = &root else { return };
    match kids.first() {
        Some(v) => interpret(v, sink, 0),
        None => sink.hit(VAL_EMPTY_PLIST),
    }
    sink.hit(VAL_DONE);
}
