use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::ast::{BinOp, Expr, Function, Program, Stmt, UnOp};
use super::*;

const FUEL: u64 = 20_000;
const MAX_CALL_DEPTH: usize = 40;
const MAX_PRINT_DEPTH: usize = 256;
const MAX_EVAL_DEPTH: usize = 4;
const MAX_STR: usize = 1 << 14;

#[derive(Debug, Clone)]
enum V {
    Undef,
    Null,
    Bool(bool),
    Num(f64),
    Str(Vec<u8>),
    Arr(Rc<RefCell<Vec<V>>>),
    Func(Rc<Function>),
    Builtin(&'static str),
    RegExp,
}

enum Ctrl {
    Throw(V),
    Halt,
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(V),
}

type R<T> = Result<T, Ctrl>;

/// Last successful match, shared by every string operation.
#[derive(Default)]
struct MatchState {
    input: Vec<u8>,
    start: usize,
    end: usize,
}

struct Interp<'s> {
    sink: &'s mut CoverageSink,
    globals: HashMap<String, V>,
    frames: Vec<HashMap<String, V>>,
    fuel: u64,
    eval_depth: usize,
    re: MatchState,
}

fn num_to_str(n: f64) -> Vec<u8> {
    if n.is_nan() {
        b"NaN".to_vec()
    } else if n.is_infinite() {
        if n > 0.0 { b"Infinity".to_vec() } else { b"-Infinity".to_vec() }
    } else if n == n.trunc() && n.abs() < 1e21 {
        format!("{}", n as i64).into_bytes()
    } else {
        format!("{n}").into_bytes()
    }
}

fn to_str(v: &V) -> Vec<u8> {
    to_str_in(v, &mut Vec::new())
}

// `open` holds the arrays being printed; a cycle, or nesting past
// MAX_PRINT_DEPTH, prints as empty.
fn to_str_in(v: &V, open: &mut Vec<*const RefCell<Vec<V>>>) -> Vec<u8> {
    match v {
        V::Undef => b"undefined".to_vec(),
        V::Null => b"null".to_vec(),
        V::Bool(b) => if *b { b"true".to_vec() } else { b"false".to_vec() },
        V::Num(n) => num_to_str(*n),
        V::Str(s) => s.clone(),
        V::Arr(a) => join_array(a, b",", open),
        V::Func(f) => format!("function {}", f.name).into_bytes(),
        V::Builtin(name) => format!("function {name}").into_bytes(),
        V::RegExp => b"RegExp".to_vec(),
    }
}

fn join_array(a: &Rc<RefCell<Vec<V>>>, sep: &[u8], open: &mut Vec<*const RefCell<Vec<V>>>) -> Vec<u8> {
    let p = Rc::as_ptr(a);
    if open.len() >= MAX_PRINT_DEPTH || open.contains(&p) {
        return Vec::new();
    }
    open.push(p);
    let mut out = Vec::new();
    for (i, v) in a.borrow().iter().enumerate() {
        if i > 0 {
            out.extend_from_slice(sep);
        }
        if !matches!(v, V::Undef | V::Null) {
            out.extend(to_str_in(v, open));
        }
        if out.len() > MAX_STR {
            break;
        }
    }
    open.pop();
    out
}

fn str_to_num(s: &[u8]) -> f64 {
    let t = s.trim_ascii();
    if t.is_empty() {
        return 0.0;
    }
    if let Some(hex) = t.strip_prefix(b"0x") {
        return std::str::from_utf8(hex).ok().and_then(|h| u64::from_str_radix(h, 16).ok()).map_or(f64::NAN, |v| v as f64);
    }
    match t {
        b"Infinity" => return f64::INFINITY,
        b"-Infinity" => return f64::NEG_INFINITY,
        _ => {}
    }
    if !t.iter().all(|b| b.is_ascii_digit() || b"+-.eE".contains(b)) {
        return f64::NAN;
    }
    std::str::from_utf8(t).ok().and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)
}

fn to_num(v: &V) -> f64 {
    match v {
        V::Undef => f64::NAN,
        V::Null => 0.0,
        V::Bool(b) => *b as u8 as f64,
        V::Num(n) => *n,
        V::Str(s) => str_to_num(s),
        _ => f64::NAN,
    }
}

fn truthy(v: &V) -> bool {
    match v {
        V::Undef | V::Null => false,
        V::Bool(b) => *b,
        V::Num(n) => *n != 0.0 && !n.is_nan(),
        V::Str(s) => !s.is_empty(),
        _ => true,
    }
}

/// Clamp a numeric argument to an index in `[0, len]`.
fn clamp_index(n: f64, len: usize) -> usize {
    if n.is_nan() || n <= 0.0 {
        0
    } else if n >= len as f64 {
        len
    } else {
        n as usize
    }
}

fn type_error(msg: &str) -> Ctrl {
    Ctrl::Throw(V::Str(format!("TypeError: {msg}").into_bytes()))
}

impl Interp<'_> {
    fn tick(&mut self) -> R<()> {
        if self.fuel == 0 {
            self.sink.hit(EVAL_FUEL_OUT);
            return Err(Ctrl::Halt);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn lookup(&self, name: &str) -> V {
        if let Some(v) = self.frames.last().and_then(|f| f.get(name)) {
            return v.clone();
        }
        if let Some(v) = self.globals.get(name) {
            return v.clone();
        }
        match name {
            "RegExp" => V::RegExp,
            _ => BUILTINS.iter().find(|b| **b == name).map_or(V::Undef, |b| V::Builtin(b)),
        }
    }

    fn bind(&mut self, name: &str, v: V) {
        match self.frames.last_mut() {
            Some(f) => {
                f.insert(name.to_string(), v);
            }
            None => {
                self.globals.insert(name.to_string(), v);
            }
        }
    }

    fn assign(&mut self, name: &str, v: V) {
        if let Some(f) = self.frames.last_mut() {
            if let Some(slot) = f.get_mut(name) {
                *slot = v;
                return;
            }
        }
        self.globals.insert(name.to_string(), v);
    }

    fn declare_functions(&mut self, body: &[Stmt]) {
        for s in body {
            if let Stmt::Function(f) = s {
                self.bind(&f.name, V::Func(f.clone()));
            }
        }
    }

    fn block(&mut self, body: &[Stmt]) -> R<Flow> {
        for s in body {
            match self.stmt(s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt) -> R<Flow> {
        self.tick()?;
        match s {
            Stmt::Var(name, init) => {
                self.sink.hit(EVAL_VAR);
                let v = match init {
                    Some(e) => self.expr(e)?,
                    None => V::Undef,
                };
                self.bind(name, v);
            }
            Stmt::Assign(target, value) => {
                let v = self.expr(value)?;
                self.store(target, v)?;
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
            Stmt::If(c, a, b) => {
                if truthy(&self.expr(c)?) {
                    self.sink.hit(EVAL_IF_TRUE);
                    return self.stmt(a);
                }
                self.sink.hit(EVAL_IF_FALSE);
                if let Some(b) = b {
                    return self.stmt(b);
                }
            }
            Stmt::While(c, body) => {
                while truthy(&self.expr(c)?) {
                    self.sink.hit(EVAL_LOOP_ITER);
                    match self.stmt(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                }
            }
            Stmt::For(init, c, step, body) => {
                if let Flow::Return(v) = self.stmt(init)? {
                    return Ok(Flow::Return(v));
                }
                while truthy(&self.expr(c)?) {
                    self.sink.hit(EVAL_FOR_ITER);
                    match self.stmt(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    self.expr(step)?;
                }
            }
            Stmt::Function(_) => {}
            Stmt::Return(e) => {
                self.sink.hit(EVAL_RETURN);
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => V::Undef,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Try(body, name, handler) => match self.block(body) {
                Err(Ctrl::Throw(v)) => {
                    self.sink.hit(EVAL_CATCH);
                    self.bind(name, v);
                    return self.block(handler);
                }
                other => return other,
            },
            Stmt::Throw(e) => {
                self.sink.hit(EVAL_THROW);
                let v = self.expr(e)?;
                return Err(Ctrl::Throw(v));
            }
            Stmt::Break => {
                self.sink.hit(EVAL_BREAK);
                return Ok(Flow::Break);
            }
            Stmt::Continue => {
                self.sink.hit(EVAL_CONTINUE);
                return Ok(Flow::Continue);
            }
            Stmt::Block(b) => return self.block(b),
            Stmt::Empty => {}
        }
        Ok(Flow::Normal)
    }

    fn store(&mut self, target: &Expr, v: V) -> R<()> {
        match target {
            Expr::Ident(name) => {
                self.sink.hit(EVAL_ASSIGN);
                self.assign(name, v);
            }
            Expr::Member(obj, prop) => {
                self.sink.hit(EVAL_ASSIGN_MEMBER);
                match (self.expr(obj)?, prop.as_str()) {
                    (V::RegExp, "input") => {
                        self.sink.hit(EVAL_RE_INPUT_SET);
                        // Only the input is replaced; the match bounds stay.
                        self.re.input = to_str(&v);
                    }
                    (V::Arr(a), "length") => {
                        let n = clamp_index(to_num(&v), a.borrow().len());
                        a.borrow_mut().truncate(n);
                    }
                    (V::Undef | V::Null, _) => {
                        self.sink.hit(EVAL_TYPE_ERR);
                        return Err(type_error("cannot set property of null"));
                    }
                    _ => {}
                }
            }
            Expr::Index(obj, idx) => {
                self.sink.hit(EVAL_ASSIGN_INDEX);
                let o = self.expr(obj)?;
                let i = to_num(&self.expr(idx)?);
                match o {
                    V::Arr(a) => {
                        if i.is_nan() || !(0.0..4096.0).contains(&i) {
                            self.sink.hit(EVAL_INDEX_OOB);
                            return Ok(());
                        }
                        let i = i as usize;
                        let mut a = a.borrow_mut();
                        if i >= a.len() {
                            a.resize(i + 1, V::Undef);
                        }
                        a[i] = v;
                    }
                    V::Undef | V::Null => {
                        self.sink.hit(EVAL_TYPE_ERR);
                        return Err(type_error("cannot index null"));
                    }
                    _ => {}
                }
            }
            _ => return Err(type_error("invalid assignment target")),
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> R<V> {
        self.tick()?;
        Ok(match e {
            Expr::Num(n) => V::Num(*n),
            Expr::Str(s) => V::Str(s.clone()),
            Expr::Ident(name) => self.lookup(name),
            Expr::Bool(b) => V::Bool(*b),
            Expr::Null => V::Null,
            Expr::Array(items) => {
                self.sink.hit(EVAL_ARR_LITERAL);
                let mut vals = Vec::with_capacity(items.len());
                for i in items {
                    vals.push(self.expr(i)?);
                }
                V::Arr(Rc::new(RefCell::new(vals)))
            }
            Expr::Unary(UnOp::Not, a) => {
                self.sink.hit(EVAL_NOT);
                V::Bool(!truthy(&self.expr(a)?))
            }
            Expr::Unary(UnOp::Neg, a) => {
                self.sink.hit(EVAL_NEG);
                let n = -to_num(&self.expr(a)?);
                if n == 0.0 && n.is_sign_negative() {
                    self.sink.hit(EVAL_NEG_ZERO);
                }
                V::Num(n)
            }
            Expr::Binary(BinOp::And, a, b) => {
                self.sink.hit(EVAL_AND);
                let l = self.expr(a)?;
                if truthy(&l) { self.expr(b)? } else { l }
            }
            Expr::Binary(BinOp::Or, a, b) => {
                self.sink.hit(EVAL_OR);
                let l = self.expr(a)?;
                if truthy(&l) { l } else { self.expr(b)? }
            }
            Expr::Binary(op, a, b) => {
                let l = self.expr(a)?;
                let r = self.expr(b)?;
                self.binary(*op, l, r)?
            }
            Expr::Member(obj, prop) => {
                let o = self.expr(obj)?;
                self.member(o, prop)?
            }
            Expr::Index(obj, idx) => {
                let o = self.expr(obj)?;
                let i = to_num(&self.expr(idx)?);
                self.index(o, i)?
            }
            Expr::Call(callee, args) => {
                self.sink.hit(EVAL_CALL);
                if let Expr::Member(obj, method) = callee.as_ref() {
                    let o = self.expr(obj)?;
                    let argv = self.args(args)?;
                    return self.method(o, method, argv);
                }
                let f = self.expr(callee)?;
                let argv = self.args(args)?;
                self.call(f, argv)?
            }
        })
    }

    fn args(&mut self, args: &[Expr]) -> R<Vec<V>> {
        args.iter().map(|a| self.expr(a)).collect()
    }

    fn num_result(&mut self, n: f64) -> V {
        if n.is_nan() {
            self.sink.hit(EVAL_NAN);
        } else if n.is_infinite() {
            self.sink.hit(EVAL_INFINITY);
        }
        V::Num(n)
    }

    fn binary(&mut self, op: BinOp, l: V, r: V) -> R<V> {
        Ok(match op {
            BinOp::Add => {
                if matches!(l, V::Str(_) | V::Arr(_)) || matches!(r, V::Str(_) | V::Arr(_)) {
                    self.sink.hit(EVAL_ADD_STR);
                    let mut s = to_str(&l);
                    s.extend(to_str(&r));
                    if s.len() > MAX_STR {
                        self.sink.hit(EVAL_STR_TOO_LONG);
                        return Err(Ctrl::Throw(V::Str(b"RangeError: string too long".to_vec())));
                    }
                    V::Str(s)
                } else {
                    self.sink.hit(EVAL_ADD_NUM);
                    self.num_result(to_num(&l) + to_num(&r))
                }
            }
            BinOp::Sub => {
                self.sink.hit(EVAL_SUB);
                self.num_result(to_num(&l) - to_num(&r))
            }
            BinOp::Mul => {
                self.sink.hit(EVAL_MUL);
                self.num_result(to_num(&l) * to_num(&r))
            }
            BinOp::Div => {
                self.sink.hit(EVAL_DIV);
                let d = to_num(&r);
                if d == 0.0 {
                    self.sink.hit(EVAL_DIV_ZERO);
                }
                self.num_result(to_num(&l) / d)
            }
            BinOp::Mod => {
                self.sink.hit(EVAL_MOD);
                self.num_result(to_num(&l) % to_num(&r))
            }
            BinOp::Eq | BinOp::Ne => {
                self.sink.hit(EVAL_EQ);
                let same = match (&l, &r) {
                    (V::Undef | V::Null, V::Undef | V::Null) => true,
                    (V::Str(a), V::Str(b)) => a == b,
                    (V::Bool(a), V::Bool(b)) => a == b,
                    (V::Arr(a), V::Arr(b)) => Rc::ptr_eq(a, b),
                    (V::Func(a), V::Func(b)) => Rc::ptr_eq(a, b),
                    (V::Num(_) | V::Str(_) | V::Bool(_), V::Num(_) | V::Str(_) | V::Bool(_)) => {
                        self.sink.hit(EVAL_EQ_MIXED);
                        to_num(&l) == to_num(&r)
                    }
                    _ => false,
                };
                V::Bool(same == (op == BinOp::Eq))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = if let (V::Str(a), V::Str(b)) = (&l, &r) {
                    self.sink.hit(EVAL_CMP_STR);
                    Some(a.cmp(b))
                } else {
                    self.sink.hit(EVAL_CMP_NUM);
                    to_num(&l).partial_cmp(&to_num(&r))
                };
                V::Bool(ord.is_some_and(|o| match op {
                    BinOp::Lt => o.is_lt(),
                    BinOp::Le => o.is_le(),
                    BinOp::Gt => o.is_gt(),
                    _ => o.is_ge(),
                }))
            }
            BinOp::And | BinOp::Or => unreachable!("short-circuit operators are handled in expr"),
        })
    }

    fn member(&mut self, o: V, prop: &str) -> R<V> {
        Ok(match (&o, prop) {
            (V::Str(s), "length") => {
                self.sink.hit(EVAL_STR_LENGTH);
                V::Num(s.len() as f64)
            }
            (V::Arr(a), "length") => {
                self.sink.hit(EVAL_ARR_LENGTH);
                V::Num(a.borrow().len() as f64)
            }
            (V::RegExp, "input") => {
                self.sink.hit(EVAL_RE_INPUT_GET);
                V::Str(self.re.input.clone())
            }
            (V::RegExp, "lastMatch") => {
                self.sink.hit(EVAL_RE_LAST);
                let len = self.re.input.len();
                V::Str(self.re.input[self.re.start.min(len)..self.re.end.min(len)].to_vec())
            }
            (V::RegExp, "leftContext") => {
                self.sink.hit(EVAL_RE_LEFT);
                V::Str(self.re.input[..self.re.start.min(self.re.input.len())].to_vec())
            }
            (V::RegExp, "rightContext") => {
                self.sink.hit(EVAL_RE_RIGHT);
                let len = self.re.input.len();
                let n = len.wrapping_sub(self.re.end);
                if n > len {
                    panic!("planted: rightContext length underflow");
                }
                V::Str(self.re.input[self.re.end..].to_vec())
            }
            (V::Undef | V::Null, _) => {
                self.sink.hit(EVAL_TYPE_ERR);
                return Err(type_error("cannot read property of null"));
            }
            _ => V::Undef,
        })
    }

    fn index(&mut self, o: V, i: f64) -> R<V> {
        Ok(match o {
            V::Arr(a) => {
                self.sink.hit(EVAL_INDEX_ARR);
                let a = a.borrow();
                if i.is_nan() || i < 0.0 || i >= a.len() as f64 {
                    self.sink.hit(EVAL_INDEX_OOB);
                    V::Undef
                } else {
                    a[i as usize].clone()
                }
            }
            V::Str(s) => {
                self.sink.hit(EVAL_INDEX_STR);
                if i.is_nan() || i < 0.0 || i >= s.len() as f64 {
                    self.sink.hit(EVAL_INDEX_OOB);
                    V::Undef
                } else {
                    V::Str(vec![s[i as usize]])
                }
            }
            V::Undef | V::Null => {
                self.sink.hit(EVAL_TYPE_ERR);
                return Err(type_error("cannot index null"));
            }
            _ => V::Undef,
        })
    }

    /// Leftmost match of `pat` in `s`, recording it in the match state.
    fn search(&mut self, s: &[u8], pat: &[u8]) -> Option<(usize, usize)> {
        if pat.contains(&b'.') {
            self.sink.hit(EVAL_PAT_DOT);
        }
        if pat.contains(&b'*') {
            self.sink.hit(EVAL_PAT_STAR);
        }
        let (anchored, pat) = match pat.strip_prefix(b"^") {
            Some(p) => {
                self.sink.hit(EVAL_PAT_ANCHOR);
                (true, p)
            }
            None => (false, pat),
        };
        let starts = if anchored { 0..=0 } else { 0..=s.len() };
        for st in starts {
            if let Some(end) = match_here(pat, s, st) {
                self.re = MatchState { input: s.to_vec(), start: st, end };
                return Some((st, end));
            }
        }
        None
    }

    fn method(&mut self, o: V, name: &str, args: Vec<V>) -> R<V> {
        let arg = |i: usize| args.get(i).cloned().unwrap_or(V::Undef);
        match (&o, name) {
            (V::Str(s), "charAt") => {
                self.sink.hit(EVAL_STR_CHARAT);
                let i = to_num(&arg(0));
                let i = if i.is_nan() { 0.0 } else { i.trunc() };
                if i < 0.0 || i >= s.len() as f64 {
                    self.sink.hit(EVAL_STR_CHARAT_OOB);
                    return Ok(V::Str(Vec::new()));
                }
                Ok(V::Str(vec![s[i as usize]]))
            }
            (V::Str(s), "substring") => {
                self.sink.hit(EVAL_STR_SUBSTRING);
                let a = clamp_index(to_num(&arg(0)), s.len());
                let b = match arg(1) {
                    V::Undef => s.len(),
                    v => clamp_index(to_num(&v), s.len()),
                };
                let (a, b) = if a > b {
                    self.sink.hit(EVAL_STR_SUBSTRING_SWAP);
                    (b, a)
                } else {
                    (a, b)
                };
                Ok(V::Str(s[a..b].to_vec()))
            }
            (V::Str(s), "indexOf") => {
                self.sink.hit(EVAL_STR_INDEXOF);
                let needle = to_str(&arg(0));
                let pos = if needle.is_empty() { Some(0) } else { s.windows(needle.len()).position(|w| w == needle) };
                Ok(V::Num(match pos {
                    Some(p) => p as f64,
                    None => {
                        self.sink.hit(EVAL_STR_INDEXOF_MISS);
                        -1.0
                    }
                }))
            }
            (V::Str(s), "toUpperCase") => {
                self.sink.hit(EVAL_STR_UPPER);
                Ok(V::Str(s.to_ascii_uppercase()))
            }
            (V::Str(s), "match") => {
                self.sink.hit(EVAL_STR_MATCH);
                match self.search(s, &to_str(&arg(0))) {
                    Some((a, b)) => Ok(V::Str(s[a..b].to_vec())),
                    None => {
                        self.sink.hit(EVAL_STR_MATCH_MISS);
                        Ok(V::Null)
                    }
                }
            }
            (V::Str(s), "search") => {
                self.sink.hit(EVAL_STR_SEARCH);
                Ok(V::Num(self.search(s, &to_str(&arg(0))).map_or(-1.0, |(a, _)| a as f64)))
            }
            (V::Str(s), "replace") => {
                self.sink.hit(EVAL_STR_REPLACE);
                let rep = to_str(&arg(1));
                match self.search(s, &to_str(&arg(0))) {
                    Some((a, b)) => {
                        let mut out = s[..a].to_vec();
                        out.extend_from_slice(&rep);
                        out.extend_from_slice(&s[b..]);
                        Ok(V::Str(out))
                    }
                    None => Ok(V::Str(s.clone())),
                }
            }
            (V::Arr(a), "push") => {
                self.sink.hit(EVAL_ARR_PUSH);
                let mut a = a.borrow_mut();
                if a.len() + args.len() <= 4096 {
                    a.extend(args.iter().cloned());
                }
                Ok(V::Num(a.len() as f64))
            }
            (V::Arr(a), "pop") => {
                let v = a.borrow_mut().pop();
                Ok(match v {
                    Some(v) => {
                        self.sink.hit(EVAL_ARR_POP);
                        v
                    }
                    None => {
                        self.sink.hit(EVAL_ARR_POP_EMPTY);
                        V::Undef
                    }
                })
            }
            (V::Arr(a), "join") => {
                self.sink.hit(EVAL_ARR_JOIN);
                let sep = match arg(0) {
                    V::Undef => b",".to_vec(),
                    v => to_str(&v),
                };
                Ok(V::Str(join_array(a, &sep, &mut Vec::new())))
            }
            (V::Undef | V::Null, _) => {
                self.sink.hit(EVAL_TYPE_ERR);
                Err(type_error("cannot call method of null"))
            }
            _ => {
                let f = self.member(o, name)?;
                self.call(f, args)
            }
        }
    }

    fn call(&mut self, f: V, args: Vec<V>) -> R<V> {
        match f {
            V::Func(func) => {
                if self.frames.len() >= MAX_CALL_DEPTH {
                    self.sink.hit(EVAL_RECURSION);
                    return Err(Ctrl::Throw(V::Str(b"RangeError: call stack exceeded".to_vec())));
                }
                let mut frame = HashMap::new();
                for (i, p) in func.params.iter().enumerate() {
                    frame.insert(p.clone(), args.get(i).cloned().unwrap_or(V::Undef));
                }
                self.frames.push(frame);
                self.declare_functions(&func.body);
                let flow = self.block(&func.body);
                self.frames.pop();
                match flow? {
                    Flow::Return(v) => Ok(v),
                    _ => Ok(V::Undef),
                }
            }
            V::Builtin(name) => self.builtin(name, args),
            _ => {
                self.sink.hit(EVAL_TYPE_ERR);
                Err(type_error("not a function"))
            }
        }
    }

    fn builtin(&mut self, name: &str, args: Vec<V>) -> R<V> {
        let arg = args.first().cloned().unwrap_or(V::Undef);
        Ok(match name {
            "print" => {
                self.sink.hit(EVAL_PRINT);
                for a in &args {
                    to_str(a);
                }
                V::Undef
            }
            "write" => {
                self.sink.hit(EVAL_WRITE);
                V::Undef
            }
            "Number" => {
                self.sink.hit(EVAL_NUMBER);
                let n = to_num(&arg);
                self.num_result(n)
            }
            "String" => {
                self.sink.hit(EVAL_STRING);
                V::Str(to_str(&arg))
            }
            "parseInt" => {
                self.sink.hit(EVAL_PARSEINT);
                let s = to_str(&arg);
                let t = s.trim_ascii_start();
                let (neg, t) = match t.first() {
                    Some(b'-') => (true, &t[1..]),
                    Some(b'+') => (false, &t[1..]),
                    _ => (false, t),
                };
                let digits: Vec<u8> = t.iter().take_while(|b| b.is_ascii_digit()).copied().collect();
                if digits.is_empty() {
                    self.sink.hit(EVAL_PARSEINT_BAD);
                    return Ok(V::Num(f64::NAN));
                }
                let v: f64 = std::str::from_utf8(&digits).unwrap().parse().unwrap_or(f64::INFINITY);
                V::Num(if neg { -v } else { v })
            }
            "eval" => {
                self.sink.hit(EVAL_EVAL);
                let V::Str(src) = arg else { return Ok(arg) };
                if self.eval_depth >= MAX_EVAL_DEPTH {
                    self.sink.hit(EVAL_EVAL_DEPTH);
                    return Err(Ctrl::Throw(V::Str(b"RangeError: eval depth".to_vec())));
                }
                let Some(prog) = front_end(&src, self.sink) else {
                    self.sink.hit(EVAL_EVAL_ERR);
                    return Err(Ctrl::Throw(V::Str(b"SyntaxError".to_vec())));
                };
                // Evaluated code runs in its own frame.
                self.eval_depth += 1;
                self.frames.push(HashMap::new());
                self.declare_functions(&prog);
                let flow = self.block(&prog);
                self.frames.pop();
                self.eval_depth -= 1;
                flow?;
                V::Undef
            }
            "RegExp" => V::RegExp,
            _ => V::Undef,
        })
    }
}

/// Backtracking matcher for literals, `.`, `x*` and a trailing `$`.
fn match_here(pat: &[u8], s: &[u8], at: usize) -> Option<usize> {
    if pat.is_empty() {
        return Some(at);
    }
    if pat == b"$" {
        return (at == s.len()).then_some(at);
    }
    let single = |i: usize| i < s.len() && (pat[0] == b'.' || pat[0] == s[i]);
    if pat.get(1) == Some(&b'*') {
        let mut n = at;
        while single(n) {
            n += 1;
        }
        loop {
            if let Some(end) = match_here(&pat[2..], s, n) {
                return Some(end);
            }
            if n == at {
                return None;
            }
            n -= 1;
        }
    }
    if single(at) {
        return match_here(&pat[1..], s, at + 1);
    }
    None
}

pub fn run(prog: &Program, sink: &mut CoverageSink) {
    sink.hit(EVAL_START);
    let mut it = Interp {
        sink,
        globals: HashMap::new(),
        frames: Vec::new(),
        fuel: FUEL,
        eval_depth: 0,
        re: MatchState::default(),
    };
    it.declare_functions(prog);
    match it.block(prog) {
        Ok(_) => it.sink.hit(EVAL_DONE),
        Err(Ctrl::Throw(_)) => it.sink.hit(EVAL_UNCAUGHT),
        Err(Ctrl::Halt) => {}
    }
}
