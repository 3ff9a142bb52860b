//! Scope and context checks: every name resolves, `return` only inside
//! functions, `break`/`continue` only inside loops, distinct parameters and
//! assignable left-hand sides.

use std::collections::HashSet;

use super::ast::{Expr, Program, Stmt};
use super::*;

/// Names a body declares anywhere inside it (`var`, functions, catch
/// bindings); nested function bodies are not entered.
fn hoisted(body: &[Stmt], out: &mut HashSet<String>, sink: &mut CoverageSink) {
    for s in body {
        match s {
            Stmt::Var(name, _) => {
                sink.hit(CHECK_DECLARE);
                if !out.insert(name.clone()) {
                    sink.hit(CHECK_REDECLARE);
                }
            }
            Stmt::Function(f) => {
                sink.hit(CHECK_DECLARE);
                out.insert(f.name.clone());
            }
            Stmt::If(_, a, b) => {
                hoisted(std::slice::from_ref(a), out, sink);
                if let Some(b) = b {
                    hoisted(std::slice::from_ref(b), out, sink);
                }
            }
            Stmt::While(_, b) => hoisted(std::slice::from_ref(b), out, sink),
            Stmt::For(i, _, _, b) => {
                hoisted(std::slice::from_ref(i), out, sink);
                hoisted(std::slice::from_ref(b), out, sink);
            }
            Stmt::Try(body, name, handler) => {
                hoisted(body, out, sink);
                out.insert(name.clone());
                hoisted(handler, out, sink);
            }
            Stmt::Block(b) => hoisted(b, out, sink),
            _ => {}
        }
    }
}

struct Checker<'s> {
    globals: HashSet<String>,
    locals: Option<HashSet<String>>,
    loops: usize,
    sink: &'s mut CoverageSink,
}

impl Checker<'_> {
    fn resolve(&mut self, name: &str) -> bool {
        if self.locals.as_ref().is_some_and(|l| l.contains(name)) {
            self.sink.hit(CHECK_RESOLVE_LOCAL);
        } else if self.globals.contains(name) {
            self.sink.hit(CHECK_RESOLVE_GLOBAL);
        } else if BUILTINS.contains(&name) {
            self.sink.hit(CHECK_RESOLVE_BUILTIN);
        } else {
            self.sink.hit(CHECK_ERR_UNDECLARED);
            return false;
        }
        true
    }

    fn expr(&mut self, e: &Expr) -> bool {
        match e {
            Expr::Num(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null => true,
            Expr::Ident(name) => self.resolve(name),
            Expr::Array(items) => items.iter().all(|i| self.expr(i)),
            Expr::Unary(_, a) | Expr::Member(a, _) => self.expr(a),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => self.expr(a) && self.expr(b),
            Expr::Call(f, args) => self.expr(f) && args.iter().all(|a| self.expr(a)),
        }
    }

    fn body(&mut self, body: &[Stmt]) -> bool {
        body.iter().all(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> bool {
        match s {
            Stmt::Var(_, init) => init.as_ref().is_none_or(|e| self.expr(e)),
            Stmt::Assign(target, value) => {
                let assignable = match target {
                    Expr::Ident(name) => !BUILTINS.contains(&name.as_str()),
                    Expr::Member(..) | Expr::Index(..) => true,
                    _ => false,
                };
                if !assignable {
                    self.sink.hit(CHECK_ERR_LVALUE);
                    return false;
                }
                self.expr(target) && self.expr(value)
            }
            Stmt::Expr(e) | Stmt::Throw(e) => self.expr(e),
            Stmt::If(c, a, b) => self.expr(c) && self.stmt(a) && b.as_ref().is_none_or(|b| self.stmt(b)),
            Stmt::While(c, b) => {
                self.sink.hit(CHECK_LOOP);
                self.expr(c) && self.in_loop(b)
            }
            Stmt::For(init, c, step, b) => {
                self.sink.hit(CHECK_LOOP);
                self.stmt(init) && self.expr(c) && self.expr(step) && self.in_loop(b)
            }
            Stmt::Function(f) => {
                self.sink.hit(CHECK_FUNCTION);
                let mut locals = HashSet::new();
                for p in &f.params {
                    if !locals.insert(p.clone()) {
                        self.sink.hit(CHECK_ERR_DUP_PARAM);
                        return false;
                    }
                }
                hoisted(&f.body, &mut locals, self.sink);
                let saved = (self.locals.replace(locals), std::mem::take(&mut self.loops));
                let ok = self.body(&f.body);
                (self.locals, self.loops) = saved;
                ok
            }
            Stmt::Return(e) => {
                if self.locals.is_none() {
                    self.sink.hit(CHECK_ERR_RETURN);
                    return false;
                }
                e.as_ref().is_none_or(|e| self.expr(e))
            }
            Stmt::Try(body, _, handler) => {
                self.sink.hit(CHECK_CATCH);
                self.body(body) && self.body(handler)
            }
            Stmt::Break | Stmt::Continue => {
                if self.loops == 0 {
                    self.sink.hit(CHECK_ERR_BREAK);
                    return false;
                }
                true
            }
            Stmt::Block(b) => self.body(b),
            Stmt::Empty => true,
        }
    }

    fn in_loop(&mut self, body: &Stmt) -> bool {
        self.loops += 1;
        let ok = self.stmt(body);
        self.loops -= 1;
        ok
    }
}

pub fn check(prog: &Program, sink: &mut CoverageSink) -> bool {
    sink.hit(CHECK_START);
    let mut globals = HashSet::new();
    hoisted(prog, &mut globals, sink);
    let mut c = Checker { globals, locals: None, loops: 0, sink };
    let ok = c.body(prog);
    if ok {
        c.sink.hit(CHECK_OK);
    }
    ok
}
