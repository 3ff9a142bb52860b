use std::rc::Rc;

use super::ast::{BinOp, Expr, Function, Program, Stmt, UnOp};
use super::lexer::Tok;
use super::*;

const MAX_DEPTH: usize = 64;

struct Parser<'a, 's> {
    toks: &'a [Tok],
    pos: usize,
    depth: usize,
    sink: &'s mut CoverageSink,
}

type P<T> = Option<T>;

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Kw(k)) if *k == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        let hit = self.is_op(op);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn fail<T>(&mut self) -> P<T> {
        self.sink.hit(PARSE_ERR);
        None
    }

    fn expect_op(&mut self, op: &str) -> P<()> {
        if self.eat_op(op) {
            Some(())
        } else {
            self.fail()
        }
    }

    fn ident(&mut self) -> P<String> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Some(name)
            }
            _ => self.fail(),
        }
    }

    fn enter(&mut self) -> P<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.sink.hit(PARSE_DEPTH);
            return None;
        }
        Some(())
    }

    fn block(&mut self) -> P<Vec<Stmt>> {
        self.expect_op("{")?;
        self.sink.hit(PARSE_BLOCK);
        let mut body = Vec::new();
        while !self.eat_op("}") {
            if self.peek().is_none() {
                return self.fail();
            }
            body.push(self.stmt()?);
        }
        Some(body)
    }

    fn stmt(&mut self) -> P<Stmt> {
        self.enter()?;
        let s = self.stmt_inner();
        self.depth -= 1;
        s
    }

    fn stmt_inner(&mut self) -> P<Stmt> {
        if self.eat_kw("var") {
            self.sink.hit(PARSE_VAR);
            let name = self.ident()?;
            let init = if self.eat_op("=") {
                self.sink.hit(PARSE_VAR_INIT);
                Some(self.expr()?)
            } else {
                None
            };
            self.expect_op(";")?;
            return Some(Stmt::Var(name, init));
        }
        if self.eat_kw("if") {
            self.sink.hit(PARSE_IF);
            self.expect_op("(")?;
            let cond = self.expr()?;
            self.expect_op(")")?;
            let then = self.stmt()?;
            let other = if self.eat_kw("else") {
                self.sink.hit(PARSE_ELSE);
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Some(Stmt::If(cond, Box::new(then), other));
        }
        if self.eat_kw("while") {
            self.sink.hit(PARSE_WHILE);
            self.expect_op("(")?;
            let cond = self.expr()?;
            self.expect_op(")")?;
            return Some(Stmt::While(cond, Box::new(self.stmt()?)));
        }
        if self.eat_kw("for") {
            self.sink.hit(PARSE_FOR);
            self.expect_op("(")?;
            let init = self.stmt()?;
            let cond = self.expr()?;
            self.expect_op(";")?;
            let step = self.expr()?;
            self.expect_op(")")?;
            return Some(Stmt::For(Box::new(init), cond, step, Box::new(self.stmt()?)));
        }
        if self.eat_kw("function") {
            self.sink.hit(PARSE_FUNCTION);
            let name = self.ident()?;
            self.expect_op("(")?;
            let mut params = Vec::new();
            if !self.eat_op(")") {
                self.sink.hit(PARSE_PARAMS);
                loop {
                    params.push(self.ident()?);
                    if self.eat_op(")") {
                        break;
                    }
                    self.expect_op(",")?;
                }
            }
            let body = self.block()?;
            return Some(Stmt::Function(Rc::new(Function { name, params, body })));
        }
        if self.eat_kw("return") {
            if self.eat_op(";") {
                self.sink.hit(PARSE_RETURN_VOID);
                return Some(Stmt::Return(None));
            }
            self.sink.hit(PARSE_RETURN);
            let e = self.expr()?;
            self.expect_op(";")?;
            return Some(Stmt::Return(Some(e)));
        }
        if self.eat_kw("try") {
            self.sink.hit(PARSE_TRY);
            let body = self.block()?;
            if !self.eat_kw("catch") {
                return self.fail();
            }
            self.expect_op("(")?;
            let name = self.ident()?;
            self.expect_op(")")?;
            let handler = self.block()?;
            return Some(Stmt::Try(body, name, handler));
        }
        if self.eat_kw("throw") {
            self.sink.hit(PARSE_THROW);
            let e = self.expr()?;
            self.expect_op(";")?;
            return Some(Stmt::Throw(e));
        }
        if self.eat_kw("break") {
            self.sink.hit(PARSE_BREAK);
            self.expect_op(";")?;
            return Some(Stmt::Break);
        }
        if self.eat_kw("continue") {
            self.sink.hit(PARSE_CONTINUE);
            self.expect_op(";")?;
            return Some(Stmt::Continue);
        }
        if self.is_op("{") {
            return Some(Stmt::Block(self.block()?));
        }
        if self.eat_op(";") {
            self.sink.hit(PARSE_EMPTY);
            return Some(Stmt::Empty);
        }
        let e = self.expr()?;
        if self.eat_op("=") {
            self.sink.hit(PARSE_ASSIGN);
            let rhs = self.expr()?;
            self.expect_op(";")?;
            return Some(Stmt::Assign(e, rhs));
        }
        self.sink.hit(PARSE_EXPR_STMT);
        self.expect_op(";")?;
        Some(Stmt::Expr(e))
    }

    fn expr(&mut self) -> P<Expr> {
        self.enter()?;
        let e = self.binary(0);
        self.depth -= 1;
        e
    }

    fn binop(&self, level: usize) -> Option<BinOp> {
        let Some(Tok::Op(op)) = self.peek() else { return None };
        let (l, b) = match *op {
            "||" => (0, BinOp::Or),
            "&&" => (1, BinOp::And),
            "==" => (2, BinOp::Eq),
            "!=" => (2, BinOp::Ne),
            "<" => (3, BinOp::Lt),
            "<=" => (3, BinOp::Le),
            ">" => (3, BinOp::Gt),
            ">=" => (3, BinOp::Ge),
            "+" => (4, BinOp::Add),
            "-" => (4, BinOp::Sub),
            "*" => (5, BinOp::Mul),
            "/" => (5, BinOp::Div),
            "%" => (5, BinOp::Mod),
            _ => return None,
        };
        (l == level).then_some(b)
    }

    fn binary(&mut self, level: usize) -> P<Expr> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop(level) {
            self.pos += 1;
            self.sink.hit(PARSE_BINARY);
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Some(lhs)
    }

    fn unary(&mut self) -> P<Expr> {
        let op = if self.eat_op("!") {
            UnOp::Not
        } else if self.eat_op("-") {
            UnOp::Neg
        } else {
            return self.postfix();
        };
        self.sink.hit(PARSE_UNARY);
        self.enter()?;
        let e = self.unary();
        self.depth -= 1;
        Some(Expr::Unary(op, Box::new(e?)))
    }

    fn args(&mut self, close: &str) -> P<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_op(close) {
            return Some(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_op(close) {
                return Some(args);
            }
            self.expect_op(",")?;
        }
    }

    fn postfix(&mut self) -> P<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_op(".") {
                self.sink.hit(PARSE_MEMBER);
                e = Expr::Member(Box::new(e), self.ident()?);
            } else if self.eat_op("(") {
                self.sink.hit(PARSE_CALL);
                e = Expr::Call(Box::new(e), self.args(")")?);
            } else if self.eat_op("[") {
                self.sink.hit(PARSE_INDEX);
                let idx = self.expr()?;
                self.expect_op("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else {
                return Some(e);
            }
        }
    }

    fn primary(&mut self) -> P<Expr> {
        let Some(t) = self.peek().cloned() else { return self.fail() };
        self.pos += 1;
        let e = match t {
            Tok::Num(n) => Expr::Num(n),
            Tok::Str(s) => Expr::Str(s),
            Tok::Ident(name) => Expr::Ident(name),
            Tok::Kw("true") => Expr::Bool(true),
            Tok::Kw("false") => Expr::Bool(false),
            Tok::Kw("null") => Expr::Null,
            Tok::Op("(") => {
                self.sink.hit(PARSE_GROUP);
                let e = self.expr()?;
                self.expect_op(")")?;
                return Some(e);
            }
            Tok::Op("[") => {
                self.sink.hit(PARSE_ARRAY);
                return Some(Expr::Array(self.args("]")?));
            }
            _ => return self.fail(),
        };
        self.sink.hit(PARSE_LITERAL);
        Some(e)
    }
}

pub fn parse(toks: &[Tok], sink: &mut CoverageSink) -> Option<Program> {
    sink.hit(PARSE_PROGRAM);
    let mut p = Parser { toks, pos: 0, depth: 0, sink };
    let mut prog = Vec::new();
    if toks.is_empty() {
        return p.fail();
    }
    while p.peek().is_some() {
        prog.push(p.stmt()?);
    }
    p.sink.hit(PARSE_OK);
    Some(prog)
}
