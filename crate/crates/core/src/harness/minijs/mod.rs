//! Toy JavaScript-subset engine in three stages: parse, scope check,
//! evaluate. Every interesting branch reports a block.
//!
//! Planted fault: string matching records `(input, start, end)` in a global
//! `RegExp` state. Assigning `RegExp.input` replaces the input without
//! resetting `end`, and reading `RegExp.rightContext` afterwards computes
//! `input.len() - end` with wrapping arithmetic. A shorter input makes that
//! length underflow, which panics:
//!
//! ```text
//! var m = "quick brown fox".match("fox");
//! RegExp.input = "a";
//! print(RegExp.rightContext);
//! ```

mod ast;
mod check;
mod eval;
mod lexer;
mod parser;

use super::CoverageSink;

crate::define_blocks! {
    Parse {
        LEX_START = "js.lex.start",
        LEX_EMPTY = "js.lex.empty",
        LEX_WS = "js.lex.ws",
        LEX_LINE_COMMENT = "js.lex.line_comment",
        LEX_BLOCK_COMMENT = "js.lex.block_comment",
        LEX_ERR_COMMENT = "js.lex.err_comment",
        LEX_IDENT = "js.lex.ident",
        LEX_KEYWORD = "js.lex.keyword",
        LEX_NUMBER = "js.lex.number",
        LEX_NUMBER_HEX = "js.lex.number_hex",
        LEX_NUMBER_FRAC = "js.lex.number_frac",
        LEX_NUMBER_EXP = "js.lex.number_exp",
        LEX_ERR_NUMBER = "js.lex.err_number",
        LEX_STRING = "js.lex.string",
        LEX_STRING_ESCAPE = "js.lex.string_escape",
        LEX_ERR_STRING = "js.lex.err_string",
        LEX_OP = "js.lex.op",
        LEX_ERR_CHAR = "js.lex.err_char",
        LEX_DONE = "js.lex.done",
        PARSE_PROGRAM = "js.parse.program",
        PARSE_VAR = "js.parse.var",
        PARSE_VAR_INIT = "js.parse.var_init",
        PARSE_ASSIGN = "js.parse.assign",
        PARSE_EXPR_STMT = "js.parse.expr_stmt",
        PARSE_IF = "js.parse.if",
        PARSE_ELSE = "js.parse.else",
        PARSE_WHILE = "js.parse.while",
        PARSE_FOR = "js.parse.for",
        PARSE_FUNCTION = "js.parse.function",
        PARSE_PARAMS = "js.parse.params",
        PARSE_RETURN = "js.parse.return",
        PARSE_RETURN_VOID = "js.parse.return_void",
        PARSE_TRY = "js.parse.try",
        PARSE_THROW = "js.parse.throw",
        PARSE_BREAK = "js.parse.break",
        PARSE_CONTINUE = "js.parse.continue",
        PARSE_BLOCK = "js.parse.block",
        PARSE_EMPTY = "js.parse.empty",
        PARSE_BINARY = "js.parse.binary",
        PARSE_UNARY = "js.parse.unary",
        PARSE_MEMBER = "js.parse.member",
        PARSE_CALL = "js.parse.call",
        PARSE_INDEX = "js.parse.index",
        PARSE_ARRAY = "js.parse.array",
        PARSE_GROUP = "js.parse.group",
        PARSE_LITERAL = "js.parse.literal",
        PARSE_DEPTH = "js.parse.err_depth",
        PARSE_ERR = "js.parse.err",
        PARSE_OK = "js.parse.ok",
    }
    Check {
        CHECK_START = "js.check.start",
        CHECK_FUNCTION = "js.check.function",
        CHECK_DECLARE = "js.check.declare",
        CHECK_REDECLARE = "js.check.redeclare",
        CHECK_RESOLVE_LOCAL = "js.check.resolve_local",
        CHECK_RESOLVE_GLOBAL = "js.check.resolve_global",
        CHECK_RESOLVE_BUILTIN = "js.check.resolve_builtin",
        CHECK_LOOP = "js.check.loop",
        CHECK_CATCH = "js.check.catch",
        CHECK_ERR_UNDECLARED = "js.check.err_undeclared",
        CHECK_ERR_RETURN = "js.check.err_return",
        CHECK_ERR_BREAK = "js.check.err_break",
        CHECK_ERR_DUP_PARAM = "js.check.err_dup_param",
        CHECK_ERR_LVALUE = "js.check.err_lvalue",
        CHECK_OK = "js.check.ok",
    }
    Eval {
        EVAL_START = "js.eval.start",
        EVAL_VAR = "js.eval.var",
        EVAL_ASSIGN = "js.eval.assign",
        EVAL_ASSIGN_MEMBER = "js.eval.assign_member",
        EVAL_ASSIGN_INDEX = "js.eval.assign_index",
        EVAL_IF_TRUE = "js.eval.if_true",
        EVAL_IF_FALSE = "js.eval.if_false",
        EVAL_LOOP_ITER = "js.eval.loop_iter",
        EVAL_FOR_ITER = "js.eval.for_iter",
        EVAL_BREAK = "js.eval.break",
        EVAL_CONTINUE = "js.eval.continue",
        EVAL_CALL = "js.eval.call",
        EVAL_RETURN = "js.eval.return",
        EVAL_THROW = "js.eval.throw",
        EVAL_CATCH = "js.eval.catch",
        EVAL_UNCAUGHT = "js.eval.uncaught",
        EVAL_FUEL_OUT = "js.eval.fuel_out",
        EVAL_RECURSION = "js.eval.recursion_limit",
        EVAL_ADD_NUM = "js.eval.add_num",
        EVAL_ADD_STR = "js.eval.add_str",
        EVAL_STR_TOO_LONG = "js.eval.str_too_long",
        EVAL_SUB = "js.eval.sub",
        EVAL_MUL = "js.eval.mul",
        EVAL_DIV = "js.eval.div",
        EVAL_DIV_ZERO = "js.eval.div_zero",
        EVAL_MOD = "js.eval.mod",
        EVAL_CMP_NUM = "js.eval.cmp_num",
        EVAL_CMP_STR = "js.eval.cmp_str",
        EVAL_EQ = "js.eval.eq",
        EVAL_EQ_MIXED = "js.eval.eq_mixed",
        EVAL_AND = "js.eval.and",
        EVAL_OR = "js.eval.or",
        EVAL_NOT = "js.eval.not",
        EVAL_NEG = "js.eval.neg",
        EVAL_NAN = "js.eval.nan",
        EVAL_INFINITY = "js.eval.infinity",
        EVAL_NEG_ZERO = "js.eval.neg_zero",
        EVAL_STR_LENGTH = "js.eval.str_length",
        EVAL_STR_CHARAT = "js.eval.str_charat",
        EVAL_STR_CHARAT_OOB = "js.eval.str_charat_oob",
        EVAL_STR_SUBSTRING = "js.eval.str_substring",
        EVAL_STR_SUBSTRING_SWAP = "js.eval.str_substring_swap",
        EVAL_STR_INDEXOF = "js.eval.str_indexof",
        EVAL_STR_INDEXOF_MISS = "js.eval.str_indexof_miss",
        EVAL_STR_UPPER = "js.eval.str_upper",
        EVAL_STR_MATCH = "js.eval.str_match",
        EVAL_STR_MATCH_MISS = "js.eval.str_match_miss",
        EVAL_STR_REPLACE = "js.eval.str_replace",
        EVAL_STR_SEARCH = "js.eval.str_search",
        EVAL_PAT_DOT = "js.eval.pat_dot",
        EVAL_PAT_STAR = "js.eval.pat_star",
        EVAL_PAT_ANCHOR = "js.eval.pat_anchor",
        EVAL_ARR_LITERAL = "js.eval.arr_literal",
        EVAL_ARR_LENGTH = "js.eval.arr_length",
        EVAL_ARR_PUSH = "js.eval.arr_push",
        EVAL_ARR_POP = "js.eval.arr_pop",
        EVAL_ARR_POP_EMPTY = "js.eval.arr_pop_empty",
        EVAL_ARR_JOIN = "js.eval.arr_join",
        EVAL_INDEX_ARR = "js.eval.index_arr",
        EVAL_INDEX_OOB = "js.eval.index_oob",
        EVAL_INDEX_STR = "js.eval.index_str",
        EVAL_NUMBER = "js.eval.number",
        EVAL_STRING = "js.eval.string",
        EVAL_PARSEINT = "js.eval.parseint",
        EVAL_PARSEINT_BAD = "js.eval.parseint_bad",
        EVAL_PRINT = "js.eval.print",
        EVAL_WRITE = "js.eval.write",
        EVAL_EVAL = "js.eval.eval",
        EVAL_EVAL_ERR = "js.eval.eval_err",
        EVAL_EVAL_DEPTH = "js.eval.eval_depth",
        EVAL_RE_INPUT_GET = "js.eval.regexp_input_get",
        EVAL_RE_INPUT_SET = "js.eval.regexp_input_set",
        EVAL_RE_LAST = "js.eval.regexp_last_match",
        EVAL_RE_LEFT = "js.eval.regexp_left_context",
        EVAL_RE_RIGHT = "js.eval.regexp_right_context",
        EVAL_TYPE_ERR = "js.eval.type_error",
        EVAL_DONE = "js.eval.done",
    }
}

/// Names resolvable without a declaration.
pub const BUILTINS: &[&str] = &["print", "write", "Number", "String", "parseInt", "RegExp", "eval"];

/// Parse and scope-check a program. Shared by the entry point and `eval`.
fn front_end(src: &[u8], sink: &mut CoverageSink) -> Option<ast::Program> {
    let toks = lexer::lex(src, sink)?;
    let prog = parser::parse(&toks, sink)?;
    check::check(&prog, sink).then_some(prog)
}

/// Target entry point.
pub fn run(input: &[u8], sink: &mut CoverageSink) {
    let Some(prog) = front_end(input, sink) else { return };
    eval::run(&prog, sink);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{trace, ExecStatus, Stage};

    fn stages(src: &str) -> (ExecStatus, Vec<Stage>) {
        let (status, blocks) = trace(run, src.as_bytes());
        let mut st: Vec<Stage> =
            blocks.iter().map(|b| INVENTORY.iter().find(|(id, _, _)| id == b).unwrap().2).collect();
        st.sort();
        st.dedup();
        (status, st)
    }

    #[test]
    fn stage_reach() {
        assert_eq!(stages("var x=1;"), (ExecStatus::Ok, vec![Stage::Parse, Stage::Check, Stage::Eval]));
        assert_eq!(stages("var x=;"), (ExecStatus::Ok, vec![Stage::Parse]));
        assert_eq!(stages("y = 1;"), (ExecStatus::Ok, vec![Stage::Parse, Stage::Check]));
    }

    #[test]
    fn planted_fault() {
        let src = "var m = \"quick brown fox\".match(\"fox\"); RegExp.input = \"a\"; print(RegExp.rightContext);";
        assert_eq!(stages(src).0, ExecStatus::Crash);
        let safe = "var m = \"quick brown fox\".match(\"fox\"); print(RegExp.rightContext);";
        assert_eq!(stages(safe).0, ExecStatus::Ok);
    }

    #[test]
    fn evaluator_features() {
        let src = r#"
            function fib(n) { if (n < 2) { return n; } return fib(n - 1) + fib(n - 2); }
            var a = [1, 2, 3]; a.push(fib(10)); var s = a.join("-");
            try { throw "x"; } catch (e) { print(e, s.substring(2, 0), s.charAt(99), s.indexOf("55")); }
            for (var i = 0; i < 3; i) { i = i + 1; if (i == 1) { continue; } }
            while (true) { break; }
            eval("var q = parseInt(\"12px\") / 0;");
            print(Number("0x1f"), String(-0), "abc".replace("b*c", "Z"), "aXb".search("^a.b$"));
        "#;
        let (status, st) = stages(src);
        assert_eq!(status, ExecStatus::Ok);
        assert!(st.contains(&Stage::Eval));
    }

    #[test]
    fn runaway_programs_stop() {
        assert_eq!(stages("while (true) { }").0, ExecStatus::Ok);
        assert_eq!(stages("function f() { return f(); } f();").0, ExecStatus::Ok);
        assert_eq!(stages("var s = \"ab\"; while (true) { s = s + s; }").0, ExecStatus::Ok);
        let deep = format!("var x = {}1{};", "(".repeat(500), ")".repeat(500));
        assert_eq!(stages(&deep), (ExecStatus::Ok, vec![Stage::Parse]));
        assert_eq!(stages("var a = [1]; a.push(a); print(a, a.join(\"-\"));").0, ExecStatus::Ok);
        assert_eq!(stages("var a = []; while (true) { a = [a]; print(a); }").0, ExecStatus::Ok);
    }
}
