"""Instrumented mini scripting language interpreter.

Three stages gate each other: tokenize/parse, then a scope and arity
checker, then evaluation.  Inputs that fail a stage never touch the blocks
behind it, so coverage says how deep an input got.

The evaluator keeps a register pair for its string-matching stub: match()
stores both the subject string and the match end offset, but setin() swaps
the subject without resetting the offset.  tail() then computes the suffix
length from the stale offset and crashes once it goes negative.  Reaching
it takes a valid program that calls match, then setin with a shorter
subject, then tail.
"""

from __future__ import annotations

from ..harness import TargetCrash

_BLOCKS: dict[str, int] = {}
_STAGES: dict[str, str] = {}


def _blk(name: str, stage: str) -> int:
    bid = 100 + len(_BLOCKS)
    _BLOCKS[name] = bid
    _STAGES[name] = stage
    return bid


# --- stage 1: lexer ---
L_ENTER = _blk("lex_enter", "parse")
L_NUM = _blk("lex_num", "parse")
L_STR = _blk("lex_str", "parse")
L_ID = _blk("lex_id", "parse")
L_KW = _blk("lex_kw", "parse")
L_OP = _blk("lex_op", "parse")
L_COMMENT = _blk("lex_comment", "parse")
L_BAD_CHAR = _blk("lex_bad_char", "parse")
L_UNTERM_STR = _blk("lex_unterminated_str", "parse")
L_UNTERM_COMMENT = _blk("lex_unterminated_comment", "parse")

# --- stage 1: parser ---
P_PROGRAM = _blk("parse_program", "parse")
P_VAR = _blk("parse_var", "parse")
P_ASSIGN = _blk("parse_assign", "parse")
P_IF = _blk("parse_if", "parse")
P_ELSE = _blk("parse_else", "parse")
P_WHILE = _blk("parse_while", "parse")
P_BLOCK = _blk("parse_block", "parse")
P_EXPR_STMT = _blk("parse_expr_stmt", "parse")
P_CMP = _blk("parse_cmp", "parse")
P_SUM = _blk("parse_sum", "parse")
P_MUL = _blk("parse_mul", "parse")
P_NEG = _blk("parse_neg", "parse")
P_NOT = _blk("parse_not", "parse")
P_NUM = _blk("parse_num", "parse")
P_STR = _blk("parse_str", "parse")
P_IDENT = _blk("parse_ident", "parse")
P_CALL = _blk("parse_call", "parse")
P_PAREN = _blk("parse_paren", "parse")
P_ARG = _blk("parse_arg", "parse")
P_TOO_DEEP = _blk("parse_too_deep", "parse")
P_ERROR = _blk("parse_error", "parse")
P_OK = _blk("parse_ok", "parse")

# --- stage 2: checker ---
C_ENTER = _blk("check_enter", "check")
C_VAR_DECL = _blk("check_var_decl", "check")
C_REDECLARE = _blk("check_redeclare", "check")
C_ASSIGN_OK = _blk("check_assign_ok", "check")
C_ASSIGN_UNDECLARED = _blk("check_assign_undeclared", "check")
C_USE_OK = _blk("check_use_ok", "check")
C_USE_UNDECLARED = _blk("check_use_undeclared", "check")
C_CALL_KNOWN = _blk("check_call_known", "check")
C_CALL_UNKNOWN = _blk("check_call_unknown", "check")
C_ARITY_OK = _blk("check_arity_ok", "check")
C_ARITY_BAD = _blk("check_arity_bad", "check")
C_IF = _blk("check_if", "check")
C_WHILE = _blk("check_while", "check")
C_OK = _blk("check_ok", "check")

# --- stage 3: evaluator ---
E_ENTER = _blk("eval_enter", "eval")
E_VAR_STORE = _blk("eval_var_store", "eval")
E_ASSIGN_STORE = _blk("eval_assign_store", "eval")
E_IF_TRUE = _blk("eval_if_true", "eval")
E_IF_FALSE = _blk("eval_if_false", "eval")
E_ELSE_TAKEN = _blk("eval_else_taken", "eval")
E_WHILE_ITER = _blk("eval_while_iter", "eval")
E_WHILE_EXIT = _blk("eval_while_exit", "eval")
E_TRUTHY_INT = _blk("eval_truthy_int", "eval")
E_TRUTHY_STR = _blk("eval_truthy_str", "eval")
E_NUM_LIT = _blk("eval_num_lit", "eval")
E_STR_LIT = _blk("eval_str_lit", "eval")
E_LOAD = _blk("eval_load", "eval")
E_UNINIT = _blk("eval_uninitialized", "eval")
E_ADD_INT = _blk("eval_add_int", "eval")
E_CONCAT = _blk("eval_concat", "eval")
E_SUB_INT = _blk("eval_sub_int", "eval")
E_MUL_INT = _blk("eval_mul_int", "eval")
E_REPEAT_STR = _blk("eval_repeat_str", "eval")
E_REPEAT_HUGE = _blk("eval_repeat_huge", "eval")
E_DIV_INT = _blk("eval_div_int", "eval")
E_DIV_ZERO = _blk("eval_div_zero", "eval")
E_MOD_INT = _blk("eval_mod_int", "eval")
E_MOD_ZERO = _blk("eval_mod_zero", "eval")
E_LT_INT = _blk("eval_lt_int", "eval")
E_LT_STR = _blk("eval_lt_str", "eval")
E_GT_INT = _blk("eval_gt_int", "eval")
E_GT_STR = _blk("eval_gt_str", "eval")
E_EQ_SAME = _blk("eval_eq_same", "eval")
E_EQ_DIFF = _blk("eval_eq_diff", "eval")
E_NE = _blk("eval_ne", "eval")
E_NEG = _blk("eval_neg", "eval")
E_NOT = _blk("eval_not", "eval")
E_OVERFLOW = _blk("eval_overflow_clamp", "eval")
E_TYPE_ERR = _blk("eval_type_err", "eval")
E_LEN = _blk("eval_len", "eval")
E_SUB_ENTER = _blk("eval_sub_enter", "eval")
E_SUB_CLAMP_LO = _blk("eval_sub_clamp_lo", "eval")
E_SUB_CLAMP_HI = _blk("eval_sub_clamp_hi", "eval")
E_SUB_TAKE = _blk("eval_sub_take", "eval")
E_SUB_EMPTY = _blk("eval_sub_empty", "eval")
E_ORD_OK = _blk("eval_ord_ok", "eval")
E_ORD_EMPTY = _blk("eval_ord_empty", "eval")
E_CHR_OK = _blk("eval_chr_ok", "eval")
E_CHR_RANGE = _blk("eval_chr_range", "eval")
E_NUM_OK = _blk("eval_num_ok", "eval")
E_NUM_BAD = _blk("eval_num_bad", "eval")
E_STR_OF_INT = _blk("eval_str_of_int", "eval")
E_STR_OF_STR = _blk("eval_str_of_str", "eval")
E_PRINT_INT = _blk("eval_print_int", "eval")
E_PRINT_STR = _blk("eval_print_str", "eval")
E_MATCH_EMPTY = _blk("eval_match_empty", "eval")
E_MATCH_SET = _blk("eval_match_set", "eval")
E_SETIN = _blk("eval_setin", "eval")
E_TAIL_ENTER = _blk("eval_tail_enter", "eval")
E_TAIL_EMPTY = _blk("eval_tail_empty", "eval")
E_TAIL_REST = _blk("eval_tail_rest", "eval")
E_DONE = _blk("eval_done", "eval")

BLOCKS = dict(_BLOCKS)
STAGES = dict(_STAGES)

_KEYWORDS = frozenset(("var", "if", "else", "while"))

# name -> arity
_BUILTINS = {
    "len": 1,
    "sub": 3,
    "ord": 1,
    "chr": 1,
    "num": 1,
    "str": 1,
    "print": 1,
    "match": 1,
    "setin": 1,
    "tail": 0,
}

_INT_MAX = 2**63


class _Fail(Exception):
    pass


def _lex(text, hit):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "/" and text.startswith("//", i):
            hit(L_COMMENT)
            j = text.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if ch == "/" and text.startswith("/*", i):
            hit(L_COMMENT)
            j = text.find("*/", i + 2)
            if j < 0:
                hit(L_UNTERM_COMMENT)
                raise _Fail()
            i = j + 2
            continue
        # ASCII classes only: latin-1 decoding smuggles in unicode digits
        # and letters that int() and the keyword table do not recognize
        if "0" <= ch <= "9":
            j = i
            while j < n and "0" <= text[j] <= "9":
                j += 1
            hit(L_NUM)
            toks.append(("num", int(text[i:j])))
            i = j
            continue
        if ch.isascii() and (ch.isalpha() or ch == "_"):
            j = i
            while j < n and text[j].isascii() and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _KEYWORDS:
                hit(L_KW)
                toks.append(("kw", word))
            else:
                hit(L_ID)
                toks.append(("id", word))
            i = j
            continue
        if ch == '"':
            buf = []
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                hit(L_UNTERM_STR)
                raise _Fail()
            hit(L_STR)
            toks.append(("str", "".join(buf)))
            i = j + 1
            continue
        if text.startswith(("==", "!="), i):
            hit(L_OP)
            toks.append(("op", text[i : i + 2]))
            i += 2
            continue
        if ch in "=;(){}<>+-*/%!,":
            hit(L_OP)
            toks.append(("op", ch))
            i += 1
            continue
        hit(L_BAD_CHAR)
        raise _Fail()
    toks.append(("eof", None))
    return toks


class _Parser:
    def __init__(self, toks, hit):
        self.toks = toks
        self.pos = 0
        self.hit = hit
        self.depth = 0

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        if t[0] != "eof":
            self.pos += 1
        return t

    def eat_op(self, op):
        k, v = self.peek()
        if k == "op" and v == op:
            self.take()
            return
        self.hit(P_ERROR)
        raise _Fail()

    def program(self):
        self.hit(P_PROGRAM)
        stmts = []
        while self.peek()[0] != "eof":
            stmts.append(self.stmt())
        self.hit(P_OK)
        return stmts

    def stmt(self):
        k, v = self.peek()
        if k == "kw" and v == "var":
            self.take()
            self.hit(P_VAR)
            nk, name = self.take()
            if nk != "id":
                self.hit(P_ERROR)
                raise _Fail()
            self.eat_op("=")
            e = self.expr()
            self.eat_op(";")
            return ("var", name, e)
        if k == "kw" and v == "if":
            self.take()
            self.hit(P_IF)
            self.eat_op("(")
            cond = self.expr()
            self.eat_op(")")
            body = self.block()
            other = None
            pk, pv = self.peek()
            if pk == "kw" and pv == "else":
                self.take()
                self.hit(P_ELSE)
                other = self.block()
            return ("if", cond, body, other)
        if k == "kw" and v == "while":
            self.take()
            self.hit(P_WHILE)
            self.eat_op("(")
            cond = self.expr()
            self.eat_op(")")
            return ("while", cond, self.block())
        if k == "op" and v == "{":
            return ("block", self.block())
        if k == "id" and self.toks[self.pos + 1] == ("op", "="):
            self.take()
            self.take()
            self.hit(P_ASSIGN)
            e = self.expr()
            self.eat_op(";")
            return ("assign", v, e)
        self.hit(P_EXPR_STMT)
        e = self.expr()
        self.eat_op(";")
        return ("expr", e)

    def block(self):
        self.depth += 1
        if self.depth > 64:
            self.hit(P_TOO_DEEP)
            raise _Fail()
        try:
            self.hit(P_BLOCK)
            self.eat_op("{")
            stmts = []
            while True:
                k, v = self.peek()
                if k == "op" and v == "}":
                    self.take()
                    return stmts
                if k == "eof":
                    self.hit(P_ERROR)
                    raise _Fail()
                stmts.append(self.stmt())
        finally:
            self.depth -= 1

    def expr(self):
        self.depth += 1
        if self.depth > 64:
            self.hit(P_TOO_DEEP)
            raise _Fail()
        try:
            left = self.sum()
            k, v = self.peek()
            if k == "op" and v in ("==", "!=", "<", ">"):
                self.take()
                self.hit(P_CMP)
                return ("bin", v, left, self.sum())
            return left
        finally:
            self.depth -= 1

    def sum(self):
        left = self.mul()
        while True:
            k, v = self.peek()
            if k == "op" and v in ("+", "-"):
                self.take()
                self.hit(P_SUM)
                left = ("bin", v, left, self.mul())
            else:
                return left

    def mul(self):
        left = self.unary()
        while True:
            k, v = self.peek()
            if k == "op" and v in ("*", "/", "%"):
                self.take()
                self.hit(P_MUL)
                left = ("bin", v, left, self.unary())
            else:
                return left

    def unary(self):
        k, v = self.peek()
        if k == "op" and v == "-":
            self.take()
            self.hit(P_NEG)
            return ("un", "-", self.unary())
        if k == "op" and v == "!":
            self.take()
            self.hit(P_NOT)
            return ("un", "!", self.unary())
        return self.atom()

    def atom(self):
        k, v = self.take()
        if k == "num":
            self.hit(P_NUM)
            return ("num", v)
        if k == "str":
            self.hit(P_STR)
            return ("str", v)
        if k == "id":
            nk, nv = self.peek()
            if nk == "op" and nv == "(":
                self.take()
                self.hit(P_CALL)
                args = []
                if not (self.peek() == ("op", ")")):
                    while True:
                        self.hit(P_ARG)
                        args.append(self.expr())
                        if self.peek() == ("op", ","):
                            self.take()
                            continue
                        break
                self.eat_op(")")
                return ("call", v, args)
            self.hit(P_IDENT)
            return ("id", v)
        if k == "op" and v == "(":
            self.hit(P_PAREN)
            e = self.expr()
            self.eat_op(")")
            return e
        self.hit(P_ERROR)
        raise _Fail()


def _check(stmts, hit):
    declared: set[str] = set()

    def check_expr(e):
        kind = e[0]
        if kind == "id":
            if e[1] in declared:
                hit(C_USE_OK)
            else:
                hit(C_USE_UNDECLARED)
                raise _Fail()
        elif kind == "call":
            name, args = e[1], e[2]
            arity = _BUILTINS.get(name)
            if arity is None:
                hit(C_CALL_UNKNOWN)
                raise _Fail()
            hit(C_CALL_KNOWN)
            if len(args) != arity:
                hit(C_ARITY_BAD)
                raise _Fail()
            hit(C_ARITY_OK)
            for a in args:
                check_expr(a)
        elif kind == "bin":
            check_expr(e[2])
            check_expr(e[3])
        elif kind == "un":
            check_expr(e[2])

    def check_stmts(body):
        for s in body:
            kind = s[0]
            if kind == "var":
                if s[1] in declared:
                    hit(C_REDECLARE)
                    raise _Fail()
                check_expr(s[2])
                declared.add(s[1])
                hit(C_VAR_DECL)
            elif kind == "assign":
                if s[1] not in declared:
                    hit(C_ASSIGN_UNDECLARED)
                    raise _Fail()
                hit(C_ASSIGN_OK)
                check_expr(s[2])
            elif kind == "if":
                hit(C_IF)
                check_expr(s[1])
                check_stmts(s[2])
                if s[3] is not None:
                    check_stmts(s[3])
            elif kind == "while":
                hit(C_WHILE)
                check_expr(s[1])
                check_stmts(s[2])
            elif kind == "block":
                check_stmts(s[1])
            else:
                check_expr(s[1])

    hit(C_ENTER)
    check_stmts(stmts)
    hit(C_OK)


class _Evaluator:
    def __init__(self, hit):
        self.hit = hit
        self.env: dict[str, object] = {}
        self.subject = ""
        self.match_end = 0

    def clamp(self, v):
        if v >= _INT_MAX or v <= -_INT_MAX:
            self.hit(E_OVERFLOW)
            sign = 1 if v >= 0 else -1
            return sign * (abs(v) % _INT_MAX)
        return v

    def type_err(self):
        self.hit(E_TYPE_ERR)
        raise _Fail()

    def truthy(self, v):
        if isinstance(v, int):
            self.hit(E_TRUTHY_INT)
            return v != 0
        self.hit(E_TRUTHY_STR)
        return len(v) > 0

    def run_stmts(self, body):
        hit = self.hit
        for s in body:
            kind = s[0]
            if kind == "var":
                self.env[s[1]] = self.expr(s[2])
                hit(E_VAR_STORE)
            elif kind == "assign":
                self.env[s[1]] = self.expr(s[2])
                hit(E_ASSIGN_STORE)
            elif kind == "if":
                if self.truthy(self.expr(s[1])):
                    hit(E_IF_TRUE)
                    self.run_stmts(s[2])
                else:
                    hit(E_IF_FALSE)
                    if s[3] is not None:
                        hit(E_ELSE_TAKEN)
                        self.run_stmts(s[3])
            elif kind == "while":
                while self.truthy(self.expr(s[1])):
                    hit(E_WHILE_ITER)
                    self.run_stmts(s[2])
                hit(E_WHILE_EXIT)
            elif kind == "block":
                self.run_stmts(s[1])
            else:
                self.expr(s[1])

    def expr(self, e):
        hit = self.hit
        kind = e[0]
        if kind == "num":
            hit(E_NUM_LIT)
            return e[1]
        if kind == "str":
            hit(E_STR_LIT)
            return e[1]
        if kind == "id":
            if e[1] not in self.env:
                # Declared in a branch that never ran.
                hit(E_UNINIT)
                raise _Fail()
            hit(E_LOAD)
            return self.env[e[1]]
        if kind == "un":
            v = self.expr(e[2])
            if e[1] == "-":
                if not isinstance(v, int):
                    self.type_err()
                hit(E_NEG)
                return -v
            hit(E_NOT)
            return 0 if self.truthy(v) else 1
        if kind == "bin":
            return self.binop(e[1], self.expr(e[2]), self.expr(e[3]))
        return self.call(e[1], [self.expr(a) for a in e[2]])

    def binop(self, op, a, b):
        hit = self.hit
        a_int, b_int = isinstance(a, int), isinstance(b, int)
        if op == "+":
            if a_int and b_int:
                hit(E_ADD_INT)
                return self.clamp(a + b)
            if not a_int and not b_int:
                hit(E_CONCAT)
                return (a + b)[:4096]
            self.type_err()
        if op == "-":
            if a_int and b_int:
                hit(E_SUB_INT)
                return self.clamp(a - b)
            self.type_err()
        if op == "*":
            if a_int and b_int:
                hit(E_MUL_INT)
                return self.clamp(a * b)
            if not a_int and b_int:
                if b > 4096 or len(a) * max(b, 0) > 4096:
                    hit(E_REPEAT_HUGE)
                    raise _Fail()
                hit(E_REPEAT_STR)
                return a * max(b, 0)
            self.type_err()
        if op == "/":
            if not (a_int and b_int):
                self.type_err()
            if b == 0:
                hit(E_DIV_ZERO)
                raise _Fail()
            hit(E_DIV_INT)
            return a // b
        if op == "%":
            if not (a_int and b_int):
                self.type_err()
            if b == 0:
                hit(E_MOD_ZERO)
                raise _Fail()
            hit(E_MOD_INT)
            return a % b
        if op == "<" or op == ">":
            if a_int and b_int:
                hit(E_LT_INT if op == "<" else E_GT_INT)
                return int(a < b) if op == "<" else int(a > b)
            if not a_int and not b_int:
                hit(E_LT_STR if op == "<" else E_GT_STR)
                return int(a < b) if op == "<" else int(a > b)
            self.type_err()
        if op == "==":
            if a_int == b_int:
                hit(E_EQ_SAME)
                return int(a == b)
            hit(E_EQ_DIFF)
            return 0
        hit(E_NE)
        return int(a != b)

    def call(self, name, args):
        hit = self.hit
        if name == "len":
            if isinstance(args[0], int):
                self.type_err()
            hit(E_LEN)
            return len(args[0])
        if name == "sub":
            s, i, j = args
            if isinstance(s, int) or not isinstance(i, int) or not isinstance(j, int):
                self.type_err()
            hit(E_SUB_ENTER)
            if i < 0:
                hit(E_SUB_CLAMP_LO)
                i = 0
            if j > len(s):
                hit(E_SUB_CLAMP_HI)
                j = len(s)
            out = s[i:j]
            hit(E_SUB_TAKE if out else E_SUB_EMPTY)
            return out
        if name == "ord":
            if isinstance(args[0], int):
                self.type_err()
            if not args[0]:
                hit(E_ORD_EMPTY)
                raise _Fail()
            hit(E_ORD_OK)
            return ord(args[0][0])
        if name == "chr":
            if not isinstance(args[0], int):
                self.type_err()
            if not 0 <= args[0] <= 255:
                hit(E_CHR_RANGE)
                raise _Fail()
            hit(E_CHR_OK)
            return chr(args[0])
        if name == "num":
            if isinstance(args[0], int):
                self.type_err()
            s = args[0]
            body = s[1:] if s.startswith("-") else s
            # ascii check: isdigit alone admits superscripts that int() rejects
            if body.isascii() and body.isdigit():
                hit(E_NUM_OK)
                return self.clamp(int(s))
            hit(E_NUM_BAD)
            raise _Fail()
        if name == "str":
            if isinstance(args[0], int):
                hit(E_STR_OF_INT)
                return str(args[0])
            hit(E_STR_OF_STR)
            return args[0]
        if name == "print":
            hit(E_PRINT_INT if isinstance(args[0], int) else E_PRINT_STR)
            return 0
        if name == "match":
            if isinstance(args[0], int):
                self.type_err()
            if not args[0]:
                hit(E_MATCH_EMPTY)
                return 0
            # Stub matcher: pretend the whole subject matched.
            self.subject = args[0]
            self.match_end = len(args[0])
            hit(E_MATCH_SET)
            return 1
        if name == "setin":
            if isinstance(args[0], int):
                self.type_err()
            # Swap the subject for the next scan.  The match offset is
            # deliberately left as-is; see module docstring.
            self.subject = args[0]
            hit(E_SETIN)
            return 0
        # tail
        hit(E_TAIL_ENTER)
        rest = len(self.subject) - self.match_end
        if rest < 0:
            raise TargetCrash("tail-underflow")
        hit(E_TAIL_EMPTY if rest == 0 else E_TAIL_REST)
        return rest


def run(data: bytes, sink) -> None:
    """Entry point: bytes in, coverage out via the sink."""
    hit = sink.hit
    hit(L_ENTER)
    text = data.decode("latin-1")
    try:
        toks = _lex(text, hit)
        ast = _Parser(toks, hit).program()
    except _Fail:
        return
    try:
        _check(ast, hit)
    except _Fail:
        return
    ev = _Evaluator(hit)
    try:
        ev.run_stmts(ast)
    except _Fail:
        return
    hit(E_DONE)
