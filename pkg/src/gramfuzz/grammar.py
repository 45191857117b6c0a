"""Grammar definitions and the loader for the line-oriented grammar file format.

A grammar file is a sequence of definitions, each terminated by a bare ";":

    start program ;                 # optional start directive
    program := stmt program | ;     # rule: alternatives of symbols
    stmt := "var" ID "=" NUM ";" ;  # double-quoted literals are terminals
    ID := /[A-Za-z_][A-Za-z0-9_]*/ ;
    WS skip /[ \\t\\n]+/ ;          # skip tokens become trivia
    LC comment /\\/\\/[^\\n]*/ ;    # comment tokens are skipped and strippable

"#" starts a comment that runs to end of line.  The first rule is the start
rule unless a start directive says otherwise.  Token patterns use a restricted
regex subset: literals, escapes, character classes, grouping, alternation,
".", "*", "+", "?".  No anchors, no bounded repetition, no group extensions.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass


class GrammarError(Exception):
    """Raised for malformed grammar files, with position where known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class TokenDef:
    name: str
    pattern: str
    skip: bool = False
    comment: bool = False


@dataclass(frozen=True)
class Rule:
    name: str
    # Each alternative is a tuple of symbol names.  Literal symbols keep
    # their quoted spelling (e.g. '"var"') so they never collide with
    # identifiers.
    alternatives: tuple[tuple[str, ...], ...]


@dataclass(frozen=True, eq=False)
class GrammarSpec:
    name: str
    tokens: tuple[TokenDef, ...]
    rules: tuple[Rule, ...]
    start_rule: str
    skip_classes: frozenset[str]
    comment_classes: frozenset[str]
    # Distinct literal terminals: quoted symbol name -> bytes, in first-use order.
    literals: tuple[tuple[str, bytes], ...]

    @property
    def symbol_count(self) -> int:
        """Rules plus non-skip tokens plus literal terminals."""
        named = sum(1 for t in self.tokens if not t.skip)
        return len(self.rules) + named + len(self.literals)

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


def is_literal_symbol(sym: str) -> bool:
    return sym.startswith('"')


# --- grammar file lexer ---

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

_STRING_ESCAPES = {"\\": b"\\", '"': b'"', "n": b"\n", "t": b"\t", "r": b"\r", "0": b"\0"}


def _lex(text: str) -> list[tuple[str, object, int, int]]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)

    def bump(k):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            bump(1)
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                bump(1)
            continue
        tl, tc = line, col
        if text.startswith(":=", i):
            toks.append(("op", ":=", tl, tc))
            bump(2)
            continue
        if ch in "|;":
            toks.append(("op", ch, tl, tc))
            bump(1)
            continue
        if ch == "/":
            j = i + 1
            while j < n and text[j] != "/":
                if text[j] == "\n":
                    raise GrammarError("unterminated /regex/", tl, tc)
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise GrammarError("unterminated /regex/", tl, tc)
            toks.append(("regex", text[i + 1 : j], tl, tc))
            bump(j + 1 - i)
            continue
        if ch == '"':
            buf = bytearray()
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise GrammarError("unterminated string literal", tl, tc)
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise GrammarError("dangling escape in string", tl, tc)
                    esc = text[j + 1]
                    if esc == "x":
                        hexpart = text[j + 2 : j + 4]
                        if len(hexpart) != 2 or not all(c in "0123456789abcdefABCDEF" for c in hexpart):
                            raise GrammarError("bad \\x escape in string", tl, tc)
                        buf.append(int(hexpart, 16))
                        j += 4
                        continue
                    if esc not in _STRING_ESCAPES:
                        raise GrammarError(f"unsupported string escape \\{esc}", tl, tc)
                    buf += _STRING_ESCAPES[esc]
                    j += 2
                    continue
                buf += text[j].encode("utf-8")
                j += 1
            if j >= n:
                raise GrammarError("unterminated string literal", tl, tc)
            raw = text[i : j + 1]
            toks.append(("string", (raw, bytes(buf)), tl, tc))
            bump(j + 1 - i)
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            toks.append(("ident", m.group(), tl, tc))
            bump(m.end() - i)
            continue
        raise GrammarError(f"unexpected character {ch!r}", tl, tc)
    return toks


# --- restricted regex validation ---

_ESCAPABLE = set('\\/.*+?()[]|nrt"\'dswDSW^$-')


def _check_pattern(src: str, line: int, col: int) -> None:
    i, n = 0, len(src)
    in_class = False
    while i < n:
        ch = src[i]
        if ch == "\\":
            if i + 1 >= n:
                raise GrammarError("dangling escape in pattern", line, col)
            esc = src[i + 1]
            if esc == "x":
                if i + 3 >= n or not all(c in "0123456789abcdefABCDEF" for c in src[i + 2 : i + 4]):
                    raise GrammarError("bad \\x escape in pattern", line, col)
                i += 4
                continue
            if esc not in _ESCAPABLE:
                raise GrammarError(f"unsupported escape \\{esc} in pattern", line, col)
            i += 2
            continue
        if in_class:
            if ch == "]":
                in_class = False
            i += 1
            continue
        if ch == "[":
            in_class = True
        elif ch in "{}":
            raise GrammarError("bounded repetition is not supported in patterns", line, col)
        elif ch in "^$":
            raise GrammarError("anchors are not supported in patterns", line, col)
        elif ch == "(" and src[i + 1 : i + 2] == "?":
            raise GrammarError("group extensions are not supported in patterns", line, col)
        i += 1
    if in_class:
        raise GrammarError("unterminated character class in pattern", line, col)


def compile_pattern(src: str, line: int = 0, col: int = 0) -> re.Pattern[bytes]:
    """Validate a token pattern and compile it as a byte-level regex."""
    _check_pattern(src, line, col)
    try:
        rx = re.compile(src.encode("utf-8"))
    except re.error as e:
        raise GrammarError(f"bad pattern: {e}", line, col) from None
    if rx.match(b"") is not None:
        raise GrammarError("pattern may match the empty string", line, col)
    return rx


# --- loader ---

def load_grammar(text: str | bytes, name: str = "grammar") -> GrammarSpec:
    """Parse grammar file text into a validated GrammarSpec."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise GrammarError(f"grammar file is not valid UTF-8: {e}") from None

    toks = _lex(text)
    pos = 0

    def peek(k=0):
        return toks[pos + k] if pos + k < len(toks) else ("eof", None, -1, -1)

    def take():
        nonlocal pos
        t = peek()
        if t[0] == "eof":
            raise GrammarError("unexpected end of grammar file")
        pos += 1
        return t

    def expect(kind, value=None):
        t = take()
        if t[0] != kind or (value is not None and t[1] != value):
            want = value if value is not None else kind
            raise GrammarError(f"expected {want!r}, got {t[1]!r}", t[2], t[3])
        return t

    rules: list[Rule] = []
    tokens: list[TokenDef] = []
    defined: dict[str, tuple[int, int]] = {}
    literal_names: dict[bytes, str] = {}
    literal_order: list[tuple[str, bytes]] = []
    start_directive: str | None = None
    ref_sites: list[tuple[str, int, int]] = []

    while peek()[0] != "eof":
        kind, val, tl, tc = take()
        if kind != "ident":
            raise GrammarError(f"expected a definition, got {val!r}", tl, tc)

        # "start NAME ;" directive, unless "start" is itself being defined.
        if val == "start" and peek()[0] == "ident" and peek(1)[1] == ";":
            _, target, _, _ = take()
            expect("op", ";")
            if start_directive is not None:
                raise GrammarError("duplicate start directive", tl, tc)
            start_directive = target
            continue

        if val in defined:
            raise GrammarError(f"duplicate definition of {val!r}", tl, tc)

        nxt = peek()
        if nxt[0] == "ident" and nxt[1] in ("skip", "comment"):
            take()
            is_comment = nxt[1] == "comment"
            rkind, rsrc, rl, rc = take()
            if rkind != "regex":
                raise GrammarError(f"{nxt[1]} definition needs a /pattern/", rl, rc)
            expect("op", ";")
            compile_pattern(rsrc, rl, rc)
            tokens.append(TokenDef(val, rsrc, skip=True, comment=is_comment))
            defined[val] = (tl, tc)
            continue

        expect("op", ":=")
        if peek()[0] == "regex":
            _, rsrc, rl, rc = take()
            expect("op", ";")
            compile_pattern(rsrc, rl, rc)
            tokens.append(TokenDef(val, rsrc))
            defined[val] = (tl, tc)
            continue

        # Rule body: alternatives of idents and string literals.
        alts: list[tuple[str, ...]] = []
        cur: list[str] = []
        while True:
            k, v, l, c = take()
            if k == "op" and v == ";":
                alts.append(tuple(cur))
                break
            if k == "op" and v == "|":
                alts.append(tuple(cur))
                cur = []
                continue
            if k == "ident":
                cur.append(v)
                ref_sites.append((v, l, c))
                continue
            if k == "string":
                raw, data = v
                if not data:
                    raise GrammarError("empty literal is not allowed", l, c)
                if data not in literal_names:
                    literal_names[data] = raw
                    literal_order.append((raw, data))
                cur.append(literal_names[data])
                continue
            if k == "regex":
                raise GrammarError("patterns may not appear inside rule bodies", l, c)
            raise GrammarError(f"unexpected {v!r} in rule body", l, c)
        rules.append(Rule(val, tuple(alts)))
        defined[val] = (tl, tc)

    if not rules:
        raise GrammarError("grammar defines no rules")

    rule_names = {r.name for r in rules}
    for sym, l, c in ref_sites:
        if sym not in defined:
            raise GrammarError(f"undefined symbol {sym!r}", l, c)

    start = start_directive or rules[0].name
    if start not in rule_names:
        if start in defined:
            raise GrammarError(f"start symbol {start!r} is a token, not a rule")
        raise GrammarError(f"start rule {start!r} is not defined")

    return GrammarSpec(
        name=name,
        tokens=tuple(tokens),
        rules=tuple(rules),
        start_rule=start,
        skip_classes=frozenset(t.name for t in tokens if t.skip),
        comment_classes=frozenset(t.name for t in tokens if t.comment),
        literals=tuple(literal_order),
    )


def load_grammar_file(path: str) -> GrammarSpec:
    with open(path, "rb") as f:
        data = f.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return load_grammar(data, name=stem)


def bundled_path(relative: str) -> str:
    """Path to a data file shipped inside the package (grammars, seeds)."""
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), relative)


def bundled_grammar(name: str) -> GrammarSpec:
    return load_grammar_file(bundled_path(os.path.join("grammars", name + ".g")))
