"""Tokenizing, Earley parsing into concrete syntax trees, and tree surgery.

Trees are concrete: every node carries a byte span into the original input,
and serializing a node is exactly ``source[start:end]``.  Skip-class trivia
between tokens is covered by the nearest enclosing rule node's span, so the
root always spans the whole input and excising or replacing a subtree is
plain byte surgery on its span.

Ambiguity is resolved deterministically: earlier-listed alternatives win,
then longer leftmost children.
"""

from __future__ import annotations

import sys
import weakref
from dataclasses import dataclass

from .grammar import GrammarSpec, compile_pattern, is_literal_symbol


class ParseError(Exception):
    """Input does not tokenize or derive from the grammar."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset
        self.reason = message


class SpanError(ValueError):
    """A subtree reference does not fit the given source."""


@dataclass(frozen=True)
class Token:
    kind: str
    start: int
    end: int


@dataclass(frozen=True)
class ParseTree:
    kind: str
    start: int
    end: int
    children: tuple["ParseTree", ...]
    source: bytes
    is_token: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def lexeme(self) -> bytes | None:
        return self.source[self.start : self.end] if self.is_token else None

    @property
    def size_bytes(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class SubtreeRef:
    path: tuple[int, ...]
    kind: str
    start: int
    end: int

    @property
    def size_bytes(self) -> int:
        return self.end - self.start


# --- compiled grammars, cached per GrammarSpec instance ---

class _Compiled:
    def __init__(self, g: GrammarSpec):
        self.start = g.start_rule
        # Literals sorted into first-definition order; matched before named
        # tokens so keywords beat identifier patterns on equal length.
        self.literals = [(name, data) for name, data in g.literals]
        self.named = [
            (t.name, compile_pattern(t.pattern), t.skip, t.comment) for t in g.tokens
        ]
        self.alts: dict[str, list[tuple[tuple[str, str], ...]]] = {}
        rule_names = {r.name for r in g.rules}
        for r in g.rules:
            compiled_alts = []
            for alt in r.alternatives:
                syms = tuple(
                    ("nt", s) if s in rule_names else ("t", s) for s in alt
                )
                compiled_alts.append(syms)
            self.alts[r.name] = compiled_alts
        self.nullable = self._nullable_set()

    def _nullable_set(self) -> set[str]:
        nullable: set[str] = set()
        changed = True
        while changed:
            changed = False
            for name, alts in self.alts.items():
                if name in nullable:
                    continue
                for syms in alts:
                    if all(t == "nt" and s in nullable for t, s in syms):
                        nullable.add(name)
                        changed = True
                        break
        return nullable


_compiled_cache: "weakref.WeakKeyDictionary[GrammarSpec, _Compiled]" = weakref.WeakKeyDictionary()


def _compiled(g: GrammarSpec) -> _Compiled:
    c = _compiled_cache.get(g)
    if c is None:
        c = _Compiled(g)
        _compiled_cache[g] = c
    return c


# --- tokenizing ---

def tokenize(g: GrammarSpec, data: bytes) -> tuple[list[Token], list[Token]]:
    """Maximal-munch scan.  Returns (tokens, trivia); raises ParseError."""
    c = _compiled(g)
    toks: list[Token] = []
    trivia: list[Token] = []
    pos, n = 0, len(data)
    while pos < n:
        best_len = 0
        best_name = None
        best_skip = False
        for name, lit in c.literals:
            if len(lit) > best_len and data.startswith(lit, pos):
                best_len = len(lit)
                best_name = name
        for name, rx, skip, _comment in c.named:
            m = rx.match(data, pos)
            if m is not None and m.end() - pos > best_len:
                best_len = m.end() - pos
                best_name = name
                best_skip = skip
        if best_name is None:
            raise ParseError(pos, "no token matches input")
        tok = Token(best_name, pos, pos + best_len)
        (trivia if best_skip else toks).append(tok)
        pos += best_len
    return toks, trivia


# --- Earley recognizer ---

def _recognize(c: _Compiled, toks: list[Token]):
    n = len(toks)
    charts: list[list[tuple]] = [[] for _ in range(n + 1)]
    seen: list[set] = [set() for _ in range(n + 1)]
    waiting: list[dict] = [{} for _ in range(n + 1)]
    completions: dict[tuple[str, int], set[int]] = {}

    def add(k, item):
        if item not in seen[k]:
            seen[k].add(item)
            charts[k].append(item)

    for ai in range(len(c.alts[c.start])):
        add(0, (c.start, ai, 0, 0))

    frontier = 0
    for k in range(n + 1):
        chart = charts[k]
        if chart:
            frontier = k
        idx = 0
        while idx < len(chart):
            nt, ai, dot, org = chart[idx]
            idx += 1
            syms = c.alts[nt][ai]
            if dot < len(syms):
                typ, name = syms[dot]
                if typ == "nt":
                    waiting[k].setdefault(name, []).append((nt, ai, dot, org))
                    for aj in range(len(c.alts[name])):
                        add(k, (name, aj, 0, k))
                    # Nullable prediction: advance over the symbol as well,
                    # which stands in for an empty completion at this set.
                    if name in c.nullable:
                        add(k, (nt, ai, dot + 1, org))
                else:
                    if k < n and toks[k].kind == name:
                        add(k + 1, (nt, ai, dot + 1, org))
            else:
                completions.setdefault((nt, org), set()).add(k)
                if org < k:
                    for nt2, ai2, dot2, org2 in waiting[org].get(nt, ()):
                        add(k, (nt2, ai2, dot2 + 1, org2))
    return completions, frontier


# --- tree building with deterministic disambiguation ---

def _build_tree(c: _Compiled, toks: list[Token], data: bytes,
                completions: dict[tuple[str, int], set[int]]):
    n = len(toks)
    memo_fail: set = set()
    guard_hits = 0

    def byte_at(tok_index: int) -> int:
        return toks[tok_index].start if tok_index < n else len(data)

    def node_for(nt, i, j, active):
        nonlocal guard_hits
        key = (nt, i, j)
        if key in active:
            guard_hits += 1
            return None
        active.add(key)
        try:
            for ai, syms in enumerate(c.alts[nt]):
                kids = split(nt, ai, syms, 0, i, j, active)
                if kids is not None:
                    if kids:
                        start, end = kids[0].start, kids[-1].end
                    else:
                        start = end = byte_at(i)
                    return ParseTree(nt, start, end, tuple(kids), data)
            return None
        finally:
            active.discard(key)

    def split(nt, ai, syms, si, pos, j, active):
        nonlocal guard_hits
        key = (nt, ai, si, pos, j)
        if key in memo_fail:
            return None
        before = guard_hits
        if si == len(syms):
            return [] if pos == j else None
        typ, name = syms[si]
        if typ == "t":
            if pos < j and toks[pos].kind == name:
                rest = split(nt, ai, syms, si + 1, pos + 1, j, active)
                if rest is not None:
                    leaf = ParseTree(name, toks[pos].start, toks[pos].end, (), data, True)
                    return [leaf] + rest
        else:
            spans = completions.get((name, pos))
            if spans:
                # Longest leftmost child wins.
                for e in sorted((e for e in spans if e <= j), reverse=True):
                    child = node_for(name, pos, e, active)
                    if child is None:
                        continue
                    rest = split(nt, ai, syms, si + 1, e, j, active)
                    if rest is not None:
                        return [child] + rest
        # Only memoize failures that did not depend on the cycle guard.
        if guard_hits == before:
            memo_fail.add(key)
        return None

    return node_for(c.start, 0, n, set())


def parse(g: GrammarSpec, data: bytes) -> ParseTree:
    """Parse bytes into a concrete syntax tree; raises ParseError."""
    c = _compiled(g)
    toks, _trivia = tokenize(g, data)
    n = len(toks)
    completions, frontier = _recognize(c, toks)
    accepted = n in completions.get((c.start, 0), ())
    if not accepted:
        offset = toks[frontier].start if frontier < n else len(data)
        raise ParseError(offset, "no derivation for input")

    limit = sys.getrecursionlimit()
    want = 10000 + 16 * n
    if want > limit:
        sys.setrecursionlimit(want)
    try:
        root = _build_tree(c, toks, data, completions)
    finally:
        if want > limit:
            sys.setrecursionlimit(limit)
    if root is None:
        raise ParseError(0, "recognized but no tree could be built")
    # The root owns all leading and trailing trivia.
    return ParseTree(root.kind, 0, len(data), root.children, data)


def serialize(t: ParseTree) -> bytes:
    return t.source[t.start : t.end]


def resolve(t: ParseTree, ref: SubtreeRef) -> ParseTree:
    node = t
    for step in ref.path:
        node = node.children[step]
    return node


def enumerate_subtrees(t: ParseTree, max_bytes: int | None = None) -> list[SubtreeRef]:
    """All non-root rule nodes in preorder, optionally capped by span size."""
    out: list[SubtreeRef] = []
    stack = [(t, (), True)]
    while stack:
        node, path, is_root = stack.pop()
        if not is_root and not node.is_token:
            if max_bytes is None or node.size_bytes <= max_bytes:
                out.append(SubtreeRef(path, node.kind, node.start, node.end))
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((node.children[i], path + (i,), False))
    return out


def _check_span(source: bytes, ref: SubtreeRef) -> None:
    if not (0 <= ref.start <= ref.end <= len(source)):
        raise SpanError(f"span {ref.start}:{ref.end} outside source of {len(source)} bytes")


def excise(source: bytes, ref: SubtreeRef) -> bytes:
    """Remove the subtree's bytes from the source."""
    _check_span(source, ref)
    return source[: ref.start] + source[ref.end :]


def splice(source: bytes, ref: SubtreeRef, replacement: bytes) -> bytes:
    """Replace the subtree's bytes with the replacement bytes."""
    _check_span(source, ref)
    return source[: ref.start] + replacement + source[ref.end :]


def node_kinds(g: GrammarSpec) -> set[str]:
    """All kinds that can appear in trees: rules, tokens, literal names."""
    kinds = {r.name for r in g.rules}
    kinds.update(t.name for t in g.tokens if not t.skip)
    kinds.update(name for name, _ in g.literals)
    return kinds
