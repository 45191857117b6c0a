"""Input minimization that preserves the coverage signature.

builtin_trim removes fixed-size chunks like classic greybox trimmers do.
tree_trim parses the input and excises whole subtrees instead, so syntactic
units disappear in one step; inputs that do not parse fall back to the
byte-chunk path.  The oracle is any callable mapping input bytes to a
comparable signature; a trim step is kept only when the signature is
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import GrammarSpec
from .parser import ParseError, enumerate_subtrees, excise, parse

CHUNK_DIVISORS = (16, 32, 64, 128, 256, 512, 1024)
MIN_CHUNK = 4


@dataclass
class TrimOutcome:
    trimmed: bytes
    bytes_removed: int
    executions_used: int  # oracle calls, baseline excluded
    mode: str  # "builtin" | "tree" | "builtin_fallback"
    still_parses: bool | None  # None when no grammar was available


def builtin_trim(data: bytes, oracle, g: GrammarSpec | None = None) -> TrimOutcome:
    """Remove byte chunks front to back, halving the chunk size per pass."""
    base = oracle(data)
    cur = data
    execs = 0
    for divisor in CHUNK_DIVISORS:
        chunk = max(len(cur) // divisor, MIN_CHUNK)
        pos = 0
        while pos < len(cur):
            take = min(chunk, len(cur) - pos)
            if take == len(cur):
                break  # never produce an empty input
            cand = cur[:pos] + cur[pos + take :]
            execs += 1
            if oracle(cand) == base:
                cur = cand
            else:
                pos += take
        if chunk == MIN_CHUNK:
            break  # later passes would repeat the same schedule
    return TrimOutcome(cur, len(data) - len(cur), execs, "builtin", _parses(g, cur))


def tree_trim(data: bytes, g: GrammarSpec, oracle) -> TrimOutcome:
    """Excise whole subtrees, largest and shallowest first.

    After every accepted excision the input is reparsed and the scan starts
    over.  An input that stops parsing mid-trim is returned as-is; one that
    never parsed goes through builtin_trim instead.
    """
    base = oracle(data)
    try:
        parse(g, data)
    except ParseError:
        out = builtin_trim(data, oracle, g)
        return TrimOutcome(
            out.trimmed, out.bytes_removed, out.executions_used, "builtin_fallback", out.still_parses
        )

    cur = data
    execs = 0
    progressed = True
    while progressed:
        progressed = False
        try:
            tree = parse(g, cur)
        except ParseError:
            return TrimOutcome(cur, len(data) - len(cur), execs, "tree", False)
        refs = enumerate_subtrees(tree)
        order = sorted(
            range(len(refs)), key=lambda i: (len(refs[i].path), -refs[i].size_bytes, i)
        )
        for idx in order:
            ref = refs[idx]
            if ref.size_bytes == 0 or ref.size_bytes == len(cur):
                continue
            cand = excise(cur, ref)
            execs += 1
            if oracle(cand) == base:
                cur = cand
                progressed = True
                break
    return TrimOutcome(cur, len(data) - len(cur), execs, "tree", True)


def _parses(g: GrammarSpec | None, data: bytes) -> bool | None:
    if g is None:
        return None
    try:
        parse(g, data)
        return True
    except ParseError:
        return False
