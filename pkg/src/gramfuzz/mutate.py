"""Mutation strategies: deterministic byte stages, havoc, splice, dictionary
mutation over token runs, and subtree replacement.

Deterministic stages follow the classic greybox lineup (bit and byte flips,
8/16/32-bit arithmetic, interesting-value overwrites).  Dictionary mutation
scans token-run boundaries instead of every byte offset, so tokens never land
inside an identifier or number.  Tree mutation replaces each subtree of the
parsed input with byte chunks harvested from its own and a partner's parse
trees; inputs that do not parse produce an empty batch.
"""

from __future__ import annotations

import re
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .grammar import GrammarSpec
from .parser import ParseError, enumerate_subtrees, parse, splice

# Caps for tree mutation: inputs above the size limit are skipped, oversized
# pools are sampled down, and one invocation emits at most MAX_TREE_MUTANTS.
MAX_TREE_INPUT = 10_000
MAX_TREE_POOL = 10_000
MAX_TREE_MUTANTS = 10_000
MAX_SUBTREE_BYTES = 200

ARITH_MAX = 35

INTERESTING_8 = (-128, -1, 0, 1, 16, 32, 64, 100, 127)
INTERESTING_16 = INTERESTING_8 + (-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767)
INTERESTING_32 = INTERESTING_16 + (
    -2147483648,
    -100663046,
    -32769,
    32768,
    65535,
    65536,
    100663045,
    2147483647,
)

_RUN_RE = re.compile(rb"[0-9A-Za-z]+")


class RandomSource:
    """Deterministic random stream for mutations (PCG64, fixed seed)."""

    def __init__(self, seed: int):
        self.seed = seed
        self.algorithm = "pcg64"
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def below(self, n: int) -> int:
        return int(self._gen.integers(n))

    def byte(self) -> int:
        return int(self._gen.integers(256))

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def sample_sorted(self, n: int, k: int) -> list[int]:
        """k distinct indices out of n, in ascending order."""
        picked = self._gen.choice(n, size=k, replace=False)
        picked.sort()
        return picked.tolist()


@dataclass
class MutationBatch:
    strategy: str
    mutants: list[bytes] = field(repr=False)
    generated_count: int  # count before any cap
    parse_us: int = 0


@dataclass(frozen=True)
class TokenRun:
    start: int
    end: int


@dataclass
class Dictionary:
    """Byte-string tokens tagged by origin ("user" or "auto")."""

    entries: list[tuple[bytes, str]]

    def __post_init__(self):
        seen = set()
        cleaned = []
        for tok, origin in self.entries:
            if not tok or tok in seen:
                continue
            seen.add(tok)
            cleaned.append((tok, origin))
        self.entries = cleaned[:128]

    @property
    def tokens(self) -> list[bytes]:
        return [t for t, _ in self.entries]

    def merged_with(self, other: "Dictionary") -> "Dictionary":
        return Dictionary(self.entries + other.entries)

    @classmethod
    def load(cls, path: str) -> "Dictionary":
        """Read the usual fuzzing dictionary format: name="value" per line."""
        entries = []
        with open(path, "rb") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith(b"#"):
                    continue
                first = line.find(b'"')
                last = line.rfind(b'"')
                if first < 0 or last <= first:
                    raise ValueError(f"{path}:{lineno}: expected a quoted value")
                entries.append((_unescape(line[first + 1 : last]), "user"))
        return cls(entries)


def _unescape(raw: bytes) -> bytes:
    out = bytearray()
    i = 0
    while i < len(raw):
        if raw[i : i + 1] == b"\\" and i + 1 < len(raw):
            nxt = raw[i + 1 : i + 2]
            if nxt == b"x" and i + 3 < len(raw):
                out.append(int(raw[i + 2 : i + 4], 16))
                i += 4
                continue
            out += nxt
            i += 2
            continue
        out.append(raw[i])
        i += 1
    return bytes(out)


# --- deterministic stages ---

def _flip_bits(data: bytes, width: int) -> MutationBatch:
    out = []
    nbits = len(data) * 8
    for i in range(nbits - width + 1):
        b = bytearray(data)
        for k in range(width):
            b[(i + k) >> 3] ^= 1 << ((i + k) & 7)
        out.append(bytes(b))
    return MutationBatch(f"flip{width}", out, len(out))


def _flip_bytes(data: bytes, nbytes: int) -> MutationBatch:
    out = []
    for i in range(len(data) - nbytes + 1):
        b = bytearray(data)
        for k in range(nbytes):
            b[i + k] ^= 0xFF
        out.append(bytes(b))
    return MutationBatch(f"flip{nbytes * 8}", out, len(out))


def _arith8(data: bytes) -> MutationBatch:
    out = []
    for i in range(len(data)):
        orig = data[i]
        for v in range(1, ARITH_MAX + 1):
            for nv in ((orig + v) & 0xFF, (orig - v) & 0xFF):
                b = bytearray(data)
                b[i] = nv
                out.append(bytes(b))
    return MutationBatch("arith8", out, len(out))


def _arith_wide(data: bytes, width: int) -> MutationBatch:
    out = []
    mask = (1 << (width * 8)) - 1
    for i in range(len(data) - width + 1):
        chunk = data[i : i + width]
        for endian in ("little", "big"):
            base = int.from_bytes(chunk, endian)
            for v in range(1, ARITH_MAX + 1):
                for nv in ((base + v) & mask, (base - v) & mask):
                    nb = nv.to_bytes(width, endian)
                    if nb == chunk:
                        continue
                    b = bytearray(data)
                    b[i : i + width] = nb
                    out.append(bytes(b))
    return MutationBatch(f"arith{width * 8}", out, len(out))


def _interest(data: bytes, width: int, values) -> MutationBatch:
    out = []
    mask = (1 << (width * 8)) - 1
    endians = ("little",) if width == 1 else ("little", "big")
    for i in range(len(data) - width + 1):
        chunk = data[i : i + width]
        for v in values:
            for endian in endians:
                nb = (v & mask).to_bytes(width, endian)
                if nb == chunk:
                    continue
                b = bytearray(data)
                b[i : i + width] = nb
                out.append(bytes(b))
    return MutationBatch(f"interest{width * 8}", out, len(out))


def deterministic_stages(data: bytes):
    """Yield the full deterministic lineup, one batch per stage."""
    yield _flip_bits(data, 1)
    yield _flip_bits(data, 2)
    yield _flip_bits(data, 4)
    yield _flip_bytes(data, 1)
    yield _flip_bytes(data, 2)
    yield _flip_bytes(data, 4)
    yield _arith8(data)
    yield _arith_wide(data, 2)
    yield _arith_wide(data, 4)
    yield _interest(data, 1, INTERESTING_8)
    yield _interest(data, 2, INTERESTING_16)
    yield _interest(data, 4, INTERESTING_32)


DETERMINISTIC_STAGE_NAMES = (
    "flip1",
    "flip2",
    "flip4",
    "flip8",
    "flip16",
    "flip32",
    "arith8",
    "arith16",
    "arith32",
    "interest8",
    "interest16",
    "interest32",
)


# --- havoc ---

def _havoc_one(buf: bytearray, rng: RandomSource, max_len: int) -> None:
    n = len(buf)
    op = rng.below(12)
    if op == 0:  # flip one bit
        pos = rng.below(n * 8)
        buf[pos >> 3] ^= 1 << (pos & 7)
    elif op == 1:  # interesting byte
        buf[rng.below(n)] = rng.choice(INTERESTING_8) & 0xFF
    elif op == 2 and n >= 2:  # interesting 16-bit word
        i = rng.below(n - 1)
        v = rng.choice(INTERESTING_16) & 0xFFFF
        buf[i : i + 2] = v.to_bytes(2, rng.choice(("little", "big")))
    elif op == 3 and n >= 4:  # interesting 32-bit word
        i = rng.below(n - 3)
        v = rng.choice(INTERESTING_32) & 0xFFFFFFFF
        buf[i : i + 4] = v.to_bytes(4, rng.choice(("little", "big")))
    elif op == 4:  # arith8
        i = rng.below(n)
        delta = 1 + rng.below(ARITH_MAX)
        buf[i] = (buf[i] + (delta if rng.below(2) else -delta)) & 0xFF
    elif op == 5 and n >= 2:  # arith16
        i = rng.below(n - 1)
        endian = rng.choice(("little", "big"))
        v = int.from_bytes(buf[i : i + 2], endian)
        delta = 1 + rng.below(ARITH_MAX)
        v = (v + (delta if rng.below(2) else -delta)) & 0xFFFF
        buf[i : i + 2] = v.to_bytes(2, endian)
    elif op == 6 and n >= 4:  # arith32
        i = rng.below(n - 3)
        endian = rng.choice(("little", "big"))
        v = int.from_bytes(buf[i : i + 4], endian)
        delta = 1 + rng.below(ARITH_MAX)
        v = (v + (delta if rng.below(2) else -delta)) & 0xFFFFFFFF
        buf[i : i + 4] = v.to_bytes(4, endian)
    elif op == 7:  # xor byte with nonzero value: guaranteed change
        buf[rng.below(n)] ^= 1 + rng.below(255)
    elif op == 8 and n >= 2:  # delete block, never emptying the input
        size = 1 + rng.below(min(16, n - 1))
        pos = rng.below(n - size + 1)
        del buf[pos : pos + size]
    elif op == 9 and n < max_len:  # clone a block somewhere else
        size = min(1 + rng.below(min(16, n)), max_len - n)
        src = rng.below(n - size + 1)
        chunk = bytes(buf[src : src + size])
        dst = rng.below(n + 1)
        buf[dst:dst] = chunk
    elif op == 10:  # overwrite block with another block
        size = 1 + rng.below(min(16, n))
        src = rng.below(n - size + 1)
        dst = rng.below(n - size + 1)
        buf[dst : dst + size] = buf[src : src + size]
    elif op == 11:  # overwrite block with one repeated byte
        size = 1 + rng.below(min(16, n))
        dst = rng.below(n - size + 1)
        buf[dst : dst + size] = bytes([rng.byte()]) * size


def havoc(data: bytes, rng: RandomSource, count: int, max_len: int = 4096) -> MutationBatch:
    """Stacked random mutations: 2..64 operations per mutant."""
    out = []
    for _ in range(count):
        buf = bytearray(data)
        for _ in range(1 << (1 + rng.below(6))):
            if buf:
                _havoc_one(buf, rng, max_len)
        out.append(bytes(buf))
    return MutationBatch("havoc", out, len(out))


def splice_inputs(a: bytes, b: bytes, rng: RandomSource) -> bytes | None:
    """Crossover at a random point strictly inside the differing region.

    Returns None when the inputs are too short or too similar to splice.
    """
    if len(a) < 2 or len(b) < 2:
        return None
    n = min(len(a), len(b))
    f_loc = next((i for i in range(n) if a[i] != b[i]), -1)
    if f_loc < 0:
        return None
    l_loc = next(i for i in range(n - 1, -1, -1) if a[i] != b[i])
    if l_loc - f_loc < 2:
        return None
    split = f_loc + 1 + rng.below(l_loc - f_loc - 1)
    return a[:split] + b[split:]


# --- dictionary mutation over token runs ---

def locate_token_runs(data: bytes) -> list[TokenRun]:
    """Maximal runs of ASCII alphanumerics."""
    return [TokenRun(m.start(), m.end()) for m in _RUN_RE.finditer(data)]


def dictionary_positions(data: bytes) -> list[tuple[int, int]]:
    """(insert_at, overwrite_end) pairs: token runs step as one unit.

    The final pair sits at end-of-input and only supports insertion.
    """
    run_end = {r.start: r.end for r in locate_token_runs(data)}
    pos = []
    i, n = 0, len(data)
    while i < n:
        j = run_end.get(i, i + 1)
        pos.append((i, j))
        i = j
    pos.append((n, n))
    return pos


def dictionary_mutate(data: bytes, d: Dictionary) -> MutationBatch:
    """Insert and overwrite dictionary tokens at run boundaries only."""
    out = []
    n = len(data)
    for i, j in dictionary_positions(data):
        for tok in d.tokens:
            out.append(data[:i] + tok + data[i:])
            if i < n:
                out.append(data[:i] + tok + data[j:])
    return MutationBatch("dictionary", out, len(out))


def dictionary_batches(data: bytes, d: Dictionary) -> list[MutationBatch]:
    """Same mutants as dictionary_mutate, split by origin and operation.

    Strategies: dict_ui / dict_uo (user insert/overwrite), dict_ai / dict_ao
    (auto insert/overwrite).
    """
    buckets: dict[str, list[bytes]] = {
        "dict_ui": [],
        "dict_uo": [],
        "dict_ai": [],
        "dict_ao": [],
    }
    n = len(data)
    for i, j in dictionary_positions(data):
        for tok, origin in d.entries:
            prefix = "dict_u" if origin == "user" else "dict_a"
            buckets[prefix + "i"].append(data[:i] + tok + data[i:])
            if i < n:
                buckets[prefix + "o"].append(data[:i] + tok + data[j:])
    return [MutationBatch(name, muts, len(muts)) for name, muts in buckets.items()]


def naive_dictionary_mutate(data: bytes, d: Dictionary) -> MutationBatch:
    """Position-blind baseline: every byte offset, no run awareness."""
    out = []
    n = len(data)
    for i in range(n + 1):
        for tok in d.tokens:
            out.append(data[:i] + tok + data[i:])
            if i + len(tok) <= n:
                out.append(data[:i] + tok + data[i + len(tok) :])
    return MutationBatch("dictionary_naive", out, len(out))


def naive_dictionary_count(data: bytes, d: Dictionary) -> int:
    """Mutant count of naive_dictionary_mutate without building the mutants."""
    n = len(data)
    return sum(n + 1 + max(0, n - len(tok) + 1) for tok in d.tokens)


def extract_auto_tokens(corpus, g: GrammarSpec | None = None, limit: int = 64) -> Dictionary:
    """Auto dictionary: grammar literals plus frequent corpus runs."""
    entries: list[tuple[bytes, str]] = []
    if g is not None:
        for _name, lit in g.literals:
            entries.append((lit, "auto"))
    counts: Counter[bytes] = Counter()
    for data in corpus:
        for run in set(_RUN_RE.findall(data)):
            if 2 <= len(run) <= 32:
                counts[run] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    for tok, _count in ranked[:limit]:
        entries.append((tok, "auto"))
    return Dictionary(entries)


# --- tree mutation ---

def _empty_batch(strategy: str, parse_us: int = 0) -> MutationBatch:
    return MutationBatch(strategy, [], 0, parse_us)


def tree_mutate(
    tar: bytes,
    pro: bytes | None,
    g: GrammarSpec,
    rng: RandomSource,
    same_kind: bool = False,
    now_us=None,
) -> MutationBatch:
    """Replace each subtree of tar with chunks pooled from tar and pro.

    The pool holds (kind, bytes) pairs for every subtree no larger than
    MAX_SUBTREE_BYTES, target subtrees first.  With same_kind=True only
    chunks from nodes of the target subtree's kind are spliced in.
    """
    if now_us is None:
        now_us = lambda: time.perf_counter_ns() // 1000
    parse_us = 0
    if len(tar) > MAX_TREE_INPUT:
        return _empty_batch("tree")
    t0 = now_us()
    try:
        tar_tree = parse(g, tar)
    except ParseError:
        return _empty_batch("tree", now_us() - t0)
    parse_us += now_us() - t0

    tar_refs = enumerate_subtrees(tar_tree)
    pool: list[tuple[str, bytes]] = [
        (r.kind, tar[r.start : r.end]) for r in tar_refs if r.size_bytes <= MAX_SUBTREE_BYTES
    ]
    if pro is not None and len(pro) <= MAX_TREE_INPUT:
        t0 = now_us()
        try:
            pro_tree = parse(g, pro)
        except ParseError:
            pro_tree = None
        parse_us += now_us() - t0
        if pro_tree is not None:
            pool.extend(
                (r.kind, pro[r.start : r.end])
                for r in enumerate_subtrees(pro_tree)
                if r.size_bytes <= MAX_SUBTREE_BYTES
            )
    if len(pool) > MAX_TREE_POOL:
        pool = [pool[i] for i in rng.sample_sorted(len(pool), MAX_TREE_POOL)]

    mutants: list[bytes] = []
    candidates = 0
    for ref in tar_refs:
        for kind, chunk in pool:
            if same_kind and kind != ref.kind:
                continue
            candidates += 1
            if len(mutants) < MAX_TREE_MUTANTS:
                mutants.append(splice(tar, ref, chunk))
    return MutationBatch("tree", mutants, candidates, parse_us)
