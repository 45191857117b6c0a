"""Campaign loop: seed distillation, queue scheduling, novelty admission,
and run artifacts.

Every queue entry gets trimmed on its first visit, then fuzzed by the
enabled strategies: deterministic byte stages, dictionary insertion and
overwrite at token-run boundaries, stacked havoc, splice crossover, and
subtree replacement against a random queue partner.  Mutants whose coverage
map shows a new edge or a new hit-count bucket join the queue; crashes and
hangs are deduplicated and saved aside.

With clock="virtual" every timestamp comes from a call counter instead of
the wall clock, so stats.csv and admitted.log are byte-identical across
replays of the same configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .coverage import BACKEND, GlobalCoverage, signature, warmup
from .grammar import GrammarSpec, bundled_grammar, bundled_path, load_grammar_file
from .harness import ExecResult, TargetSpec, execute
from .mutate import (
    Dictionary,
    MutationBatch,
    RandomSource,
    deterministic_stages,
    dictionary_batches,
    extract_auto_tokens,
    havoc,
    naive_dictionary_count,
    splice_inputs,
    tree_mutate,
)
from .parser import ParseError, parse, tokenize
from .trim import tree_trim

MAX_SAVED_HANGS = 16


class CampaignError(Exception):
    """Configuration or corpus problem that prevents a run."""


class _StopCampaign(Exception):
    """Internal: unwind out of a trim pass once a stop condition fired."""


class Clock:
    """Wall time in microseconds, or a deterministic call counter."""

    def __init__(self, mode: str):
        self.mode = mode
        self._ticks = 0

    def now_us(self) -> int:
        if self.mode == "wall":
            return time.perf_counter_ns() // 1000
        self._ticks += 1
        return self._ticks


@dataclass
class QueueEntry:
    id: int
    data: bytes
    source: str  # "seed" or the strategy that produced it
    parent: int | None
    novelty: str
    filename: str
    trimmed: bool = False
    det_done: bool = False


@dataclass
class StrategyStats:
    generated: int = 0
    interesting: int = 0
    parse_us: int = 0
    mutate_us: int = 0
    exec_us: int = 0


@dataclass
class CampaignConfig:
    grammar: GrammarSpec | str  # spec, bundled name, or path to a .g file
    target: TargetSpec
    seeds: list[tuple[str, bytes]]
    out_dir: str
    rng_seed: int = 1
    cycles: int | None = None
    minutes: float | None = None
    exec_limit: int | None = None
    havoc_budget: int = 256
    deterministic: str = "first_visit"  # first_visit | seeds_only | off
    enable_dict: bool = True
    enable_tree: bool = True
    enable_trim: bool = True
    tree_same_kind: bool = False
    tree_partner_draws: int = 1
    dict_path: str | None = None
    max_input_len: int = 4096
    stop_on_crash: bool = False
    clock: str = "wall"  # wall | virtual
    workers: int = 1

    def validate(self) -> None:
        if self.deterministic not in ("first_visit", "seeds_only", "off"):
            raise CampaignError(f"bad deterministic policy {self.deterministic!r}")
        if self.clock not in ("wall", "virtual"):
            raise CampaignError(f"bad clock mode {self.clock!r}")
        if self.clock == "virtual" and self.minutes is not None:
            raise CampaignError("minutes limit needs the wall clock")
        if self.cycles is None and self.minutes is None and self.exec_limit is None:
            raise CampaignError("need a stop condition: cycles, minutes, or exec_limit")
        if self.workers != 1:
            raise CampaignError("this build runs single-process; workers must be 1")
        if not self.seeds:
            raise CampaignError("no seeds")
        if self.havoc_budget < 1 or self.tree_partner_draws < 1 or self.max_input_len < 1:
            raise CampaignError("budgets must be positive")


@dataclass
class CampaignSummary:
    out_dir: str
    stop_reason: str
    executions: int
    queue_len: int
    edges: int
    crashes: dict[str, int]  # token -> execution index at discovery
    hang_count: int
    cycles_run: int
    admitted: int


def resolve_grammar(spec: GrammarSpec | str) -> GrammarSpec:
    """Accept a compiled spec, a bundled grammar name, or a .g file path."""
    if isinstance(spec, GrammarSpec):
        return spec
    if os.sep in spec or spec.endswith(".g"):
        return load_grammar_file(spec)
    return bundled_grammar(spec)


def bundled_seed_dir(name: str) -> str:
    """Directory of a seed corpus shipped with the package."""
    return bundled_path(os.path.join("seeds", name))


def load_seed_dir(path: str) -> list[tuple[str, bytes]]:
    if not os.path.isdir(path):
        raise CampaignError(f"seed directory not found: {path}")
    seeds = []
    for name in sorted(os.listdir(path)):
        full = os.path.join(path, name)
        if os.path.isfile(full):
            with open(full, "rb") as f:
                seeds.append((name, f.read()))
    if not seeds:
        raise CampaignError(f"no seed files in {path}")
    return seeds


def strip_comments(g: GrammarSpec, data: bytes) -> bytes:
    """Drop comment trivia; fall back to spaces, then to the original.

    A candidate is accepted only if it yields the exact same non-trivia
    token stream, so a deletion that glues two tokens together
    (var/*c*/x -> varx) falls through to the space filler.
    """
    if not g.comment_classes:
        return data
    try:
        toks, trivia = tokenize(g, data)
    except ParseError:
        return data
    spans = [(t.start, t.end) for t in trivia if t.kind in g.comment_classes]
    if not spans:
        return data
    want = [(t.kind, data[t.start:t.end]) for t in toks]
    for filler in (b"", b" "):
        out = bytearray()
        pos = 0
        for s, e in spans:
            out += data[pos:s] + filler
            pos = e
        out += data[pos:]
        cand = bytes(out)
        try:
            got, _ = tokenize(g, cand)
            parse(g, cand)
        except ParseError:
            continue
        if [(t.kind, cand[t.start:t.end]) for t in got] == want:
            return cand
    return data


def distill_corpus(seeds, executor):
    """Greedy set cover over seed edge sets.

    Picks the seed adding the most uncovered edges (ties: smaller input,
    then corpus order) until nothing contributes.  Seeds that crash or hang
    are dropped.  Returns (kept, dropped_names).
    """
    infos = []
    dropped = []
    for name, data in seeds:
        res = executor(data)
        if res.status != "ok":
            dropped.append(name)
            continue
        edges = frozenset(np.flatnonzero(res.cov).tolist())
        infos.append((name, data, edges))
    covered: set[int] = set()
    kept = []
    remaining = list(range(len(infos)))
    while remaining:
        best_key = None
        best_pos = None
        for pos, i in enumerate(remaining):
            name, data, edges = infos[i]
            gain = len(edges - covered)
            if gain == 0:
                continue
            key = (-gain, len(data), i)
            if best_key is None or key < best_key:
                best_key = key
                best_pos = pos
        if best_pos is None:
            break
        i = remaining.pop(best_pos)
        name, data, edges = infos[i]
        kept.append((name, data))
        covered |= edges
    if not kept:
        raise CampaignError("no usable seeds after distillation")
    return kept, dropped


def _safe_token(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]", "_", token)[:64] or "crash"


class Campaign:
    def __init__(self, cfg: CampaignConfig, log=None):
        cfg.validate()
        self.cfg = cfg
        self.g = resolve_grammar(cfg.grammar)
        self.target = cfg.target
        self.log = log
        self.clock = Clock(cfg.clock)
        self.rng = RandomSource(cfg.rng_seed)
        self.cov = GlobalCoverage()
        self.queue: list[QueueEntry] = []
        self.next_id = 0
        self.execs = 0
        self.crashes: dict[str, int] = {}
        self.hang_hashes: set[str] = set()
        self.stats: dict[tuple[int, str], StrategyStats] = {}
        self.dict_rows: list[tuple[int, int, int, int]] = []
        self.admitted_lines: list[str] = []
        self._stop: str | None = None
        self._wall_start = time.perf_counter()
        self.cycles_run = 0
        self.dictionary = self._build_dictionary()

    # --- setup ---

    def _build_dictionary(self) -> Dictionary:
        auto = extract_auto_tokens([d for _n, d in self.cfg.seeds], self.g)
        if self.cfg.dict_path:
            return Dictionary.load(self.cfg.dict_path).merged_with(auto)
        return auto

    def _prepare_dirs(self) -> None:
        for sub in ("queue", "crashes", "hangs"):
            os.makedirs(os.path.join(self.cfg.out_dir, sub), exist_ok=True)

    # --- bookkeeping ---

    def _st(self, cycle: int, strategy: str) -> StrategyStats:
        key = (cycle, strategy)
        if key not in self.stats:
            self.stats[key] = StrategyStats()
        return self.stats[key]

    def _execute(self, data: bytes, st: StrategyStats) -> ExecResult:
        t0 = self.clock.now_us()
        res = execute(self.target, data)
        st.exec_us += self.clock.now_us() - t0
        self.execs += 1
        return res

    def _check_limits(self) -> None:
        if self._stop:
            return
        if self.cfg.exec_limit is not None and self.execs >= self.cfg.exec_limit:
            self._stop = "exec_limit"
        elif self.cfg.minutes is not None:
            if time.perf_counter() - self._wall_start >= self.cfg.minutes * 60:
                self._stop = "minutes"

    def _admit(self, data: bytes, strategy: str, novelty: str, parent: int | None,
               st: StrategyStats) -> QueueEntry:
        qid = self.next_id
        self.next_id += 1
        fname = f"id{qid:06d}_{strategy}"
        entry = QueueEntry(qid, data, strategy, parent, novelty, fname)
        self.queue.append(entry)
        with open(os.path.join(self.cfg.out_dir, "queue", fname), "wb") as f:
            f.write(data)
        digest = hashlib.sha256(data).hexdigest()
        self.admitted_lines.append(f"{digest} {fname} {novelty}")
        st.interesting += 1
        return entry

    def _record_failure(self, data: bytes, res: ExecResult) -> None:
        if res.status == "crash":
            token = res.crash_token or "crash"
            if token not in self.crashes:
                self.crashes[token] = self.execs
                path = os.path.join(self.cfg.out_dir, "crashes", _safe_token(token) + ".bin")
                with open(path, "wb") as f:
                    f.write(data)
            if self.cfg.stop_on_crash:
                self._stop = "crash"
            return
        digest = hashlib.sha256(data).hexdigest()
        if digest not in self.hang_hashes:
            if len(self.hang_hashes) < MAX_SAVED_HANGS:
                path = os.path.join(self.cfg.out_dir, "hangs", digest[:16] + ".bin")
                with open(path, "wb") as f:
                    f.write(data)
            self.hang_hashes.add(digest)

    def _process_result(self, data: bytes, res: ExecResult, strategy: str,
                        parent: int | None, st: StrategyStats) -> None:
        if res.status == "ok":
            novelty = self.cov.classify(res.cov)
            if novelty != "none":
                self._admit(data, strategy, novelty, parent, st)
            return
        # crashing and hanging runs still teach the virgin map their edges,
        # but never join the queue
        self.cov.classify(res.cov)
        self._record_failure(data, res)

    # --- seed phase ---

    def _seed_phase(self) -> None:
        st = self._st(0, "seed")
        kept, _dropped = distill_corpus(self.cfg.seeds, lambda d: self._execute(d, st))
        for _name, data in kept:
            stripped = strip_comments(self.g, data)
            res = self._execute(stripped, st)
            if res.status != "ok":  # stripping cannot break a seed, but be safe
                stripped, res = data, self._execute(data, st)
            novelty = self.cov.classify(res.cov)
            self._admit(stripped, "seed", novelty, None, st)
        st.generated += len(kept)

    # --- per-entry stages ---

    def _run_batch(self, entry: QueueEntry, batch: MutationBatch, cycle: int) -> None:
        st = self._st(cycle, batch.strategy)
        st.generated += batch.generated_count
        st.parse_us += batch.parse_us
        for m in batch.mutants:
            if self._stop:
                return
            if not m or len(m) > self.cfg.max_input_len:
                continue
            res = self._execute(m, st)
            self._process_result(m, res, batch.strategy, entry.id, st)
            self._check_limits()

    def _trim_stage(self, entry: QueueEntry, cycle: int) -> None:
        st = self._st(cycle, "trim")

        def oracle(data: bytes):
            if self._stop:
                raise _StopCampaign()
            res = self._execute(data, st)
            self._check_limits()
            if res.status != "ok":
                # a trim candidate that crashes or hangs is still a finding
                self.cov.classify(res.cov)
                self._record_failure(data, res)
                return ("status", res.status, res.crash_token)
            return signature(res.cov)

        try:
            outcome = tree_trim(entry.data, self.g, oracle)
        except _StopCampaign:
            entry.trimmed = True
            return
        if outcome.bytes_removed > 0 and outcome.trimmed:
            entry.data = outcome.trimmed
            with open(os.path.join(self.cfg.out_dir, "queue", entry.filename), "wb") as f:
                f.write(entry.data)
        entry.trimmed = True

    def _det_stage(self, entry: QueueEntry, cycle: int) -> None:
        t0 = self.clock.now_us()
        for batch in deterministic_stages(entry.data):
            st = self._st(cycle, batch.strategy)
            st.mutate_us += self.clock.now_us() - t0
            self._run_batch(entry, batch, cycle)
            if self._stop:
                return
            t0 = self.clock.now_us()

    def _dict_stage(self, entry: QueueEntry, cycle: int) -> None:
        if not self.dictionary.entries:
            return
        t0 = self.clock.now_us()
        batches = dictionary_batches(entry.data, self.dictionary)
        # generation time lands on the first row; the batches share one scan
        self._st(cycle, batches[0].strategy).mutate_us += self.clock.now_us() - t0
        enhanced = sum(b.generated_count for b in batches)
        naive = naive_dictionary_count(entry.data, self.dictionary)
        self.dict_rows.append((entry.id, len(entry.data), enhanced, naive))
        for batch in batches:
            self._run_batch(entry, batch, cycle)
            if self._stop:
                return

    def _havoc_stage(self, entry: QueueEntry, cycle: int) -> None:
        st = self._st(cycle, "havoc")
        t0 = self.clock.now_us()
        batch = havoc(entry.data, self.rng, self.cfg.havoc_budget, self.cfg.max_input_len)
        st.mutate_us += self.clock.now_us() - t0
        self._run_batch(entry, batch, cycle)

    def _splice_stage(self, entry: QueueEntry, cycle: int) -> None:
        if len(self.queue) < 2:
            return
        partner = self.queue[self.rng.below(len(self.queue))]
        if partner.id == entry.id:
            return
        st = self._st(cycle, "splice")
        t0 = self.clock.now_us()
        merged = splice_inputs(entry.data, partner.data, self.rng)
        if merged is None:
            st.mutate_us += self.clock.now_us() - t0
            return
        batch = havoc(merged, self.rng, max(1, self.cfg.havoc_budget // 2), self.cfg.max_input_len)
        batch = MutationBatch("splice", batch.mutants, batch.generated_count)
        st.mutate_us += self.clock.now_us() - t0
        self._run_batch(entry, batch, cycle)

    def _tree_stage(self, entry: QueueEntry, cycle: int) -> None:
        st = self._st(cycle, "tree")
        for _ in range(self.cfg.tree_partner_draws):
            if self._stop:
                return
            partner = self.queue[self.rng.below(len(self.queue))]
            t0 = self.clock.now_us()
            batch = tree_mutate(
                entry.data,
                partner.data,
                self.g,
                self.rng,
                same_kind=self.cfg.tree_same_kind,
                now_us=self.clock.now_us,
            )
            st.mutate_us += self.clock.now_us() - t0
            self._run_batch(entry, batch, cycle)

    def _fuzz_one(self, entry: QueueEntry, cycle: int) -> None:
        if self.cfg.enable_trim and not entry.trimmed:
            self._trim_stage(entry, cycle)
        policy = self.cfg.deterministic
        run_det = not entry.det_done and (
            policy == "first_visit" or (policy == "seeds_only" and entry.source == "seed")
        )
        if run_det:
            self._det_stage(entry, cycle)
            if self._stop:
                return
            if self.cfg.enable_dict:
                self._dict_stage(entry, cycle)
            entry.det_done = True
        if self._stop:
            return
        self._havoc_stage(entry, cycle)
        if self._stop:
            return
        self._splice_stage(entry, cycle)
        if self._stop:
            return
        if self.cfg.enable_tree:
            self._tree_stage(entry, cycle)

    # --- driver ---

    def run(self) -> CampaignSummary:
        warmup()
        self._prepare_dirs()
        self._seed_phase()
        self._check_limits()
        cycle = 0
        while not self._stop:
            if self.cfg.cycles is not None and cycle >= self.cfg.cycles:
                self._stop = "cycles"
                break
            cycle += 1
            self.cycles_run = cycle
            for entry in list(self.queue):
                self._fuzz_one(entry, cycle)
                if self._stop:
                    break
            self._status(cycle)
        self._persist()
        return self._summary()

    def _status(self, cycle: int) -> None:
        if self.log is not None:
            self.log(
                f"cycle={cycle} queue={len(self.queue)} edges={self.cov.observed_edges} "
                f"crashes={len(self.crashes)} execs={self.execs}"
            )

    def _summary(self) -> CampaignSummary:
        return CampaignSummary(
            out_dir=self.cfg.out_dir,
            stop_reason=self._stop or "done",
            executions=self.execs,
            queue_len=len(self.queue),
            edges=self.cov.observed_edges,
            crashes=dict(self.crashes),
            hang_count=len(self.hang_hashes),
            cycles_run=self.cycles_run,
            admitted=len(self.queue),
        )

    # --- artifacts ---

    def _persist(self) -> None:
        out = self.cfg.out_dir
        with open(os.path.join(out, "admitted.log"), "w") as f:
            for line in self.admitted_lines:
                f.write(line + "\n")
        with open(os.path.join(out, "stats.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["cycle", "strategy", "generated", "interesting",
                        "parse_ms", "mutate_ms", "exec_ms"])
            for (cycle, strategy), st in sorted(self.stats.items()):
                w.writerow([
                    cycle, strategy, st.generated, st.interesting,
                    f"{st.parse_us / 1000:.3f}",
                    f"{st.mutate_us / 1000:.3f}",
                    f"{st.exec_us / 1000:.3f}",
                ])
        with open(os.path.join(out, "dict_counts.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["entry_id", "input_len", "enhanced", "naive"])
            for row in self.dict_rows:
                w.writerow(row)
        cfg = self.cfg
        manifest = {
            "package_version": __version__,
            "coverage_backend": BACKEND,
            "grammar": self.g.name,
            "grammar_sha256": _grammar_digest(self.g),
            "target": {"kind": cfg.target.kind, "name": cfg.target.name,
                       "command": cfg.target.command,
                       "timeout_ms": cfg.target.timeout_ms},
            "seeds": [
                {"name": n, "sha256": hashlib.sha256(d).hexdigest()} for n, d in cfg.seeds
            ],
            "rng_seed": cfg.rng_seed,
            "rng_algorithm": self.rng.algorithm,
            "clock": cfg.clock,
            "limits": {"cycles": cfg.cycles, "minutes": cfg.minutes,
                       "exec_limit": cfg.exec_limit},
            "knobs": {
                "havoc_budget": cfg.havoc_budget,
                "deterministic": cfg.deterministic,
                "enable_dict": cfg.enable_dict,
                "enable_tree": cfg.enable_tree,
                "enable_trim": cfg.enable_trim,
                "tree_same_kind": cfg.tree_same_kind,
                "tree_partner_draws": cfg.tree_partner_draws,
                "max_input_len": cfg.max_input_len,
                "stop_on_crash": cfg.stop_on_crash,
                "dict_path": cfg.dict_path,
            },
        }
        with open(os.path.join(out, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2)
        summary = self._summary()
        doc = {
            "stop_reason": summary.stop_reason,
            "executions": summary.executions,
            "queue_len": summary.queue_len,
            "edges": summary.edges,
            "crashes": summary.crashes,
            "hang_count": summary.hang_count,
            "cycles_run": summary.cycles_run,
        }
        if cfg.clock == "wall":
            doc["wall_seconds"] = round(time.perf_counter() - self._wall_start, 3)
        with open(os.path.join(out, "summary.json"), "w") as f:
            json.dump(doc, f, indent=2)


def _grammar_digest(g: GrammarSpec) -> str:
    parts = [g.name, g.start_rule]
    parts += [f"{t.name}:{t.pattern}:{t.skip}:{t.comment}" for t in g.tokens]
    for r in g.rules:
        parts.append(r.name + "<-" + "|".join(" ".join(alt) for alt in r.alternatives))
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()


def run_campaign(cfg: CampaignConfig, log=None) -> CampaignSummary:
    return Campaign(cfg, log=log).run()
