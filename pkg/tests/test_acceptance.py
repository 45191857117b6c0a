"""Acceptance criteria, one test per criterion, tolerances pinned inline.

The slow fixtures (trim validity corpus, the paired deep-bug experiment)
run once per session and feed two criteria each.
"""

import csv
import os
import time

import numpy as np
import pytest

from corpus_gen import minijs_corpus, plist_corpus
from gramfuzz.campaign import CampaignConfig, run_campaign, bundled_seed_dir
from gramfuzz.coverage import MAP_SIZE, GlobalCoverage, signature
from gramfuzz.grammar import bundled_grammar
from gramfuzz.harness import TargetSpec, execute
from gramfuzz.mutate import (
    dictionary_batches,
    extract_auto_tokens,
    naive_dictionary_count,
    tree_mutate,
    RandomSource,
)
from gramfuzz.parser import parse, serialize, enumerate_subtrees
from gramfuzz.trim import CHUNK_DIVISORS, MIN_CHUNK, builtin_trim, tree_trim

MINIJS_TARGET = TargetSpec(kind="in_process", name="toy-minijs", timeout_ms=5)
XML_TARGET = TargetSpec(kind="in_process", name="toy-xml", timeout_ms=5)


def signature_oracle(spec):
    def oracle(data: bytes):
        res = execute(spec, data)
        if res.status != "ok":
            return ("status", res.status, res.crash_token)
        return signature(res.cov)
    return oracle


# --- criteria 1 + 2: shared trim-validity corpus ---


def _padded_minijs(n, seed):
    # organic programs rarely contain signature-neutral subtrees, so append a
    # repeated-statement block; removing one copy keeps every count in-bucket
    out = []
    for i, prog in enumerate(minijs_corpus(n, seed=seed)):
        uid = 900 + i
        pad = (f"var rep{uid} = 0;\n" + f"rep{uid} = rep{uid} + 1;\n" * 6).encode()
        out.append(prog + pad)
    return out


def _padded_plist(n, seed):
    pad = b"<string>padpadpad</string>" * 6
    return [d.replace(b"\n</plist>", pad + b"\n</plist>", 1)
            for d in plist_corpus(n, seed=seed)]


@pytest.fixture(scope="session")
def trim_corpus_results():
    mj = bundled_grammar("minijs")
    pl = bundled_grammar("plist-xml")
    jobs = (
        [(mj, MINIJS_TARGET, d) for d in minijs_corpus(100, seed=11)]
        + [(pl, XML_TARGET, d) for d in plist_corpus(100, seed=12)]
        + [(mj, MINIJS_TARGET, d) for d in _padded_minijs(30, seed=31)]
        + [(pl, XML_TARGET, d) for d in _padded_plist(30, seed=32)]
    )
    t0 = time.perf_counter()
    results = []
    for g, spec, data in jobs:
        outcome = tree_trim(data, g, signature_oracle(spec))
        orig_sig = signature(execute(spec, data).cov)
        trim_sig = signature(execute(spec, outcome.trimmed).cov)
        results.append((g, data, outcome, orig_sig, trim_sig))
    return results, time.perf_counter() - t0


def test_criterion_01_tree_trim_validity(trim_corpus_results):
    # >= 200 valid inputs, every mode=tree outcome must reparse; 0 tolerance
    results, elapsed = trim_corpus_results
    assert len(results) == 260
    failures = 0
    removed_total = 0
    shrank = 0
    for g, data, outcome, _o, _t in results:
        assert outcome.mode == "tree", f"fallback on valid input: {data[:60]!r}"
        removed_total += outcome.bytes_removed
        shrank += 1 if outcome.bytes_removed else 0
        try:
            parse(g, outcome.trimmed)
            assert outcome.still_parses
        except Exception:
            failures += 1
    assert failures == 0
    # the padded variants guarantee the claim is not vacuous
    assert shrank >= 10, f"only {shrank} inputs shrank; trim did no real work"
    assert elapsed < 120.0, f"trim corpus took {elapsed:.1f}s, budget 120s"
    print(f"criterion 1 PASS: 260/260 tree-trim outcomes reparse "
          f"({shrank} shrank, {removed_total} bytes removed, {elapsed:.1f}s)")


def test_criterion_02_trim_preserves_signature(trim_corpus_results):
    # trimmed input must reproduce the exact coverage signature; 0 tolerance
    results, _ = trim_corpus_results
    mismatches = sum(1 for _g, _d, _o, orig, trimmed in results if orig != trimmed)
    shrank = sum(1 for _g, _d, o, _o2, _t in results if o.bytes_removed)
    assert mismatches == 0
    print(f"criterion 2 PASS: 260/260 trimmed signatures equal originals "
          f"({shrank} of them actually shrank)")


# --- criterion 3: built-in trim schedule ---


def test_criterion_03_builtin_chunk_schedule():
    # divisors len/16 .. len/1024, chunk never below 4 bytes; exact
    assert CHUNK_DIVISORS == (16, 32, 64, 128, 256, 512, 1024)
    assert MIN_CHUNK == 4
    # power-of-two lengths divide evenly, so every removal is one full chunk
    for length in (64, 1024, 4096):
        data = bytes(length)
        lengths = []

        def oracle(candidate: bytes):
            lengths.append(len(candidate))
            return len(candidate)  # any removal changes it: reject everything

        outcome = builtin_trim(data, oracle)
        assert outcome.bytes_removed == 0
        schedule = []
        for n in CHUNK_DIVISORS:
            chunk = max(length // n, MIN_CHUNK)
            schedule.append(chunk)
            if chunk == MIN_CHUNK:
                break
        observed = sorted({length - l for l in lengths if l != length},
                          reverse=True)
        assert observed == schedule, (
            f"len {length}: removal sizes {observed} != schedule {schedule}")
        assert outcome.executions_used == sum(length // c for c in schedule)
    print("criterion 3 PASS: chunk schedule follows len/n for n in 16..1024 "
          "with the 4-byte floor")


# --- criterion 4: enhanced dictionary reduction ---


def test_criterion_04_dictionary_reduction():
    # enhanced mutant count <= 0.7 x naive per-byte count on 100 inputs; < 30 s
    t0 = time.perf_counter()
    corpus = minijs_corpus(100, seed=11)
    d = extract_auto_tokens(corpus, bundled_grammar("minijs"))
    assert d.entries, "auto dictionary came out empty"
    enhanced = naive = 0
    for data in corpus:
        enhanced += sum(b.generated_count for b in dictionary_batches(data, d))
        naive += naive_dictionary_count(data, d)
    elapsed = time.perf_counter() - t0
    ratio = enhanced / naive
    assert ratio <= 0.7, f"enhanced/naive = {ratio:.3f}, tolerance 0.7"
    assert elapsed < 30.0, f"dictionary comparison took {elapsed:.1f}s, budget 30s"
    print(f"criterion 4 PASS: enhanced/naive = {ratio:.3f} <= 0.7 "
          f"({enhanced} vs {naive} mutants, {elapsed:.1f}s)")


# --- criterion 5: tree-mutation combinatorics ---


def test_criterion_05_tree_mutation_counts():
    g = bundled_grammar("minijs")
    rng = RandomSource(1)

    def full_enumeration(tar, pro):
        a_refs = enumerate_subtrees(parse(g, tar))
        pool = [r for r in a_refs if r.size_bytes <= 200]
        pool += [r for r in enumerate_subtrees(parse(g, pro)) if r.size_bytes <= 200]
        return len(a_refs), len(pool), len(a_refs) * len(pool)

    # small fixtures, a and b <= 20: count is exactly a * (a + b)
    for tar, pro in [(b"x = 1;", b"var a = 1 + 2;\n"),
                     (b"print(7);\n", b"x = 1;"),
                     (b"x = 1;", b"x = 1;")]:
        a = len(enumerate_subtrees(parse(g, tar)))
        b = len(enumerate_subtrees(parse(g, pro)))
        assert a <= 20 and b <= 20
        _, _, expected = full_enumeration(tar, pro)
        assert expected == a * (a + b)
        batch = tree_mutate(tar, pro, g, rng)
        assert batch.generated_count == a * (a + b)
        assert len(batch.mutants) == a * (a + b)

    # cap 1: at most 10,000 materialized mutants
    big_tar, big_pro = b"print(1);\n" * 30, b"var a = 2;\n" * 30
    _, _, expected = full_enumeration(big_tar, big_pro)
    batch = tree_mutate(big_tar, big_pro, g, rng)
    assert batch.generated_count == expected > 10_000
    assert len(batch.mutants) == 10_000

    # cap 2: pool excludes subtrees larger than 200 bytes
    fat_pro = b'var s = "' + b"A" * 260 + b'";\n'
    tar = b"x = 1;"
    a_refs, pool_size, expected = full_enumeration(tar, fat_pro)
    assert pool_size < a_refs + len(enumerate_subtrees(parse(g, fat_pro)))
    batch = tree_mutate(tar, fat_pro, g, rng)
    assert batch.generated_count == expected

    # cap 3: inputs beyond 10,000 bytes are skipped outright
    huge = b"print(1);\n" * 1001
    assert len(huge) > 10_000
    batch = tree_mutate(huge, b"x = 1;", g, rng)
    assert batch.generated_count == 0 and batch.mutants == []
    print("criterion 5 PASS: uncapped count = a*(a+b) by full enumeration; "
          "10k mutant cap, 200-byte pool cap, 10k-byte input skip all exact")


# --- criterion 6: coverage oracle equivalence ---


def _brute_bucket(count):
    bounds = [(0, 0), (1, 1), (2, 2), (3, 3), (4, 7), (8, 15),
              (16, 31), (32, 127), (128, 255)]
    for cls, (lo, hi) in enumerate(bounds):
        if lo <= count <= hi:
            return cls
    raise AssertionError(count)


def _brute_signature(cov):
    mask = (1 << 64) - 1
    acc = 0
    nz = np.flatnonzero(cov)
    if nz.size == 0:
        return 0x5851F42D4C957F2D
    for i in nz.tolist():
        z = ((int(i) << 8) | _brute_bucket(int(cov[i]))) + 0x9E3779B97F4A7C15
        z &= mask
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & mask
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & mask
        z ^= z >> 31
        acc ^= z
    return acc ^ 0x5851F42D4C957F2D


def test_criterion_06_coverage_oracle_equivalence():
    # classify and signature vs a from-scratch comparator, 10^4 maps; < 30 s
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    boundary = np.array([1, 2, 3, 4, 7, 8, 15, 16, 31, 32, 127, 128, 255],
                        dtype=np.uint8)
    maps = []
    for i in range(10_000):
        cov = np.zeros(MAP_SIZE, dtype=np.uint8)
        if i % 100 == 0:
            maps.append(cov)  # all-zero map
            continue
        n = int(rng.integers(1, 150))
        cells = rng.integers(0, MAP_SIZE, size=n)
        if i % 3 == 0:
            cov[cells] = boundary[rng.integers(0, len(boundary), size=n)]
        else:
            cov[cells] = rng.integers(1, 256, size=n).astype(np.uint8)
        maps.append(cov)
    # every 7th map repeats its predecessor: classify must answer "none"
    for i in range(7, 10_000, 7):
        maps[i] = maps[i - 1]

    global_cov = GlobalCoverage()
    seen: dict[int, set] = {}
    checked_sigs = 0
    for i, cov in enumerate(maps):
        got = global_cov.classify(cov)
        cells = np.flatnonzero(cov).tolist()
        if not cells:
            want = "none"
        elif any(c not in seen for c in cells):
            want = "new_edge"
        elif any(_brute_bucket(int(cov[c])) not in seen[c] for c in cells):
            want = "new_bucket"
        else:
            want = "none"
        for c in cells:
            seen.setdefault(c, set()).add(_brute_bucket(int(cov[c])))
        assert got == want, f"map {i}: classify {got} != brute {want}"
        if i % 10 == 0:  # signature brute force is pure python, sample it
            assert signature(cov) == _brute_signature(cov), f"map {i}"
            checked_sigs += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"oracle comparison took {elapsed:.1f}s, budget 30s"
    print(f"criterion 6 PASS: classify agreed on 10000 maps, signature on "
          f"{checked_sigs} sampled maps ({elapsed:.1f}s)")


# --- criteria 7 + 8: the paired deep-bug experiment ---


def experiment_config(out_dir, rng_seed, grammar_aware):
    seed_dir = bundled_seed_dir("minijs")
    seeds = []
    for name in ("s01.js", "s02.js"):  # the match()/setin() families
        with open(os.path.join(seed_dir, name), "rb") as f:
            seeds.append((name, f.read()))
    return CampaignConfig(
        grammar="minijs",
        target=TargetSpec(kind="in_process", name="toy-minijs", timeout_ms=5),
        seeds=seeds,
        out_dir=str(out_dir),
        rng_seed=rng_seed,
        cycles=10_000,
        exec_limit=200_000,
        havoc_budget=64,
        deterministic="seeds_only",
        enable_dict=grammar_aware,
        enable_tree=grammar_aware,
        tree_partner_draws=4,
        max_input_len=512,
        stop_on_crash=False,
        clock="virtual",
    )


@pytest.fixture(scope="session")
def deep_bug_experiment(tmp_path_factory):
    base = tmp_path_factory.mktemp("experiment")
    t0 = time.perf_counter()
    enabled, blind = [], []
    for rng_seed in (1, 2, 3):
        cfg = experiment_config(base / f"tree_{rng_seed}", rng_seed, True)
        enabled.append((cfg, run_campaign(cfg)))
        cfg = experiment_config(base / f"blind_{rng_seed}", rng_seed, False)
        blind.append((cfg, run_campaign(cfg)))
    return enabled, blind, time.perf_counter() - t0


def test_criterion_07_deep_bug_found_only_with_tree_mutation(deep_bug_experiment):
    enabled, blind, elapsed = deep_bug_experiment
    for cfg, summary in enabled:
        assert "tail-underflow" in summary.crashes, (
            f"enabled run rng_seed={cfg.rng_seed} never crashed")
        at = summary.crashes["tail-underflow"]
        assert at <= 200_000, f"crash beyond budget: {at}"
    for cfg, summary in blind:
        assert summary.crashes == {}, (
            f"blind run rng_seed={cfg.rng_seed} crashed: {summary.crashes}")
        assert summary.executions == 200_000
    assert elapsed < 900.0, f"experiment took {elapsed:.0f}s, budget 900s"
    found_at = [s.crashes["tail-underflow"] for _c, s in enabled]
    print(f"criterion 7 PASS: 3/3 grammar-aware runs crash at execs {found_at}, "
          f"3/3 blind runs clean after 200000 ({elapsed:.0f}s total)")


AWARE = {"tree", "dict_uo", "dict_ao"}
FLIPS = {"flip1", "flip2", "flip4", "flip8", "flip16", "flip32"}


def test_criterion_08_grammar_aware_strategies_admit_more(deep_bug_experiment):
    enabled, _blind, _elapsed = deep_bug_experiment
    pairs = []
    for cfg, _summary in enabled:
        aware = flips = 0
        with open(os.path.join(cfg.out_dir, "stats.csv")) as f:
            for row in csv.DictReader(f):
                if row["strategy"] in AWARE:
                    aware += int(row["interesting"])
                elif row["strategy"] in FLIPS:
                    flips += int(row["interesting"])
        assert aware > flips, (
            f"rng_seed={cfg.rng_seed}: aware {aware} <= flips {flips}")
        pairs.append((aware, flips))
    print(f"criterion 8 PASS: tree+dict-overwrite admissions beat bit/byte "
          f"flips in all enabled runs {pairs}")


# --- criterion 9: replay determinism ---


def test_criterion_09_replay_determinism(tmp_path):
    def cfg(sub):
        seed_dir = bundled_seed_dir("minijs")
        seeds = []
        for name in sorted(os.listdir(seed_dir)):
            with open(os.path.join(seed_dir, name), "rb") as f:
                seeds.append((name, f.read()))
        return CampaignConfig(
            grammar="minijs",
            target=TargetSpec(kind="in_process", name="toy-minijs", timeout_ms=5),
            seeds=seeds,
            out_dir=str(tmp_path / sub),
            rng_seed=42,
            cycles=100,
            exec_limit=3000,
            havoc_budget=32,
            deterministic="off",
            clock="virtual",
        )

    run_campaign(cfg("a"))
    run_campaign(cfg("b"))

    def read(sub, name):
        with open(tmp_path / sub / name, "rb") as f:
            return f.read()

    assert read("a", "manifest.json") == read("b", "manifest.json")
    assert read("a", "admitted.log") == read("b", "admitted.log")
    assert read("a", "stats.csv") == read("b", "stats.csv")
    n = len(read("a", "admitted.log").splitlines())
    print(f"criterion 9 PASS: identical manifests gave identical admitted "
          f"sequences ({n} entries) and byte-identical stats.csv")


# --- criterion 10: parse/serialize round trip ---


def test_criterion_10_serialize_parse_identity():
    mj, pl = bundled_grammar("minijs"), bundled_grammar("plist-xml")
    inputs = ([(mj, d) for d in minijs_corpus(500, seed=21)]
              + [(pl, d) for d in plist_corpus(500, seed=22)])
    assert len(inputs) == 1000
    for g, data in inputs:
        assert serialize(parse(g, data)) == data
    print("criterion 10 PASS: serialize(parse(x)) == x on 1000 corpus inputs "
          "across both grammars")
