"""Command line front end: fuzz, cmin, trim, mutate, report, replay."""

import argparse
import hashlib
import json
import os
import shlex
import sys

from .campaign import (
    CampaignConfig,
    CampaignError,
    distill_corpus,
    load_seed_dir,
    resolve_grammar,
    run_campaign,
)
from .coverage import signature
from .grammar import GrammarError
from .harness import HarnessError, TargetSpec, execute
from .mutate import (
    Dictionary,
    RandomSource,
    deterministic_stages,
    dictionary_batches,
    extract_auto_tokens,
    havoc,
    tree_mutate,
)
from .parser import ParseError
from .report import ReportError, write_report
from .trim import tree_trim

USER_ERROR = 2
FATAL = 1


def _add_target_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target", help="bundled in-process target name")
    g.add_argument("--cmd", help="external command; @@ marks the input file")
    p.add_argument("--timeout-ms", type=int, default=50)


def _target_spec(args) -> TargetSpec:
    if args.cmd:
        return TargetSpec(kind="external_command", command=shlex.split(args.cmd),
                          timeout_ms=args.timeout_ms)
    return TargetSpec(kind="in_process", name=args.target,
                      timeout_ms=args.timeout_ms)


def _add_campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grammar", required=True, help="bundled name or .g file path")
    _add_target_flags(p)
    p.add_argument("--seeds", required=True, help="seed corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dict", dest="dict_path", help="AFL-format token dictionary")
    p.add_argument("--rng-seed", type=int, default=1)
    p.add_argument("--cycles", type=int)
    p.add_argument("--minutes", type=float)
    p.add_argument("--max-execs", type=int, help="stop after this many executions")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--havoc-budget", type=int, default=256)
    p.add_argument("--deterministic", choices=["first_visit", "seeds_only", "off"],
                   default="first_visit")
    p.add_argument("--tree-same-kind", action="store_true",
                   help="only swap subtrees with matching node kinds")
    p.add_argument("--tree-partner-draws", type=int, default=1)
    p.add_argument("--max-input-len", type=int, default=4096)
    p.add_argument("--no-tree", action="store_true", help="disable tree mutation")
    p.add_argument("--no-dict", action="store_true", help="disable dictionary stages")
    p.add_argument("--no-trim", action="store_true", help="disable queue trimming")
    p.add_argument("--stop-on-crash", action="store_true")
    p.add_argument("--clock", choices=["wall", "virtual"], default="wall",
                   help="virtual makes timing columns replay-stable")
    p.add_argument("--quiet", action="store_true", help="suppress cycle status lines")


def _campaign_config(args) -> CampaignConfig:
    return CampaignConfig(
        grammar=args.grammar,
        target=_target_spec(args),
        seeds=load_seed_dir(args.seeds),
        out_dir=args.out,
        rng_seed=args.rng_seed,
        cycles=args.cycles,
        minutes=args.minutes,
        exec_limit=args.max_execs,
        havoc_budget=args.havoc_budget,
        deterministic=args.deterministic,
        enable_dict=not args.no_dict,
        enable_tree=not args.no_tree,
        enable_trim=not args.no_trim,
        tree_same_kind=args.tree_same_kind,
        tree_partner_draws=args.tree_partner_draws,
        dict_path=args.dict_path,
        max_input_len=args.max_input_len,
        stop_on_crash=args.stop_on_crash,
        clock=args.clock,
        workers=args.workers,
    )


def cmd_fuzz(args) -> int:
    log = None if args.quiet else lambda line: print(line, flush=True)
    summary = run_campaign(_campaign_config(args), log=log)
    print(f"stop={summary.stop_reason} execs={summary.executions} "
          f"queue={summary.queue_len} edges={summary.edges} "
          f"crashes={len(summary.crashes)} hangs={summary.hang_count}")
    return 0


def cmd_cmin(args) -> int:
    seeds = load_seed_dir(args.seeds)
    spec = _target_spec(args)
    kept, dropped = distill_corpus(seeds, lambda d: execute(spec, d))
    os.makedirs(args.out, exist_ok=True)
    for name, data in kept:
        with open(os.path.join(args.out, name), "wb") as f:
            f.write(data)
    print(f"kept={len(kept)} redundant={len(seeds) - len(kept) - len(dropped)} "
          f"failing={len(dropped)}")
    for name in dropped:
        print(f"dropped (crash/hang): {name}")
    return 0


def cmd_trim(args) -> int:
    if not os.path.isfile(args.input):
        print(f"no such input file: {args.input}", file=sys.stderr)
        return USER_ERROR
    with open(args.input, "rb") as f:
        data = f.read()
    g = resolve_grammar(args.grammar)
    spec = _target_spec(args)

    def oracle(candidate: bytes):
        res = execute(spec, candidate)
        if res.status != "ok":
            return ("status", res.status, res.crash_token)
        return signature(res.cov)

    outcome = tree_trim(data, g, oracle)
    out_path = args.out or args.input + ".min"
    with open(out_path, "wb") as f:
        f.write(outcome.trimmed)
    print(f"original={len(data)} trimmed={len(outcome.trimmed)} "
          f"removed={outcome.bytes_removed} mode={outcome.mode} "
          f"still_parses={str(outcome.still_parses).lower()} "
          f"execs={outcome.executions_used}")
    print(f"wrote {out_path}")
    return 0


def cmd_mutate(args) -> int:
    if not os.path.isfile(args.input):
        print(f"no such input file: {args.input}", file=sys.stderr)
        return USER_ERROR
    with open(args.input, "rb") as f:
        data = f.read()
    g = resolve_grammar(args.grammar)
    rng = RandomSource(args.rng_seed)
    if args.strategy == "havoc":
        batches = [havoc(data, rng, args.budget, args.max_input_len)]
    elif args.strategy == "det":
        batches = list(deterministic_stages(data))
    elif args.strategy == "dict":
        d = extract_auto_tokens([data], g)
        if args.dict_path:
            d = Dictionary.load(args.dict_path).merged_with(d)
        batches = dictionary_batches(data, d)
    else:  # tree
        if not args.partner:
            print("--strategy tree needs --partner FILE", file=sys.stderr)
            return USER_ERROR
        with open(args.partner, "rb") as f:
            partner = f.read()
        batches = [tree_mutate(data, partner, g, rng,
                               same_kind=args.tree_same_kind)]
    os.makedirs(args.out, exist_ok=True)
    written = 0
    for batch in batches:
        for i, m in enumerate(batch.mutants):
            name = f"{batch.strategy}_{i:05d}.bin"
            with open(os.path.join(args.out, name), "wb") as f:
                f.write(m)
            written += 1
    print(f"wrote {written} mutants to {args.out}")
    return 0


def cmd_report(args) -> int:
    paths = write_report(args.out, report_dir=args.to)
    names = [paths.curves_csv, paths.ratios_csv, paths.dict_csv, paths.timings_csv]
    names += paths.plots
    for p in names:
        print(p)
    return 0


def cmd_replay(args) -> int:
    manifest_path = os.path.join(args.out, "manifest.json")
    if not os.path.isfile(manifest_path):
        print(f"no manifest.json in {args.out}", file=sys.stderr)
        return USER_ERROR
    with open(manifest_path) as f:
        m = json.load(f)
    seeds = load_seed_dir(args.seeds)
    by_name = {n: d for n, d in seeds}
    for rec in m["seeds"]:
        data = by_name.get(rec["name"])
        if data is None or hashlib.sha256(data).hexdigest() != rec["sha256"]:
            print(f"seed corpus does not match manifest: {rec['name']}",
                  file=sys.stderr)
            return USER_ERROR
    t = m["target"]
    spec = TargetSpec(kind=t["kind"], name=t.get("name"),
                      command=t.get("command"), timeout_ms=t["timeout_ms"])
    knobs = m["knobs"]
    cfg = CampaignConfig(
        grammar=args.grammar or m["grammar"],
        target=spec,
        seeds=[(rec["name"], by_name[rec["name"]]) for rec in m["seeds"]],
        out_dir=args.to,
        rng_seed=m["rng_seed"],
        cycles=m["limits"]["cycles"],
        minutes=m["limits"]["minutes"],
        exec_limit=m["limits"]["exec_limit"],
        havoc_budget=knobs["havoc_budget"],
        deterministic=knobs["deterministic"],
        enable_dict=knobs["enable_dict"],
        enable_tree=knobs["enable_tree"],
        enable_trim=knobs["enable_trim"],
        tree_same_kind=knobs["tree_same_kind"],
        tree_partner_draws=knobs["tree_partner_draws"],
        dict_path=knobs.get("dict_path"),
        max_input_len=knobs["max_input_len"],
        stop_on_crash=knobs["stop_on_crash"],
        clock=m["clock"],
    )
    run_campaign(cfg)
    mismatches = []
    for name in ("admitted.log", "stats.csv"):
        with open(os.path.join(args.out, name), "rb") as f:
            original = f.read()
        with open(os.path.join(args.to, name), "rb") as f:
            rerun = f.read()
        if name == "stats.csv" and m["clock"] == "wall":
            # wall-clock timings never reproduce; compare the count columns
            original = _strip_timings(original)
            rerun = _strip_timings(rerun)
        if original != rerun:
            mismatches.append(name)
    if mismatches:
        print("MISMATCH: " + ", ".join(mismatches))
        return FATAL
    if m["clock"] == "wall":
        print("MATCH: admitted entries and stats counts reproduce "
              "(timing columns ignored under wall clock)")
    else:
        print("MATCH: admitted entries and stats reproduce")
    return 0


def _strip_timings(stats: bytes) -> bytes:
    # keep cycle,strategy,generated,interesting; drop the *_ms columns
    return b"\n".join(b",".join(line.split(b",")[:4])
                      for line in stats.splitlines())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gramfuzz",
        description="grammar-aware coverage-guided fuzzer for the bundled toy targets",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    _add_campaign_flags(p)
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("cmin", help="distill a seed corpus by coverage")
    _add_target_flags(p)
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_cmin)

    p = sub.add_parser("trim", help="minimize one input, keeping its coverage")
    p.add_argument("--grammar", required=True)
    _add_target_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="default: INPUT.min")
    p.set_defaults(fn=cmd_trim)

    p = sub.add_parser("mutate", help="dump the mutants one strategy generates")
    p.add_argument("--grammar", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--strategy", choices=["havoc", "det", "dict", "tree"],
                   required=True)
    p.add_argument("--partner", help="second parse-tree source for --strategy tree")
    p.add_argument("--dict", dest="dict_path")
    p.add_argument("--out", required=True)
    p.add_argument("--rng-seed", type=int, default=1)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--max-input-len", type=int, default=4096)
    p.add_argument("--tree-same-kind", action="store_true")
    p.set_defaults(fn=cmd_mutate)

    p = sub.add_parser("report", help="render tables and plots from a campaign")
    p.add_argument("--out", required=True, help="campaign output directory")
    p.add_argument("--to", help="report directory (default: OUT/report)")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("replay", help="rerun a manifest and compare artifacts")
    p.add_argument("--out", required=True, help="original campaign directory")
    p.add_argument("--seeds", required=True, help="the original seed corpus")
    p.add_argument("--to", required=True, help="directory for the rerun")
    p.add_argument("--grammar", help="override grammar lookup (default: manifest)")
    p.set_defaults(fn=cmd_replay)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (CampaignError, GrammarError, HarnessError, ParseError, ReportError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USER_ERROR
    except KeyboardInterrupt:
        return FATAL
    except Exception as e:  # campaign-fatal: a bug, not a usage problem
        print(f"fatal: {type(e).__name__}: {e}", file=sys.stderr)
        return FATAL


if __name__ == "__main__":
    sys.exit(main())
