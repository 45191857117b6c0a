"""Post-run reporting: admission curves, hit ratios, dictionary counts, timings.

Reads the stats.csv / dict_counts.csv a campaign wrote and renders them as
derived CSV tables plus static SVG plots.  Nothing here runs during fuzzing.
"""

import csv
import os
from collections import defaultdict
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

STATS_COLUMNS = ["cycle", "strategy", "generated", "interesting",
                 "parse_ms", "mutate_ms", "exec_ms"]
DICT_COLUMNS = ["entry_id", "input_len", "enhanced", "naive"]


class ReportError(Exception):
    """stats.csv missing or not in the expected shape."""


@dataclass
class ReportPaths:
    report_dir: str
    curves_csv: str
    ratios_csv: str
    dict_csv: str
    timings_csv: str
    plots: list[str] = field(default_factory=list)


def load_stats(out_dir: str) -> list[dict]:
    path = os.path.join(out_dir, "stats.csv")
    if not os.path.isfile(path):
        raise ReportError(f"no stats.csv in {out_dir}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != STATS_COLUMNS:
            raise ReportError(f"unexpected stats.csv columns: {reader.fieldnames}")
        rows = []
        try:
            for r in reader:
                rows.append({
                    "cycle": int(r["cycle"]),
                    "strategy": r["strategy"],
                    "generated": int(r["generated"]),
                    "interesting": int(r["interesting"]),
                    "parse_ms": float(r["parse_ms"]),
                    "mutate_ms": float(r["mutate_ms"]),
                    "exec_ms": float(r["exec_ms"]),
                })
        except (TypeError, ValueError) as e:
            raise ReportError(f"corrupt stats.csv row: {e}") from None
    return rows


def load_dict_counts(out_dir: str) -> list[dict]:
    path = os.path.join(out_dir, "dict_counts.csv")
    if not os.path.isfile(path):
        return []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != DICT_COLUMNS:
            raise ReportError(f"unexpected dict_counts.csv columns: {reader.fieldnames}")
        return [{k: int(r[k]) for k in DICT_COLUMNS} for r in reader]


def cumulative_curves(rows: list[dict]) -> tuple[list[int], dict[str, list[int]]]:
    """Per-strategy cumulative admitted-input counts, one point per cycle."""
    cycles = sorted({r["cycle"] for r in rows})
    per = defaultdict(lambda: defaultdict(int))
    for r in rows:
        per[r["strategy"]][r["cycle"]] += r["interesting"]
    curves = {}
    for strat, by_cycle in sorted(per.items()):
        total = 0
        points = []
        for c in cycles:
            total += by_cycle.get(c, 0)
            points.append(total)
        curves[strat] = points
    return cycles, curves


def ratio_rows(rows: list[dict]) -> list[tuple[int, str, int, int, float]]:
    """(cycle, strategy, generated, interesting, interesting/generated)."""
    out = []
    for r in sorted(rows, key=lambda r: (r["cycle"], r["strategy"])):
        ratio = r["interesting"] / r["generated"] if r["generated"] else 0.0
        out.append((r["cycle"], r["strategy"], r["generated"], r["interesting"], ratio))
    return out


def timing_summary(rows: list[dict]) -> list[tuple[str, float, float, float, float]]:
    """Per-strategy (parse_ms, mutate_ms, exec_ms, total_ms) over the whole run."""
    per = defaultdict(lambda: [0.0, 0.0, 0.0])
    for r in rows:
        acc = per[r["strategy"]]
        acc[0] += r["parse_ms"]
        acc[1] += r["mutate_ms"]
        acc[2] += r["exec_ms"]
    out = []
    for strat in sorted(per):
        p, m, e = per[strat]
        out.append((strat, round(p, 3), round(m, 3), round(e, 3), round(p + m + e, 3)))
    return out


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _plot_curves(path: str, cycles, curves) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for strat, points in curves.items():
        ax.plot(cycles, points, label=strat, linewidth=1.2)
    ax.set_xlabel("cycle")
    ax.set_ylabel("admitted inputs (cumulative)")
    ax.set_title("queue admissions by strategy")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_ratios(path: str, rows) -> None:
    per = defaultdict(lambda: ([], []))
    for cycle, strat, gen, _inter, ratio in rows:
        xs, ys = per[strat]
        xs.append(cycle)
        ys.append(ratio)
    fig, ax = plt.subplots(figsize=(7, 4))
    for strat, (xs, ys) in sorted(per.items()):
        ax.plot(xs, ys, label=strat, linewidth=1.0, marker=".", markersize=3)
    ax.set_xlabel("cycle")
    ax.set_ylabel("interesting / generated")
    ax.set_title("admission ratio by strategy")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_dict(path: str, rows) -> None:
    enhanced = sum(r["enhanced"] for r in rows)
    naive = sum(r["naive"] for r in rows)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar(["enhanced", "naive"], [enhanced, naive], color=["#4a7", "#b55"])
    ax.set_ylabel("dictionary mutants generated")
    ax.set_title("token-run dictionary vs every-offset baseline")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_timings(path: str, rows) -> None:
    strats = [r[0] for r in rows]
    parse = [r[1] for r in rows]
    mutate = [r[2] for r in rows]
    execu = [r[3] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(strats, parse, label="parse")
    ax.bar(strats, mutate, bottom=parse, label="mutate")
    bottom = [p + m for p, m in zip(parse, mutate)]
    ax.bar(strats, execu, bottom=bottom, label="execute")
    ax.set_ylabel("milliseconds")
    ax.set_title("where each strategy spends time")
    ax.tick_params(axis="x", labelrotation=60, labelsize=7)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_report(out_dir: str, report_dir: str | None = None) -> ReportPaths:
    """Build the report tables and plots for one campaign output directory."""
    rows = load_stats(out_dir)
    dict_rows = load_dict_counts(out_dir)
    rdir = report_dir or os.path.join(out_dir, "report")
    os.makedirs(rdir, exist_ok=True)

    cycles, curves = cumulative_curves(rows)
    curves_csv = os.path.join(rdir, "strategy_curves.csv")
    _write_csv(
        curves_csv,
        ["cycle", "strategy", "cumulative_interesting"],
        ((c, strat, points[i])
         for strat, points in curves.items()
         for i, c in enumerate(cycles)),
    )

    ratios = ratio_rows(rows)
    ratios_csv = os.path.join(rdir, "admission_ratios.csv")
    _write_csv(
        ratios_csv,
        ["cycle", "strategy", "generated", "interesting", "ratio"],
        ((c, s, g, i, f"{r:.6f}") for c, s, g, i, r in ratios),
    )

    dict_csv = os.path.join(rdir, "dict_comparison.csv")
    dict_out = [(r["entry_id"], r["input_len"], r["enhanced"], r["naive"],
                 f"{r['enhanced'] / r['naive']:.6f}" if r["naive"] else "0.000000")
                for r in dict_rows]
    if dict_rows:
        te = sum(r["enhanced"] for r in dict_rows)
        tn = sum(r["naive"] for r in dict_rows)
        dict_out.append(("total", "", te, tn, f"{te / tn:.6f}" if tn else "0.000000"))
    _write_csv(dict_csv, ["entry_id", "input_len", "enhanced", "naive", "ratio"],
               dict_out)

    timings = timing_summary(rows)
    timings_csv = os.path.join(rdir, "phase_timings.csv")
    _write_csv(timings_csv,
               ["strategy", "parse_ms", "mutate_ms", "exec_ms", "total_ms"], timings)

    paths = ReportPaths(rdir, curves_csv, ratios_csv, dict_csv, timings_csv)
    if rows:
        p = os.path.join(rdir, "strategy_curves.svg")
        _plot_curves(p, cycles, curves)
        paths.plots.append(p)
        p = os.path.join(rdir, "admission_ratios.svg")
        _plot_ratios(p, ratios)
        paths.plots.append(p)
        p = os.path.join(rdir, "phase_timings.svg")
        _plot_timings(p, timings)
        paths.plots.append(p)
    if dict_rows:
        p = os.path.join(rdir, "dict_comparison.svg")
        _plot_dict(p, dict_rows)
        paths.plots.append(p)
    return paths
