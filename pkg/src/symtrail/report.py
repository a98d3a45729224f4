"""Campaign reporting: summary, delimited series, and figures.

Reads the per-iteration metrics series and the final coverage tree from
a campaign output directory and writes a ``report/`` folder next to
them: a JSON summary, the series as CSV, and matplotlib figures for
taken nodes and pass rate over iterations.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .ect import from_json
from .errors import ConfigError

# Large-scale reference for the direct-solve success rate; reported for
# context, never asserted.
DIRECT_SOLVE_REFERENCE = 70.08

_SERIES_COLUMNS = [
    "iteration",
    "taken_nodes",
    "total_nodes",
    "generation",
    "new_taken",
    "generated",
    "accepted_generated",
    "pass_rate",
    "constraints_collected",
    "constraints_deduped",
    "constraints_selected",
    "solved",
    "refined",
    "crashes",
    "queue",
]


def load_series(output_dir: str | Path) -> list[dict]:
    path = Path(output_dir) / "metrics.jsonl"
    if not path.exists():
        raise ConfigError(f"no metrics.jsonl under {output_dir}")
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def summarize(output_dir: str | Path) -> dict:
    """Final numbers for a finished campaign directory."""
    rows = load_series(output_dir)
    last = rows[-1] if rows else {}
    tree_path = Path(output_dir) / "ect.json"
    stats = None
    if tree_path.exists():
        stats = from_json(tree_path.read_text()).stats()
    attempts = last.get("llm_solve_attempts", 0)
    direct = last.get("llm_direct_success", 0)
    return {
        "output_dir": str(output_dir),
        "iterations": last.get("iteration", 0),
        "taken_nodes": stats.taken_nodes if stats else last.get("taken_nodes", 0),
        "total_nodes": stats.total_nodes if stats else last.get("total_nodes", 0),
        "generated": last.get("generated", 0),
        "accepted_generated": last.get("accepted_generated", 0),
        "pass_rate": last.get("pass_rate", 0.0),
        "constraints_collected": last.get("constraints_collected", 0),
        "constraints_deduped": last.get("constraints_deduped", 0),
        "constraints_selected": last.get("constraints_selected", 0),
        "solved": last.get("solved", 0),
        "refined": last.get("refined", 0),
        "llm_solve_attempts": attempts,
        "llm_direct_success": direct,
        "llm_direct_rate": (direct / attempts) if attempts else 0.0,
        "llm_direct_rate_reference_percent": DIRECT_SOLVE_REFERENCE,
        "crashes": last.get("crashes", 0),
    }


def _write_csv(rows: list[dict], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SERIES_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _render_figures(rows: list[dict], report_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    iterations = [r["iteration"] for r in rows]
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iterations, [r["taken_nodes"] for r in rows], label="taken nodes")
    ax.plot(iterations, [r["total_nodes"] for r in rows], label="materialized nodes")
    ax.set_xlabel("iteration")
    ax.set_ylabel("coverage tree nodes")
    ax.set_title("Coverage over iterations")
    ax.legend()
    fig.tight_layout()
    path = report_dir / "coverage.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iterations, [r["pass_rate"] for r in rows], color="tab:green")
    ax.set_xlabel("iteration")
    ax.set_ylabel("pass rate of generated inputs")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Parser pass rate over iterations")
    fig.tight_layout()
    path = report_dir / "pass_rate.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written


def generate_report(output_dir: str | Path, figures: bool = True) -> dict:
    """Write report assets and return the summary dict."""
    output_dir = Path(output_dir)
    rows = load_series(output_dir)
    summary = summarize(output_dir)
    report_dir = output_dir / "report"
    report_dir.mkdir(exist_ok=True)
    (report_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_csv(rows, report_dir / "metrics.csv")
    if figures and rows:
        summary["figures"] = [str(p) for p in _render_figures(rows, report_dir)]
    return summary


def format_summary(summary: dict) -> str:
    lines = [
        f"campaign report for {summary['output_dir']}",
        f"  iterations            {summary['iterations']}",
        f"  coverage tree         {summary['taken_nodes']}/{summary['total_nodes']} nodes taken",
        f"  generated inputs      {summary['generated']}",
        f"  parser pass rate      {summary['pass_rate']:.4f}",
        "  constraints           "
        f"{summary['constraints_collected']} collected, "
        f"{summary['constraints_deduped']} after dedup, "
        f"{summary['constraints_selected']} dispatched",
        f"  solved / refined      {summary['solved']} / {summary['refined']}",
        f"  crashes               {summary['crashes']}",
    ]
    if summary.get("llm_solve_attempts"):
        lines.append(
            "  direct-solve rate     "
            f"{100.0 * summary['llm_direct_rate']:.2f}% "
            f"(reference: {summary['llm_direct_rate_reference_percent']:.2f}%)"
        )
    return "\n".join(lines)
