"""Report rendering: delimited outputs plus matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from ..risk import CatalogReport, render_report
from .analysis import SweepRow
from .runner import RunMetrics

_EEBL_LEVEL = {"normal": 0, "warn": 1, "fail_safe": 2}


def write_run_outputs(metrics: RunMetrics, trace_lines: Sequence[str], out_dir: Path, figures: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.jsonl").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
    (out_dir / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    if figures:
        render_run_figure(metrics, out_dir / "run_report.png")


def render_run_figure(metrics: RunMetrics, path: Path) -> None:
    fig, (ax_eebl, ax_mbr) = plt.subplots(2, 1, figsize=(8, 6))
    for sid, timeline in sorted(metrics.eebl_timelines.items()):
        ts = [e["t"] / 1000.0 for e in timeline] + [metrics.duration_ms / 1000.0]
        levels = [_EEBL_LEVEL[e["state"]] for e in timeline]
        levels = levels + [levels[-1]]
        ax_eebl.step(ts, levels, where="post", label=f"station {sid}")
    ax_eebl.set_yticks([0, 1, 2], ["normal", "warn", "fail_safe"])
    ax_eebl.set_xlabel("time [s]")
    ax_eebl.set_title(f"EEBL state per station ({metrics.name}, seed {metrics.seed})")
    if len(metrics.eebl_timelines) <= 8:
        ax_eebl.legend(fontsize=7, loc="upper left")
    ax_eebl.set_ylim(-0.2, 2.4)

    detectors = sorted(metrics.mbr_counts)
    counts = [metrics.mbr_counts[d] for d in detectors]
    ax_mbr.bar(detectors if detectors else ["none"], counts if counts else [0], color="#B03030")
    ax_mbr.set_ylabel("misbehavior reports")
    ax_mbr.set_title("reports per detector")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_sweep_outputs(rows: Sequence[SweepRow], out_dir: Path, figures: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cbr_threshold", "d4_detection_rate", "mean_cbr"])
        for row in rows:
            writer.writerow([f"{row.cbr_threshold:.3f}", f"{row.d4_detection_rate:.4f}", f"{row.mean_cbr:.4f}"])
    if figures:
        render_sweep_figure(rows, out_dir / "sweep.png")


def render_sweep_figure(rows: Sequence[SweepRow], path: Path) -> None:
    xs = [r.cbr_threshold for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(xs, [r.d4_detection_rate for r in rows], "o-", color="#1f5fa8", label="D4 detection rate")
    ax.set_xlabel("redundancy-mitigation CBR threshold")
    ax.set_ylabel("D4 detection rate", color="#1f5fa8")
    ax.set_ylim(-0.05, 1.05)
    ax2 = ax.twinx()
    ax2.plot(xs, [r.mean_cbr for r in rows], "s--", color="#b05010", label="mean CBR")
    ax2.set_ylabel("mean channel busy ratio", color="#b05010")
    ax2.set_ylim(0, 1.05)
    ax.set_title("redundancy mitigation vs. cross-CPM detection")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_risk_outputs(report: CatalogReport, out_dir: Path, figures: bool = True) -> str:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = render_report(report)
    (out_dir / "risk_report.txt").write_text(text + "\n", encoding="utf-8")
    with open(out_dir / "risk_report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row_ref", "attack_id", "reproducibility", "impact", "stealthiness", "computed", "published", "match"]
        )
        for r in report.results:
            t = r.row.triple
            writer.writerow(
                [
                    r.row.row_ref,
                    r.row.attack_id,
                    str(t.reproducibility),
                    str(t.impact),
                    str(t.stealthiness),
                    str(r.computed),
                    str(r.row.published_overall),
                    "yes" if r.matches_published else "no",
                ]
            )
    if figures:
        render_risk_figure(report, out_dir / "risk_ratings.png")
    return text


def render_risk_figure(report: CatalogReport, path: Path) -> None:
    levels = ["High", "Medium", "Low"]
    x = range(len(levels))
    width = 0.35
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([i - width / 2 for i in x], [report.computed_tally[l] for l in levels], width, label="computed")
    ax.bar([i + width / 2 for i in x], [report.published_tally[l] for l in levels], width, label="published")
    if report.claimed_tally:
        ax.plot(list(x), [report.claimed_tally.get(l, 0) for l in levels], "k*--", label="claimed summary")
    ax.set_xticks(list(x), levels)
    ax.set_ylabel("attacks")
    ax.set_title("overall risk tallies")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
