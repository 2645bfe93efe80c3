"""Report emission: a row-per-(image, click) CSV and a summary JSON.

The CSV is deliberately timestamp-free and fixed-format so identical runs
produce identical bytes; wall-clock numbers live in the summary JSON only.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import StreamReport
from .metrics import clicks_to_target


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def report_rows(report: StreamReport) -> tuple[list[str], list[list[str]]]:
    k = report.num_classes
    header = ["scenario", "seed", "image_id", "t", "dice_mean"]
    header += [f"dice_{c}" for c in range(1, k)]
    if k > 2:
        header.append("dice_union")
    rows = []
    for rec in report.records:
        row = [rec.scenario, str(rec.seed), rec.image_id, str(rec.t), _fmt(rec.dice_mean)]
        row += [_fmt(rec.dice_per_class[c]) for c in range(1, k)]
        if k > 2:
            row.append(_fmt(rec.dice_union if rec.dice_union is not None else 0.0))
        rows.append(row)
    return header, rows


def write_report_csv(report: StreamReport, path) -> None:
    header, rows = report_rows(report)
    lines = [",".join(header)] + [",".join(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def build_summary(
    report: StreamReport, target_dice: float = 0.8, max_clicks: int | None = None
) -> dict:
    cap = max_clicks if max_clicks is not None else report.click_budget
    by_t: dict[int, list[float]] = {}
    for rec in report.records:
        by_t.setdefault(rec.t, []).append(rec.dice_mean)
    mean_dice_at_t = {str(t): float(np.mean(v)) for t, v in sorted(by_t.items())}
    _, ctt_mean = clicks_to_target(report.records, target_dice, cap)
    timings = report.update_timings
    return {
        "v": 1,
        "scenario": report.scenario,
        "seed": report.seed,
        "num_images": len(report.update_counts),
        "click_budget": report.click_budget,
        "mean_dice_at_t": mean_dice_at_t,
        "clicks_to_target": {
            "target": target_dice,
            "cap": cap,
            "mean": ctt_mean,
        },
        "updates": {
            "total": report.end_version - report.start_version,
            "per_image_mean": (
                float(np.mean(list(report.update_counts.values())))
                if report.update_counts
                else 0.0
            ),
        },
        "timings": {
            "update_mean_s": float(np.mean(timings)) if timings else 0.0,
            "update_max_s": float(np.max(timings)) if timings else 0.0,
        },
        "model_version": {
            "start": report.start_version,
            "end": report.end_version,
        },
        "config": report.config,
    }


def write_summary_json(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_report(
    report: StreamReport, out_dir, *, target_dice: float = 0.8
) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    json_path = out / "summary.json"
    write_report_csv(report, csv_path)
    write_summary_json(build_summary(report, target_dice), json_path)
    return csv_path, json_path
