"""Report rendering: measure tables and score-curve dumps, each written as
machine-readable data (JSON / CSV) with a matplotlib figure alongside."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import MeasureStats

__all__ = ["write_eval_report", "write_score_dump"]

plt.rcParams.update(
    {
        "figure.figsize": (8.0, 3.2),
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.3,
    }
)


def _row_label(row: dict) -> str:
    lam = row.get("lambda0")
    return row["strategy"] if lam is None else f"{row['strategy']} ({lam:g})"


def write_eval_report(rows: Sequence[dict], out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, an aligned report.txt and report.png into out_dir.

    Each row holds "strategy", "lambda0" (None for strategies without a
    shift), "n" and MeasureStats for "ppl", "rep", "sr".
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = []
    for row in rows:
        payload.append(
            {
                "strategy": row["strategy"],
                "lambda0": row["lambda0"],
                "n": row["n"],
                "ppl_mean": row["ppl"].mean,
                "ppl_std": row["ppl"].std,
                "rep_mean": row["rep"].mean,
                "rep_std": row["rep"].std,
                "sr_mean": row["sr"].mean,
                "sr_std": row["sr"].std,
            }
        )
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")

    headers = ["Strategy", "lambda0", "PPL ± Std", "Rep, %", "SR, %"]
    table = []
    for row in rows:
        lam = row["lambda0"]
        table.append(
            [
                row["strategy"],
                "-" if lam is None else f"{lam:g}",
                str(row["ppl"]),
                f"{100 * row['rep'].mean:.2f}",
                f"{100 * row['sr'].mean:.2f}",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in table)) if table else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    txt_path = out_dir / "report.txt"
    txt_path.write_text("\n".join(lines) + "\n", "utf-8")

    labels = [_row_label(r) for r in rows]
    fig, axes = plt.subplots(1, 3)
    panels = [("ppl", "PPL"), ("rep", "Rep"), ("sr", "SR")]
    for ax, (key, title) in zip(axes, panels):
        stats: list[MeasureStats] = [r[key] for r in rows]
        ax.bar(range(len(rows)), [s.mean for s in stats], yerr=[s.std for s in stats], capsize=3)
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
        ax.set_title(title)
    fig.tight_layout()
    png_path = out_dir / "report.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return {"json": json_path, "txt": txt_path, "png": png_path}


def write_score_dump(
    rows: Sequence[tuple[str, float, float, float]], prefix: str | Path
) -> dict[str, Path]:
    """Write <prefix>.csv and <prefix>.png for score-curve rows.

    Rows are (token, ar_score, mlm_score, fused_score), already ordered by
    descending autoregressive score; the figure plots all three curves over
    the token rank.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "token", "ar_score", "mlm_score", "fused_score"])
        for rank, (token, ar, mlm, fused) in enumerate(rows, start=1):
            writer.writerow([rank, token, f"{ar:.6f}", f"{mlm:.6f}", f"{fused:.6f}"])

    ranks = range(1, len(rows) + 1)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(ranks, [r[1] for r in rows], label="autoregressive", lw=1.2)
    ax.plot(ranks, [r[2] for r in rows], label="masked", lw=0.8, alpha=0.8)
    ax.plot(ranks, [r[3] for r in rows], label="fused", lw=1.0, ls="--")
    ax.set_xlabel("token rank (by autoregressive score)")
    ax.set_ylabel("log score")
    ax.legend(frameon=False)
    fig.tight_layout()
    png_path = prefix.with_suffix(".png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}
