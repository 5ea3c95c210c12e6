"""Figures written next to evaluation reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import TOP_N, EvaluationReport  # noqa: E402

# fixed metadata keeps reruns byte-identical
_PNG_METADATA = {"Software": None}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(direction="out", labelsize=9)
    ax.grid(axis="y", color="0.85", linewidth=0.6)
    ax.set_axisbelow(True)


def topn_figure(reports: Sequence[EvaluationReport], path: Path, title: str = "") -> Path:
    """Grouped bars of Top-N counts per row, with MFR/MAR in the legend labels."""
    n_rows = len(reports)
    width = 0.8 / max(n_rows, 1)
    fig, ax = plt.subplots(figsize=(max(5.0, 1.2 + 0.9 * len(TOP_N) * max(1, n_rows) * 0.5), 3.4))
    xs = range(len(TOP_N))
    cmap = plt.get_cmap("tab10" if n_rows <= 10 else "tab20")
    for i, rep in enumerate(reports):
        offsets = [x - 0.4 + width * (i + 0.5) for x in xs]
        label = f"{rep.label} (MFR {rep.mfr:.2f}, MAR {rep.mar:.2f})"
        ax.bar(offsets, [rep.top_n[n] for n in TOP_N], width=width, label=label, color=cmap(i % cmap.N))
    ax.set_xticks(list(xs))
    ax.set_xticklabels([f"Top-{n}" for n in TOP_N])
    ax.set_ylabel("bugs isolated")
    if reports:
        ax.set_ylim(0, max(len(r.per_bug) for r in reports) * 1.1 + 0.5)
    if title:
        ax.set_title(title, fontsize=10)
    _style(ax)
    ax.legend(fontsize=7, frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def rank_shift_figure(pairs: Sequence[tuple[str, int, int]], path: Path, limit: int = 40) -> Path:
    """Scatter of the faulty file's rank under test coverage (x) vs execution coverage (y)."""
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    shown = [(b, x, y) for b, x, y in pairs if x <= limit and y <= limit]
    ax.scatter([x for _, x, _ in shown], [y for _, _, y in shown], s=14, color="tab:blue")
    ax.plot([1, limit], [1, limit], color="0.6", linewidth=0.8, linestyle="--")
    ax.set_xlim(0, limit + 1)
    ax.set_ylim(0, limit + 1)
    ax.set_xlabel("rank with test coverage")
    ax.set_ylabel("rank with execution coverage")
    _style(ax)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path
