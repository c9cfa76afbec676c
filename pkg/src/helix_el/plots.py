"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "render_popularity_histogram",
    "render_error_breakdown",
    "render_dynamics_trace",
]


def render_popularity_histogram(rows: list[tuple[float, float, int]],
                                path: str | Path) -> None:
    """Bar chart of the log-binned popularity counts."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        labels = [f"[{int(lo)}, {int(hi)})" for lo, hi, _ in rows]
        ax.bar(range(len(rows)), [c for _, _, c in rows], color="#4878cf")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_xlabel("popularity bin")
    ax.set_ylabel("entities")
    ax.set_title("Gold-entity popularity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_error_breakdown(rows: list[dict], path: str | Path) -> None:
    """Bar chart of error shares per (target, in-top-k, predicted) bucket."""
    fig, ax = plt.subplots(figsize=(7, 4))
    if rows:
        def fmt(row):
            topk = {True: "+", False: "x", None: "-"}[row["target_in_topk"]]
            return f"{row['target']}/{topk}/{row['predicted']}"

        ax.bar(range(len(rows)), [r["share"] for r in rows], color="#d1615d")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([fmt(r) for r in rows], rotation=30, ha="right",
                           fontsize=8)
    ax.set_ylabel("share of errors")
    ax.set_title("Error breakdown (target / target-in-top-k / predicted)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_dynamics_trace(rows: list[tuple[str, int, float]],
                          path: str | Path) -> None:
    """Max-delta convergence curves, one line per game."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_game: dict[str, list[tuple[int, float]]] = {}
    for key, iteration, delta in rows:
        by_game.setdefault(key, []).append((iteration, delta))
    for key, points in by_game.items():
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points],
                alpha=0.5, linewidth=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("max strategy change")
    ax.set_title(f"Replicator convergence ({len(by_game)} games)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
