"""Figure rendering for coverage statistics and curation worklists.

The CLI writes these PNGs next to its delimited/tabular output when asked via
``--figures``; rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .instantiation import CoverageStats


def save_stats_figure(stats: CoverageStats, path: str | Path) -> Path:
    """Grouped bar chart of induced vs curated element counts."""
    path = Path(path)
    categories = ("Events", "Participants")
    induced = (stats.induced_events, stats.induced_participants)
    curated = (stats.curated_events, stats.curated_participants)
    increases = (stats.increase_pct_events, stats.increase_pct_participants)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positions = range(len(categories))
    width = 0.38
    bars_induced = ax.bar([p - width / 2 for p in positions], induced, width, label="Induced", color="#1f3b70")
    bars_curated = ax.bar([p + width / 2 for p in positions], curated, width, label="Curated", color="#f5a623")
    ax.bar_label(bars_induced, padding=2, fontsize=9)
    ax.bar_label(bars_curated, padding=2, fontsize=9)
    for pos, pct in zip(positions, increases):
        ax.annotate(
            f"+{pct}%",
            xy=(pos + width / 2, curated[pos]),
            xytext=(0, 14),
            textcoords="offset points",
            ha="center",
            fontsize=9,
            color="#555555",
        )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(categories)
    ax.set_ylabel("Element count")
    ax.set_title("Schema coverage by provenance")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_worklist_figure(worklist: list[dict], path: str | Path, top_n: int = 20) -> Path:
    """Horizontal frequency bars for the top ranked unmatched events."""
    path = Path(path)
    rows = worklist[:top_n]
    fig, ax = plt.subplots(figsize=(6.5, max(2.0, 0.35 * len(rows) + 1.2)))
    if rows:
        labels = [row["surface"] for row in rows]
        counts = [row["count"] for row in rows]
        y = range(len(rows))
        ax.barh(list(y), counts, color="#1f3b70")
        ax.set_yticks(list(y))
        ax.set_yticklabels(labels, fontsize=9)
        ax.invert_yaxis()
        ax.set_xlabel("Occurrences")
    else:
        ax.text(0.5, 0.5, "no unmatched events", ha="center", va="center", fontsize=11)
        ax.set_axis_off()
    ax.set_title("Unmatched events by frequency")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
