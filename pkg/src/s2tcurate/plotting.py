"""Report figures. Everything renders off-screen to files."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keep PNG bytes stable across runs
    "svg.hashsalt": "s2tcurate",
}


def figsize(width=6.0, ratio=None):
    ratio = ratio or (math.sqrt(5) - 1) / 2
    return width, width * ratio


# drop version strings and timestamps so reruns write identical files
_METADATA = {
    ".png": {"Software": None},
    ".svg": {"Creator": None, "Date": None},
    ".pdf": {"Creator": None, "Producer": None, "CreationDate": None},
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # the pipeline writes "<name>.partial.<ext>", so the last suffix is the format
    fig.savefig(path, metadata=_METADATA.get(path.suffix.lower()))
    plt.close(fig)
    return path


def plot_volume(stats, path) -> Path:
    """Bar chart of hours per dataset, annotated with example counts."""
    with plt.rc_context(RC):
        names = [s.dataset for s in stats.values()]
        hours = [s.volume_hours for s in stats.values()]
        fig, ax = plt.subplots(figsize=figsize(max(4.0, 0.6 * len(names) + 2)))
        bars = ax.bar(names, hours, color="0.45")
        for bar, s in zip(bars, stats.values()):
            ax.annotate(f"{s.num_examples}", (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                        ha="center", va="bottom", fontsize=7)
        ax.set_ylabel("volume (h)")
        ax.set_title("corpus volume per dataset")
        ax.tick_params(axis="x", rotation=45)
        return _save(fig, path)


def plot_cer_distribution(decisions, path, bins=30) -> Path:
    """Histogram of example CER per dataset, kept vs discarded."""
    with plt.rc_context(RC):
        by_ds: dict[str, list] = {}
        for d in decisions:
            by_ds.setdefault(d.dataset or "all", []).append(d)
        n = len(by_ds)
        cols = min(3, n) or 1
        rows = math.ceil(n / cols) or 1
        fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows), squeeze=False)
        for ax, (name, decs) in zip(axes.flat, sorted(by_ds.items())):
            kept = [d.cer for d in decs if d.verdict == "keep"]
            dropped = [d.cer for d in decs if d.verdict == "discard"]
            top = max([d.cer for d in decs] + [1e-9])
            edges = [top * i / bins for i in range(bins + 1)]
            ax.hist([kept, dropped], bins=edges, stacked=True, color=["0.6", "tab:red"], label=["keep", "discard"])
            ax.set_title(f"{name} (k={decs[0].k_percent:g}%)")
            ax.set_xlabel("CER")
        for ax in list(axes.flat)[n:]:
            ax.set_visible(False)
        axes.flat[0].legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_deletion_report(rows, path) -> Path:
    """Grouped bars of total and deletion rates for the two systems per subset."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(max(4.0, 1.4 * len(rows) + 2)))
        width = 0.2
        xs = range(len(rows))
        series = [
            ("old total", [r.old_total for r in rows], "0.35"),
            ("new total", [r.new_total for r in rows], "0.7"),
            ("old del", [r.old_del for r in rows], "tab:red"),
            ("new del", [r.new_del for r in rows], "salmon"),
        ]
        for k, (label, vals, color) in enumerate(series):
            ax.bar([x + (k - 1.5) * width for x in xs], vals, width, label=label, color=color)
        ax.set_xticks(list(xs))
        ax.set_xticklabels([r.subset for r in rows])
        ax.set_ylabel("error rate")
        ax.legend(ncol=2)
        return _save(fig, path)
