"""Figure rendering for learning curves and strategy-score heatmaps.

SVG output is byte-stable: the date stamp is dropped and element ids are
derived from a fixed hash salt. Each drawn curve carries the gid
``curve:<method>``, its band ``band:<method>`` and every heatmap cell
``cell:<round>:<strategy>`` so files can be inspected structurally.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from ..errors import FormatError  # noqa: E402

CMAP = "viridis"
MARGIN = 0.05

_STYLE = {
    "svg.hashsalt": "autoal",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (6.4, 4.2),
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_STYLE):  # the hash salt is read at save time
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def padded_range(lo, hi, margin=MARGIN):
    span = hi - lo
    if span <= 0:
        span = abs(hi) if hi else 1.0
    return lo - margin * span, hi + margin * span


def learning_curve_figure(curves):
    """One line per method: mean accuracy vs labeled count with a +-1 std band."""
    if not curves or not any(curves.values()):
        raise FormatError("no curve data to plot")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        xs_all, lo_all, hi_all = [], [], []
        for method, points in curves.items():
            x = np.array([p[0] for p in points], dtype=float)
            mean = np.array([p[1] for p in points])
            std = np.array([p[2] for p in points])
            band = ax.fill_between(x, mean - std, mean + std, alpha=0.2, linewidth=0)
            band.set_gid(f"band:{method}")
            (line,) = ax.plot(x, mean, marker="o", markersize=3, label=method)
            line.set_gid(f"curve:{method}")
            band.set_color(line.get_color())
            xs_all.append(x)
            lo_all.append(mean - std)
            hi_all.append(mean + std)
        xs = np.concatenate(xs_all)
        ax.set_xlim(*padded_range(xs.min(), xs.max()))
        ax.set_ylim(*padded_range(np.concatenate(lo_all).min(), np.concatenate(hi_all).max()))
        ax.set_xlabel("labeled samples")
        ax.set_ylabel("test accuracy")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
    return fig


def plot_learning_curves(curves, path):
    return _save(learning_curve_figure(curves), path)


def heatmap_grid(score_rows):
    """Average per-seed rows ``(run_id, seed, round, strategy, score)`` into a
    rounds x strategies matrix, then rescale every round to max 1."""
    if not score_rows:
        raise FormatError("no strategy scores to plot")
    rounds = sorted({r[2] for r in score_rows})
    strategies = list(dict.fromkeys(r[3] for r in score_rows))
    total = np.zeros((len(rounds), len(strategies)))
    count = np.zeros_like(total)
    for _, _, rnd, strategy, score in score_rows:
        i, j = rounds.index(rnd), strategies.index(strategy)
        total[i, j] += score
        count[i, j] += 1
    grid = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    for i in range(len(rounds)):
        lo, hi = grid[i].min(), grid[i].max()
        grid[i] = (grid[i] - lo) / (hi - lo) if hi > lo else 1.0
    return rounds, strategies, grid


def heatmap_figure(rounds, strategies, grid):
    cmap = plt.get_cmap(CMAP)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(strategies), 1.0 + 0.5 * len(rounds)))
        for i, rnd in enumerate(rounds):
            for j, strategy in enumerate(strategies):
                cell = Rectangle((j, i), 1, 1, facecolor=cmap(float(grid[i, j])),
                                 edgecolor="white", linewidth=0.5)
                cell.set_gid(f"cell:{rnd}:{strategy}")
                ax.add_patch(cell)
        ax.set_xlim(0, len(strategies))
        ax.set_ylim(len(rounds), 0)
        ax.set_xticks(np.arange(len(strategies)) + 0.5)
        ax.set_xticklabels(strategies, rotation=45, ha="right")
        ax.set_yticks(np.arange(len(rounds)) + 0.5)
        ax.set_yticklabels([str(r) for r in rounds])
        ax.set_ylabel("AL round")
        fig.colorbar(plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(0, 1)), ax=ax,
                     label="normalized score")
        fig.tight_layout()
    return fig


def plot_heatmap(score_rows, path):
    return _save(heatmap_figure(*heatmap_grid(score_rows)), path)
