"""Line charts of sweep records."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .schemes import SCHEME_IDS  # noqa: E402

AXIS_LABELS = {
    "elements": "Number of IRS elements $L^2$",
    "mnos": "Number of MNOs $N$",
}
SCHEME_LABELS = {
    "sharing": "IRS sharing",
    "time-division": "Time-division",
    "no-sharing": "No sharing",
    "random": "Random phase shift",
    "standalone-switching": "Stand-alone switching",
}
MARKERS = dict(zip(SCHEME_IDS, "osD^v"))


def pretty_plot(width=6.0, height=None):
    golden_ratio = (5**0.5 - 1.0) / 2.0
    height = height or width * golden_ratio
    plt.rcParams.update({
        "font.size": 11,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "grid.linestyle": ":",
        "lines.linewidth": 1.6,
        "lines.markersize": 6,
        "legend.frameon": False,
        # fixed ids so repeated runs write identical SVG
        "svg.hashsalt": "irsshare",
    })
    fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def plot_sweep(records: Sequence, path, title: str | None = None):
    """Mean minimum rate with standard-error bars, one series per scheme.

    Series are drawn in the fixed scheme order so legends line up across
    runs.
    """
    by_scheme = defaultdict(list)
    axes = {r.axis_name for r in records}
    if len(axes) > 1:
        raise ValueError(f"records mix sweep axes {sorted(axes)}")
    for r in records:
        by_scheme[r.scheme_id].append(r)

    fig, ax = pretty_plot()
    for scheme_id in SCHEME_IDS:
        rows = sorted(by_scheme.get(scheme_id, []), key=lambda r: r.axis_value)
        if not rows:
            continue
        ax.errorbar(
            [r.axis_value for r in rows],
            [r.mean_min_rate for r in rows],
            yerr=[r.std_error for r in rows],
            marker=MARKERS[scheme_id],
            capsize=3,
            label=SCHEME_LABELS[scheme_id],
            gid=scheme_id,
        )
    axis = axes.pop() if axes else "elements"
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("Minimum achievable rate [bit/s/Hz]")
    if title:
        ax.set_title(title)
    ax.set_ylim(bottom=0)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
