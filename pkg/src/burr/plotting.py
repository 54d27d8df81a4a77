"""Figures written next to benchmark CSVs."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "axes.labelsize": 9,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
PHASE_COLORS = {"insert": "#4c9a2a", "sort": "#2a6f9a", "backsub": "#e08a1e"}


def _mean_by_threads(records, attr):
    acc = defaultdict(list)
    for rec in records:
        acc[rec.threads].append(getattr(rec, attr))
    threads = sorted(acc)
    return threads, [sum(acc[t]) / len(acc[t]) for t in threads]


def plot_construct(records, path: str | os.PathLike) -> str:
    """Speedup, runtime breakdown and per-thread space overhead against thread count."""
    with plt.rc_context(STYLE):
        fig, (ax_s, ax_b, ax_o) = plt.subplots(1, 3, figsize=(10, 3))
        threads, speed = _mean_by_threads(records, "speedup")
        ax_s.plot(threads, speed, marker="o", color="#2a6f9a")
        ax_s.plot(threads, threads, ls="--", color="gray", lw=0.8)
        ax_s.set_xlabel("Threads")
        ax_s.set_ylabel("Speedup")

        x = range(len(threads))
        bottom = [0.0] * len(threads)
        for phase in ("insert", "sort", "backsub"):
            _, vals = _mean_by_threads(records, f"{phase}_seconds")
            ax_b.bar(x, vals, bottom=bottom, color=PHASE_COLORS[phase], label=phase)
            bottom = [a + b for a, b in zip(bottom, vals)]
        ax_b.set_xticks(list(x), [str(t) for t in threads])
        ax_b.set_xlabel("Threads")
        ax_b.set_ylabel("Time (s)")
        ax_b.legend(frameon=False)

        _, nbytes = _mean_by_threads(records, "structural_bytes")
        base = dict(zip(threads, nbytes)).get(1)
        if base is not None:
            pts = [(t, (v - base) / (t - 1)) for t, v in zip(threads, nbytes) if t > 1]
            if pts:
                ax_o.plot(*zip(*pts), marker="o", color="#4c9a2a")
        ax_o.set_xlabel("Threads")
        ax_o.set_ylabel("Bytes per additional thread")
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return str(path)


def plot_strategies(rows, path: str | os.PathLike) -> str:
    """Horizontal bars of mean per-thread overhead for each (strategy, mode)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 0.35 * len(rows) + 1.0))
        labels = [f"{r.strategy}, {r.mode}" for r in rows]
        means = [r.mean_overhead_bytes for r in rows]
        errs = [r.std_overhead_bytes for r in rows]
        ax.barh(range(len(rows)), means, xerr=errs, color="#2a6f9a", capsize=2)
        for i, v in enumerate(means):
            ax.annotate(f"{v:.1f}", (max(v, 0), i), xytext=(3, 0), textcoords="offset points",
                        va="center", fontsize=7)
        ax.set_yticks(range(len(rows)), labels)
        ax.set_xlabel("Bytes space overhead per additional thread")
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return str(path)
