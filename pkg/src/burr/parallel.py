"""Splitting a layer into independent per-thread partitions.

Partitions are separated at bucket boundaries. Keys in the last ``w - 1``
start slots before a boundary would have windows crossing it, so the bucket
in front of every cut gets a forced threshold of ``b - w + 1``. The query
side never learns about any of this.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import BuildConfig, ParallelOptions, Strategy
from .layer import LayerResult, build_layer, size_layer


class CutMetrics(NamedTuple):
    directly_bumped: int
    prev_window: int


@dataclass
class ParallelPlan:
    threads_requested: int
    effective_threads: int
    minbpt: int
    strategy: Strategy
    search_range: int
    cuts: list[int] = field(default_factory=list)


def effective_threads(num_buckets: int, threads: int, minbpt: int) -> int:
    if threads < 1 or minbpt < 1:
        raise ValueError("threads and minbpt must be >= 1")
    return min(threads, max(1, num_buckets // minbpt))


def _count(sorted_starts, lo, hi) -> int:
    lo = max(lo, 0)
    if hi <= lo:
        return 0
    return int(np.searchsorted(sorted_starts, hi) - np.searchsorted(sorted_starts, lo))


def cut_metrics(sorted_starts: np.ndarray, candidate_bucket: int, w: int, b: int) -> CutMetrics:
    """Key counts around a boundary at slot ``c * b``.

    ``directly_bumped`` counts starts in the ``w - 1`` slots right before the
    boundary; ``prev_window`` counts starts in the ``w - 1`` slots before
    those, i.e. keys whose windows can reach into the gap the bumping leaves.
    """
    if candidate_bucket <= 0:
        raise ValueError("a cut at bucket 0 would leave an empty partition")
    beta = candidate_bucket * b
    gap_lo = beta - (w - 1)
    return CutMetrics(_count(sorted_starts, gap_lo, beta),
                      _count(sorted_starts, gap_lo - (w - 1), gap_lo))


def _score(metrics: CutMetrics, strategy: Strategy) -> int:
    # lower is better
    if strategy is Strategy.MINBUMP:
        return metrics.directly_bumped
    if strategy is Strategy.MAXPREV:
        return -metrics.prev_window
    return abs(metrics.directly_bumped - metrics.prev_window)


def plan_cuts(sorted_starts: np.ndarray, num_buckets: int, P: int, strategy: Strategy = Strategy.NOSEARCH,
              search_range: int = 50, w: int = 64, b: int = 128, minbpt: int = 1) -> list[int]:
    """Cut buckets for ``P`` partitions.

    Search strategies look within ``search_range`` buckets of each even cut,
    clamped so every partition keeps at least ``minbpt`` buckets. Ties go to
    the candidate nearest the even cut, then to the smaller index.
    """
    strategy = Strategy(strategy)
    if P <= 1:
        return []
    even = [(2 * p * num_buckets + P) // (2 * P) for p in range(1, P)]
    if strategy is Strategy.NOSEARCH:
        return even
    minbpt = max(1, minbpt)
    cuts: list[int] = []
    prev = 0
    for p, target in enumerate(even, start=1):
        lo = max(prev + minbpt, 1)
        hi = num_buckets - (P - p) * minbpt
        if hi < lo:
            hi = lo
        cand_lo = max(target - search_range, lo)
        cand_hi = min(target + search_range, hi)
        if cand_hi < cand_lo:
            cand_lo = cand_hi = min(max(target, lo), hi)
        best = None
        for c in range(cand_lo, cand_hi + 1):
            key = (_score(cut_metrics(sorted_starts, c, w, b), strategy), abs(c - target), c)
            if best is None or key < best:
                best = key
        cuts.append(best[2])
        prev = best[2]
    return cuts


def forced_boundary_thresholds(cuts: list[int], w: int, b: int) -> dict[int, int]:
    """Cap the bucket in front of each cut so no kept window crosses the boundary."""
    if b < w:
        raise ValueError("bucket size must be at least the ribbon width")
    return {c - 1: b - w + 1 for c in cuts}


def make_plan(num_buckets: int, config: BuildConfig, options: ParallelOptions,
              sorted_starts: np.ndarray | None = None) -> ParallelPlan:
    P = effective_threads(num_buckets, options.threads, options.minbpt)
    plan = ParallelPlan(options.threads, P, options.minbpt, options.strategy, options.search_range)
    if P > 1:
        if sorted_starts is None and options.strategy is not Strategy.NOSEARCH:
            raise ValueError("search strategies need the sorted start slots")
        plan.cuts = plan_cuts(sorted_starts, num_buckets, P, options.strategy, options.search_range,
                              config.w, config.b, options.minbpt)
    return plan


def construct_layer_parallel(hashes: np.ndarray, values: np.ndarray, config: BuildConfig, layer_index: int,
                             options: ParallelOptions, executor: Executor | None = None,
                             keep_system: bool = False) -> LayerResult:
    """Build one layer with up to ``options.threads`` independent partitions."""
    num_buckets = size_layer(hashes.shape[0], config)
    P = effective_threads(num_buckets, options.threads, options.minbpt)

    def planner(sorted_starts, nbuckets):
        cuts = make_plan(nbuckets, config, options, sorted_starts).cuts
        return cuts, forced_boundary_thresholds(cuts, config.w, config.b)

    return build_layer(hashes, values, config, layer_index, threads=P,
                       plan=planner if P > 1 else None,
                       executor=executor if P > 1 else None, keep_system=keep_system)
