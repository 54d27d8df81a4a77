"""One bumping layer: sizing, sorting, the bucket loop with bumping, back substitution."""

from __future__ import annotations

import time
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .config import BuildConfig
from .hashing import M32, address_rows, splitmix64
from .solver import FAILURE, back_substitute_nb, insert_nb
from .thresholds import MODE_CODES, ThresholdStore, quantize_nb


@dataclass(eq=False)
class Layer:
    num_buckets: int
    layer_seed: int
    table: np.ndarray
    thresholds: ThresholdStore

    @property
    def m(self) -> int:
        return self.table.shape[0]


@dataclass
class LayerStats:
    n_in: int = 0
    n_bumped: int = 0
    threads: int = 1
    cuts: list[int] = field(default_factory=list)
    sort_seconds: float = 0.0
    insert_seconds: float = 0.0
    backsub_seconds: float = 0.0


@dataclass(eq=False)
class LayerResult:
    layer: Layer
    bumped_hashes: np.ndarray
    bumped_values: np.ndarray
    # positions (into the input arrays) of keys kept by this layer
    kept_index: np.ndarray
    bumped_index: np.ndarray
    stats: LayerStats
    # raw system right before back substitution, kept for inspection
    system_coeff: np.ndarray | None = None


def size_layer(n_keys: int, config: BuildConfig) -> int:
    """Bucket count for ``n_keys`` keys at the configured overload."""
    return max(1, int(round(n_keys / (config.b * (1.0 + config.overload)))))


def layer_seed(global_seed: int, layer: int) -> int:
    return splitmix64((global_seed + 0x1000 * (layer + 1)) & ((1 << 64) - 1)) & M32


@nb.njit(nogil=True, cache=True)
def solve_buckets(starts, coeffs, rhs, row_lo, row_hi, bucket_lo, bucket_hi, b, w,
                  caps, mode_code, values, sys_coeff, sys_rhs, thresholds, kept):
    """Bucket loop for rows ``[row_lo, row_hi)`` (sorted by start) in buckets ``[bucket_lo, bucket_hi)``.

    Inserts rows bucket by bucket; on the first failure or the first row at
    or past the bucket's cap, the bucket's threshold is set and its suffix of
    rows (by offset) is uninstalled and marked as bumped.
    """
    j_off = np.empty(b + w, np.int64)
    j_piv = np.empty(b + w, np.int64)
    i = row_lo
    for bucket in range(bucket_lo, bucket_hi):
        base = bucket * b
        end = i
        while end < row_hi and starts[end] < base + b:
            end += 1
        cap = caps[bucket]
        t_req = b
        n_j = 0
        for k in range(i, end):
            off = starts[k] - base
            if off >= cap:
                t_req = cap
                break
            p = insert_nb(sys_coeff, sys_rhs, starts[k], coeffs[k], rhs[k])
            if p >= 0:
                j_off[n_j] = off
                j_piv[n_j] = p
                n_j += 1
            elif p == FAILURE:
                t_req = off
                break
        t = quantize_nb(t_req, mode_code, values)
        while n_j > 0 and j_off[n_j - 1] >= t:
            n_j -= 1
            sys_coeff[j_piv[n_j]] = 0
            sys_rhs[j_piv[n_j]] = 0
        thresholds[bucket] = t
        for k in range(i, end):
            kept[k] = (starts[k] - base) < t
        i = end


@nb.njit(nogil=True, cache=True)
def _split_by_top(keys, parts, out_index, bounds):
    """Stable counting scatter of ``keys`` into ``parts`` equal value ranges."""
    counts = np.zeros(parts + 1, np.int64)
    for i in range(keys.shape[0]):
        counts[np.int64(keys[i] // (np.uint64(0xFFFFFFFFFFFFFFFF) // np.uint64(parts) + np.uint64(1))) + 1] += 1
    for p in range(parts):
        counts[p + 1] += counts[p]
    for p in range(parts + 1):
        bounds[p] = counts[p]
    for i in range(keys.shape[0]):
        p = np.int64(keys[i] // (np.uint64(0xFFFFFFFFFFFFFFFF) // np.uint64(parts) + np.uint64(1)))
        out_index[counts[p]] = i
        counts[p] += 1


def sort_order(keys: np.ndarray, workers: int = 1, executor: Executor | None = None) -> np.ndarray:
    """Stable ascending order of ``uint64`` keys.

    With several workers the key range is split into equal slices that are
    sorted independently; the result equals the single-worker order.
    """
    if workers <= 1 or executor is None or keys.shape[0] < 2 * workers:
        return np.argsort(keys, kind="stable")
    index = np.empty(keys.shape[0], dtype=np.int64)
    bounds = np.empty(workers + 1, dtype=np.int64)
    _split_by_top(keys, workers, index, bounds)

    def sort_slice(p):
        idx = index[bounds[p]:bounds[p + 1]]
        index[bounds[p]:bounds[p + 1]] = idx[np.argsort(keys[idx], kind="stable")]

    list(executor.map(sort_slice, range(workers)))
    return index


def build_layer(hashes: np.ndarray, values: np.ndarray, config: BuildConfig, layer_index: int, *,
                threads: int = 1, plan=None, forced: dict[int, int] | None = None,
                executor: Executor | None = None, keep_system: bool = False) -> LayerResult:
    """Build one layer, split across ``threads`` partitions.

    ``plan(sorted_starts, num_buckets)`` returns the cut buckets and the
    forced thresholds they need; without it the layer is one partition.
    """
    b, w = config.b, config.w
    n = hashes.shape[0]
    num_buckets = size_layer(n, config)
    m = num_buckets * b + w - 1
    seed = layer_seed(config.seed, layer_index)
    stats = LayerStats(n_in=n, threads=threads)

    t0 = time.perf_counter()
    layer_h, starts, coeffs = address_rows(hashes, layer_index, seed, num_buckets * b, w)
    order = sort_order(layer_h, threads, executor)
    starts = starts[order]
    coeffs = coeffs[order]
    rhs = values[order].astype(np.uint16)
    stats.sort_seconds = time.perf_counter() - t0

    cuts: list[int] = []
    caps = np.full(num_buckets, b, dtype=np.int64)
    if plan is not None:
        cuts, plan_forced = plan(starts, num_buckets)
        for bucket, t in plan_forced.items():
            caps[bucket] = min(caps[bucket], t)
    for bucket, t in (forced or {}).items():
        caps[bucket] = min(caps[bucket], t)
    stats.cuts = list(cuts)
    stats.threads = len(cuts) + 1

    t0 = time.perf_counter()
    sys_coeff = np.zeros(m, dtype=np.uint64)
    sys_rhs = np.zeros(m, dtype=np.uint16)
    thresholds = np.full(num_buckets, b, dtype=np.int64)
    kept = np.zeros(n, dtype=np.bool_)
    bucket_bounds = [0, *cuts, num_buckets]
    row_bounds = np.searchsorted(starts, np.asarray(bucket_bounds, dtype=np.int64) * b)
    values_arr = np.asarray(config.threshold_values, dtype=np.int64)
    mode_code = MODE_CODES[config.mode]

    def insert_part(p):
        solve_buckets(starts, coeffs, rhs, row_bounds[p], row_bounds[p + 1],
                      bucket_bounds[p], bucket_bounds[p + 1], b, w, caps, mode_code,
                      values_arr, sys_coeff, sys_rhs, thresholds, kept)

    parts = range(len(bucket_bounds) - 1)
    _run(insert_part, parts, executor)
    stats.insert_seconds = time.perf_counter() - t0
    system_snapshot = sys_coeff.copy() if keep_system else None

    t0 = time.perf_counter()
    table = np.zeros(m, dtype=np.uint16)
    slot_bounds = [c * b for c in bucket_bounds[:-1]] + [m]

    def backsub_part(p):
        back_substitute_nb(sys_coeff, sys_rhs, slot_bounds[p], slot_bounds[p + 1], table)

    _run(backsub_part, parts, executor)
    stats.backsub_seconds = time.perf_counter() - t0

    store = ThresholdStore.from_thresholds(thresholds, b, config.mode, config.threshold_values)
    bumped = order[~kept]
    stats.n_bumped = int(bumped.shape[0])
    layer = Layer(num_buckets=num_buckets, layer_seed=seed, table=table, thresholds=store)
    return LayerResult(layer, hashes[bumped], values[bumped], order[kept], bumped, stats, system_snapshot)


def _run(fn, parts, executor):
    if executor is None or len(parts) <= 1:
        for p in parts:
            fn(p)
    else:
        list(executor.map(fn, parts))


def construct_layer_sequential(hashes: np.ndarray, values: np.ndarray, config: BuildConfig,
                               layer_index: int, forced: dict[int, int] | None = None) -> LayerResult:
    """Single-partition layer construction with optional forced per-bucket caps."""
    return build_layer(hashes, values, config, layer_index, forced=forced)
