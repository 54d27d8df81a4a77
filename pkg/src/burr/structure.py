"""Multi-layer retrieval structure: construction across layers and the query walk."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .config import BuildConfig, ParallelOptions
from .hashing import (M32, address_rows, coeff_mask, coefficient_word_nb, fmix64_nb, hash_keys,
                      layer_salt_nb, mulhi64_nb, splitmix64)
from .layer import Layer, LayerStats
from .parallel import construct_layer_parallel
from .solver import back_substitute_nb, dot_nb, insert_all
from .thresholds import MODE_CODES, lookup_nb


class ConstructionError(RuntimeError):
    """The base layer could not be solved within the allowed attempts."""


@dataclass(eq=False)
class BaseLayer:
    m: int
    seed: int
    table: np.ndarray


@dataclass
class BuildStats:
    layers: list[LayerStats] = field(default_factory=list)
    base_n: int = 0
    base_attempts: int = 0
    base_seconds: float = 0.0
    hash_seconds: float = 0.0
    total_seconds: float = 0.0
    # for every input pair, the layer that kept it (``len(layers)`` = base)
    assignment: np.ndarray | None = None

    @property
    def sort_seconds(self):
        return sum(s.sort_seconds for s in self.layers)

    @property
    def insert_seconds(self):
        return sum(s.insert_seconds for s in self.layers) + self.base_seconds

    @property
    def backsub_seconds(self):
        return sum(s.backsub_seconds for s in self.layers)

    @property
    def bumped_per_layer(self):
        return [s.n_bumped for s in self.layers]


@dataclass(eq=False)
class RetrievalStructure:
    config: BuildConfig
    layers: list[Layer]
    base: BaseLayer
    stats: BuildStats | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.layers) + 1


def base_seed(global_seed: int, attempt: int) -> int:
    return splitmix64((global_seed ^ 0x5BA5E5EED) + attempt & ((1 << 64) - 1)) & M32


def construct_base(hashes: np.ndarray, values: np.ndarray, config: BuildConfig) -> tuple[BaseLayer, int]:
    """Plain ribbon layer without bumping; grows and reseeds until it solves.

    Returns the layer and the number of attempts used.
    """
    n = hashes.shape[0]
    w = config.w
    m = max(math.ceil(n * (1.0 + config.base_slack)), n + w)
    rhs = values.astype(np.uint16)
    for attempt in range(config.max_base_attempts):
        seed = base_seed(config.seed, attempt)
        layer_h, starts, coeffs = address_rows(hashes, config.layers, seed, m - w + 1, w)
        order = np.argsort(layer_h, kind="stable")
        sys_coeff = np.zeros(m, dtype=np.uint64)
        sys_rhs = np.zeros(m, dtype=np.uint16)
        if insert_all(sys_coeff, sys_rhs, order, starts, coeffs, rhs) < 0:
            table = np.zeros(m, dtype=np.uint16)
            back_substitute_nb(sys_coeff, sys_rhs, 0, m, table)
            return BaseLayer(m=m, seed=seed, table=table), attempt + 1
        m = math.ceil(m * config.base_growth)
    raise ConstructionError(
        f"base layer (layer {config.layers}) with {n} keys failed after {config.max_base_attempts} attempts")


def construct(hashes: np.ndarray, values: np.ndarray, config: BuildConfig,
              options: ParallelOptions | None = None, record_assignment: bool = False) -> RetrievalStructure:
    """Build from master hashes and their r-bit values.

    Equal hashes must carry equal values; anything else ends in
    :class:`ConstructionError` once the conflicting pair reaches the base.
    """
    options = options or ParallelOptions()
    t_start = time.perf_counter()
    hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
    values = np.ascontiguousarray(values, dtype=np.uint16)
    if hashes.shape != values.shape:
        raise ValueError("hashes and values must have the same length")
    if values.size and int(values.max()) >> config.r:
        raise ValueError(f"values must fit in r={config.r} bits")
    stats = BuildStats()
    index = np.arange(hashes.shape[0], dtype=np.int64) if record_assignment else None
    if record_assignment:
        stats.assignment = np.full(hashes.shape[0], -1, dtype=np.int64)
    layers = []
    executor = ThreadPoolExecutor(options.threads) if options.threads > 1 else None
    try:
        for i in range(config.layers):
            res = construct_layer_parallel(hashes, values, config, i, options, executor)
            layers.append(res.layer)
            stats.layers.append(res.stats)
            if record_assignment:
                stats.assignment[index[res.kept_index]] = i
                index = index[res.bumped_index]
            hashes, values = res.bumped_hashes, res.bumped_values
    finally:
        if executor is not None:
            executor.shutdown()
    t0 = time.perf_counter()
    base, attempts = construct_base(hashes, values, config)
    stats.base_seconds = time.perf_counter() - t0
    stats.base_n = hashes.shape[0]
    stats.base_attempts = attempts
    if record_assignment:
        stats.assignment[index] = config.layers
    stats.total_seconds = time.perf_counter() - t_start
    return RetrievalStructure(config=config, layers=layers, base=base, stats=stats)


def build(keys: Sequence[bytes] | np.ndarray, values: np.ndarray, config: BuildConfig,
          options: ParallelOptions | None = None) -> RetrievalStructure:
    """Hash ``keys`` with the configured seed and construct."""
    t0 = time.perf_counter()
    hashes = hash_keys(keys, config.seed)
    hash_seconds = time.perf_counter() - t0
    structure = construct(hashes, values, config, options)
    structure.stats.hash_seconds = hash_seconds
    structure.stats.total_seconds += hash_seconds
    return structure


@nb.njit(nogil=True, cache=True)
def _query_hashes(hashes, n_layers, b, w, mask, mode_code, values, nbuckets, seeds, table_off, tables,
                  code_off, codes, exc_off, exc_buckets, exc_thresholds, base_m, base_seed_, base_table, out):
    for i in range(hashes.shape[0]):
        h = hashes[i]
        done = False
        for L in range(n_layers):
            hl = fmix64_nb(h ^ layer_salt_nb(L, seeds[L]))
            start = np.int64(mulhi64_nb(hl, np.uint64(nbuckets[L] * b)))
            bucket = start // b
            t = lookup_nb(mode_code, codes[code_off[L]:code_off[L + 1]],
                          exc_buckets[exc_off[L]:exc_off[L + 1]],
                          exc_thresholds[exc_off[L]:exc_off[L + 1]], values, b, bucket)
            if start - bucket * b < t:
                out[i] = dot_nb(tables[table_off[L]:table_off[L + 1]], start, coefficient_word_nb(hl, mask))
                done = True
                break
        if not done:
            hl = fmix64_nb(h ^ layer_salt_nb(n_layers, base_seed_))
            start = np.int64(mulhi64_nb(hl, np.uint64(base_m - w + 1)))
            out[i] = dot_nb(base_table, start, coefficient_word_nb(hl, mask))


class _QueryArrays:
    """Flattened per-layer arrays handed to the query kernel."""

    def __init__(self, s: RetrievalStructure):
        cfg = s.config
        self.nbuckets = np.array([L.num_buckets for L in s.layers], dtype=np.int64)
        self.seeds = np.array([L.layer_seed for L in s.layers], dtype=np.int64)
        self.table_off = np.concatenate([[0], np.cumsum([L.m for L in s.layers])]).astype(np.int64)
        self.tables = np.concatenate([L.table for L in s.layers]).astype(np.uint16)
        self.code_off = np.concatenate([[0], np.cumsum([L.thresholds.codes.shape[0] for L in s.layers])]).astype(np.int64)
        self.codes = np.concatenate([L.thresholds.codes for L in s.layers]).astype(np.uint8)
        exc = [L.thresholds.exception_arrays() for L in s.layers]
        self.exc_off = np.concatenate([[0], np.cumsum([e[0].shape[0] for e in exc])]).astype(np.int64)
        self.exc_buckets = np.concatenate([e[0] for e in exc]).astype(np.uint32)
        self.exc_thresholds = np.concatenate([e[1] for e in exc]).astype(np.uint8)
        self.values = np.asarray(cfg.threshold_values, dtype=np.int64)
        self.mode_code = MODE_CODES[cfg.mode]
        self.mask = coeff_mask(cfg.w)


def _arrays(structure: RetrievalStructure) -> _QueryArrays:
    cached = structure.__dict__.get("_query_arrays")
    if cached is None:
        cached = _QueryArrays(structure)
        structure.__dict__["_query_arrays"] = cached
    return cached


def query_hashes(structure: RetrievalStructure, hashes: np.ndarray) -> np.ndarray:
    """Retrieve the r-bit values for many master hashes."""
    hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
    a = _arrays(structure)
    out = np.empty(hashes.shape[0], dtype=np.uint16)
    base = structure.base
    _query_hashes(hashes, len(structure.layers), structure.config.b, structure.config.w, a.mask, a.mode_code, a.values,
                  a.nbuckets, a.seeds, a.table_off, a.tables, a.code_off, a.codes, a.exc_off,
                  a.exc_buckets, a.exc_thresholds, base.m, base.seed, base.table, out)
    return out


def query_many(structure: RetrievalStructure, keys: Sequence[bytes] | np.ndarray) -> np.ndarray:
    return query_hashes(structure, hash_keys(keys, structure.config.seed))


def query(structure: RetrievalStructure, key: bytes) -> int:
    """Value stored for ``key``; arbitrary bits if ``key`` was not in the input."""
    return int(query_many(structure, [key])[0])
