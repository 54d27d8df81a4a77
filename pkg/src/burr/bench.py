"""Space and time measurements: structural bytes, per-thread overhead, benchmark records."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .bits import packed_size
from .config import BuildConfig, ParallelOptions, Strategy, ThresholdMode
from .filter import build_filter_from_hashes, may_contain_hashes
from .hashing import hash_keys
from .structure import RetrievalStructure

_M64 = (1 << 64) - 1


def synthetic_keys(n: int, seed: int, offset: int = 0) -> np.ndarray:
    """``n`` distinct 64-bit keys from counters ``offset ..`` mixed with ``seed``.

    Each element stands for its 8-byte little-endian encoding.
    """
    counters = np.arange(offset, offset + n, dtype=np.uint64)
    state = counters * np.uint64(0x9E3779B97F4A7C15) + np.uint64(seed & _M64)
    return _splitmix_array(state)


def _splitmix_array(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def structural_bytes(structure: RetrievalStructure) -> int:
    """Tables, threshold codes and exception entries; fixed headers excluded."""
    r = structure.config.r
    total = sum(packed_size(L.m, r) + L.thresholds.threshold_bytes() for L in structure.layers)
    return total + packed_size(structure.base.m, r)


def build_filter_structure(n: int, config: BuildConfig, options: ParallelOptions, seed: int | None = None):
    """Filter over ``n`` synthetic keys; returns ``(filter, master hashes)``."""
    seed = config.seed if seed is None else seed
    hashes = hash_keys(synthetic_keys(n, seed), config.seed)
    return build_filter_from_hashes(hashes, config, options), hashes


def overhead_per_additional_thread(n: int, T: int, config: BuildConfig, options: ParallelOptions,
                                   baseline: int | None = None) -> float:
    """Extra structural bytes of a ``T``-thread build over the 1-thread build, per extra thread.

    ``baseline`` lets callers reuse a known 1-thread byte count.
    """
    if T < 2:
        raise ValueError("need at least two threads to have a cut")
    hashes = hash_keys(synthetic_keys(n, config.seed), config.seed)
    if baseline is None:
        baseline = _filter_bytes(hashes, config, replace(options, threads=1))
    return (_filter_bytes(hashes, config, replace(options, threads=T)) - baseline) / (T - 1)


def _filter_bytes(hashes, config, options) -> int:
    return structural_bytes(build_filter_from_hashes(hashes, config, options).structure)


@dataclass
class BenchRecord:
    n: int
    threads: int
    effective_threads: int
    minbpt: int
    mode: str
    strategy: str
    search_range: int
    r: int
    overload: float
    layers: int
    seed: int
    repeat: int
    sort_seconds: float
    insert_seconds: float
    backsub_seconds: float
    total_seconds: float
    structural_bytes: int
    bytes_per_key: float
    bumped_per_layer: str
    speedup: float = float("nan")
    fp_rate: float = float("nan")
    false_negatives: int = -1


def _record(n, config, options, repeat, structure) -> BenchRecord:
    st = structure.stats
    nbytes = structural_bytes(structure)
    return BenchRecord(
        n=n, threads=options.threads, effective_threads=max(s.threads for s in st.layers),
        minbpt=options.minbpt, mode=config.mode.value, strategy=options.strategy.value,
        search_range=options.search_range, r=config.r, overload=config.overload, layers=config.layers,
        seed=config.seed, repeat=repeat, sort_seconds=st.sort_seconds, insert_seconds=st.insert_seconds,
        backsub_seconds=st.backsub_seconds, total_seconds=st.total_seconds, structural_bytes=nbytes,
        bytes_per_key=nbytes / max(n, 1), bumped_per_layer=";".join(map(str, st.bumped_per_layer)))


def bench_construct(n: int, threads_list: Sequence[int], repeats: int, config: BuildConfig,
                    options: ParallelOptions) -> list[BenchRecord]:
    """Time filter construction for each thread count; speedup is against the first 1-thread repeat mean."""
    if n < 1:
        raise ValueError("n must be >= 1")
    hashes = hash_keys(synthetic_keys(n, config.seed), config.seed)
    records = []
    for T in threads_list:
        opts = replace(options, threads=T)
        for rep in range(repeats):
            f = build_filter_from_hashes(hashes, config, opts)
            records.append(_record(n, config, opts, rep, f.structure))
    base = [r.total_seconds for r in records if r.threads == 1]
    if base:
        ref = sum(base) / len(base)
        for rec in records:
            rec.speedup = ref / rec.total_seconds
    return records


@dataclass
class StrategyRow:
    n: int
    threads: int
    minbpt: int
    search_range: int
    mode: str
    strategy: str
    seeds: int
    mean_overhead_bytes: float
    std_overhead_bytes: float
    per_seed: str


def bench_strategies(n: int, T: int, minbpt: int, search_range: int, modes: Iterable[ThresholdMode],
                     seeds: Sequence[int] = tuple(range(10)), strategies: Iterable[Strategy] = tuple(Strategy),
                     config: BuildConfig | None = None) -> list[StrategyRow]:
    """Mean per-thread overhead of every cut strategy, over a fixed seed set."""
    if T < 2:
        raise ValueError("strategy comparison needs T >= 2")
    config = config or BuildConfig()
    strategies = [Strategy(s) for s in strategies]
    rows = []
    for mode in modes:
        per = {s: [] for s in strategies}
        for seed in seeds:
            cfg = replace(config, mode=ThresholdMode(mode), seed=seed, two_bit_values=None)
            hashes = hash_keys(synthetic_keys(n, seed), seed)
            base_opts = ParallelOptions(threads=1, minbpt=minbpt, search_range=search_range)
            baseline = _filter_bytes(hashes, cfg, base_opts)
            for s in strategies:
                opts = replace(base_opts, threads=T, strategy=s)
                per[s].append((_filter_bytes(hashes, cfg, opts) - baseline) / (T - 1))
        for s in strategies:
            vals = np.asarray(per[s])
            rows.append(StrategyRow(n, T, minbpt, search_range, ThresholdMode(mode).value, s.value,
                                    len(vals), float(vals.mean()), float(vals.std()),
                                    ";".join(f"{v:.3f}" for v in vals)))
    return rows


def bench_filter(n: int, negatives: int, config: BuildConfig, options: ParallelOptions) -> BenchRecord:
    """False-negative count and false-positive rate of a synthetic filter."""
    f, hashes = build_filter_structure(n, config, options)
    rec = _record(n, config, options, 0, f.structure)
    rec.false_negatives = int(np.count_nonzero(~may_contain_hashes(f, hashes)))
    neg = hash_keys(synthetic_keys(negatives, config.seed, offset=n), config.seed)
    rec.fp_rate = float(np.count_nonzero(may_contain_hashes(f, neg))) / max(negatives, 1)
    return rec


def write_csv(rows: Sequence, out) -> str:
    """Write dataclass rows with a header; ``out`` is a path, a stream, or None for a string."""
    if not rows:
        raise ValueError("nothing to write")
    names = [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
    text = buf.getvalue()
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text


def speedup(records: Sequence[BenchRecord], T: int) -> float:
    one = [r.total_seconds for r in records if r.threads == 1]
    many = [r.total_seconds for r in records if r.threads == T]
    if not one or not many:
        return math.nan
    return (sum(one) / len(one)) / (sum(many) / len(many))
