from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from burr import BuildConfig, ParallelOptions, Strategy
from burr.hashing import address_rows, coefficient_word, layer_hash, row_address
from burr.layer import construct_layer_sequential, layer_seed, size_layer
from burr.parallel import (construct_layer_parallel, cut_metrics, effective_threads,
                           forced_boundary_thresholds, plan_cuts)

from conftest import hashed_pairs
from oracles import evaluate


def test_effective_threads_examples():
    assert effective_threads(10, 4, 3) == 3
    assert effective_threads(round(10**6 / 134.4), 64, 1000) == 7
    for nb in (1, 5, 64, 1000):
        assert effective_threads(nb, 8, 1) == min(8, nb)
    assert effective_threads(5, 8, 1000) == 1


@given(nb=st.integers(1, 10**6), threads=st.integers(1, 128), m1=st.integers(1, 5000), m2=st.integers(1, 5000))
def test_effective_threads_monotone(nb, threads, m1, m2):
    lo, hi = sorted((m1, m2))
    assert effective_threads(nb, threads, hi) <= effective_threads(nb, threads, lo)
    assert effective_threads(nb, threads, lo) <= effective_threads(nb + 1, threads, lo)


def test_plan_cuts_examples():
    empty = np.zeros(0, np.int64)
    assert plan_cuts(empty, 10, 2) == [5]
    assert plan_cuts(empty, 10, 1) == []
    assert plan_cuts(empty, 10, 4, Strategy.NOSEARCH) == [3, 5, 8]


def _crowded_starts(nb, b, w, empty_bucket):
    """Two starts in every slot, except an empty ``w - 1`` window before ``empty_bucket``."""
    slots = np.arange(nb * b)
    beta = empty_bucket * b
    slots = slots[(slots < beta - (w - 1)) | (slots >= beta)]
    return np.repeat(slots, 2)


def test_minbump_finds_empty_window():
    b, w = 16, 16
    starts = _crowded_starts(10, b, w, 7)
    assert plan_cuts(starts, 10, 2, Strategy.NOSEARCH, 2, w, b) == [5]
    assert plan_cuts(starts, 10, 2, Strategy.MINBUMP, 2, w, b) == [7]
    assert plan_cuts(starts, 10, 2, Strategy.MINBUMP, 1, w, b) == [5]
    # brute-force agreement: 7 is the unique minimiser over all candidates
    counts = {c: cut_metrics(starts, c, w, b).directly_bumped for c in range(1, 10)}
    assert min(counts, key=counts.get) == 7 and counts[7] == 0


@settings(max_examples=60, deadline=None)
@given(data=st.data(), strategy=st.sampled_from([Strategy.MINBUMP, Strategy.MAXPREV, Strategy.DIFF]))
def test_search_matches_brute_force(data, strategy):
    b, w = 32, 16
    nb = data.draw(st.integers(8, 60))
    P = data.draw(st.integers(2, 4))
    rng_range = data.draw(st.integers(0, 6))
    starts = np.sort(np.array(data.draw(st.lists(st.integers(0, nb * b - 1), max_size=400)), dtype=np.int64))
    cuts = plan_cuts(starts, nb, P, strategy, rng_range, w, b, minbpt=1)
    assert cuts == plan_cuts(starts, nb, P, strategy, rng_range, w, b, minbpt=1)
    assert len(cuts) == P - 1 and all(0 < c < nb for c in cuts) and cuts == sorted(set(cuts))
    prev = 0
    for p, c in enumerate(cuts, start=1):
        target = round(p * nb / P + 1e-9)
        lo = max(target - rng_range, prev + 1)
        hi = min(target + rng_range, nb - (P - p))
        cands = list(range(lo, hi + 1)) or [c]

        def score(x):
            m = cut_metrics(starts, x, w, b)
            if strategy is Strategy.MINBUMP:
                return m.directly_bumped
            if strategy is Strategy.MAXPREV:
                return -m.prev_window
            return abs(m.directly_bumped - m.prev_window)
        best = min(cands, key=lambda x: (score(x), abs(x - target), x))
        assert c == best
        prev = c


def test_search_keeps_minbpt():
    starts = np.sort(np.random.default_rng(0).integers(0, 40 * 128, 4000))
    for strategy in Strategy:
        cuts = plan_cuts(starts, 40, 4, strategy, 50, 64, 128, minbpt=10)
        bounds = [0, *cuts, 40]
        assert all(hi - lo >= 10 for lo, hi in zip(bounds, bounds[1:]))


def test_cut_metrics_examples():
    assert cut_metrics(np.array([0, 5, 2000]), 5, 64, 128) == (0, 0)
    starts = np.arange(630, 640)
    assert cut_metrics(starts, 5, 64, 128).directly_bumped == 10
    both = np.concatenate([np.arange(520, 530), starts])
    assert cut_metrics(both, 5, 64, 128) == (10, 10)
    with pytest.raises(ValueError):
        cut_metrics(starts, 0, 64, 128)


def test_forced_threshold_examples():
    assert forced_boundary_thresholds([], 64, 128) == {}
    assert forced_boundary_thresholds([5], 64, 128) == {4: 65}
    assert forced_boundary_thresholds([1], 2, 128) == {0: 127}
    assert forced_boundary_thresholds([3, 9], 32, 64) == {2: 33, 8: 33}


def _cut_layer(n, threads, strategy=Strategy.NOSEARCH, seed=0, mode=None, layer_index=0):
    cfg = BuildConfig(seed=seed, **({"mode": mode} if mode else {}))
    h, v = hashed_pairs(n, seed=seed)
    opts = ParallelOptions(threads=threads, minbpt=20, strategy=strategy, search_range=10)
    with ThreadPoolExecutor(threads) as ex:
        res = construct_layer_parallel(h, v, cfg, layer_index, opts, ex, keep_system=True)
    return cfg, h, v, res


@pytest.mark.parametrize("threads", [2, 4, 8])
@pytest.mark.parametrize("strategy", list(Strategy))
def test_boundary_independence(threads, strategy):
    cfg, h, v, res = _cut_layer(100_000, threads, strategy, seed=threads)
    cuts = res.stats.cuts
    assert len(cuts) == threads - 1
    coeff = res.system_coeff
    rows = np.flatnonzero(coeff)
    for c in cuts:
        beta = c * cfg.b
        before = rows[(rows < beta) & (rows >= beta - cfg.w)]
        for p in before.tolist():
            top = int(coeff[p]).bit_length() - 1
            assert p + top < beta


@pytest.mark.parametrize("threads", [2, 4, 8])
def test_parallel_layer_post_hoc(threads):
    cfg, h, v, res = _cut_layer(100_000, threads, seed=20 + threads)
    layer = res.layer
    boundaries = [c * cfg.b for c in res.stats.cuts]
    kept = np.zeros(len(h), bool)
    kept[res.kept_index] = True
    for i in range(0, len(h), 7):
        hl = layer_hash(int(h[i]), 0, layer.layer_seed)
        start, bucket, offset = row_address(hl, layer.num_buckets, cfg.b)
        crosses = any(start < beta <= start + cfg.w - 1 for beta in boundaries)
        if kept[i]:
            assert not crosses
            assert evaluate(layer.table, start, coefficient_word(hl, cfg.w)) == v[i]
        else:
            assert offset >= layer.thresholds.lookup_threshold(bucket)
    # every key whose window reaches a boundary was bumped
    _, starts, _ = address_rows(h, 0, layer.layer_seed, layer.num_buckets * cfg.b, cfg.w)
    for beta in boundaries:
        near = (starts < beta) & (starts + cfg.w - 1 >= beta)
        assert near.any() and not kept[near].any()


def test_forced_cut_no_kept_window_crosses():
    cfg = BuildConfig(seed=5)
    h, v = hashed_pairs(2_000, seed=5)
    res = construct_layer_sequential(h, v, cfg, 0, forced=forced_boundary_thresholds([5], cfg.w, cfg.b))
    _, starts, _ = address_rows(h, 0, res.layer.layer_seed, res.layer.num_buckets * cfg.b, cfg.w)
    kept = starts[res.kept_index]
    assert not ((kept < 640) & (kept + cfg.w - 1 >= 640)).any()


@pytest.mark.parametrize("mode", ["uncompressed", "2bit", "1plus"])
def test_one_thread_matches_sequential(mode):
    cfg, h, v, par = _cut_layer(20_000, 1, mode=mode, seed=8)
    seq = construct_layer_sequential(h, v, cfg, 0)
    assert np.array_equal(par.layer.table, seq.layer.table)
    assert par.layer.thresholds == seq.layer.thresholds
    assert np.array_equal(par.bumped_hashes, seq.bumped_hashes)
    assert np.array_equal(par.bumped_values, seq.bumped_values)


def test_parallel_layer_deterministic():
    a = _cut_layer(50_000, 4, Strategy.DIFF, seed=3)[3]
    b = _cut_layer(50_000, 4, Strategy.DIFF, seed=3)[3]
    assert a.stats.cuts == b.stats.cuts
    assert np.array_equal(a.layer.table, b.layer.table)
    assert np.array_equal(a.bumped_hashes, b.bumped_hashes)


def test_layer_seed_distinct():
    seeds = {layer_seed(s, i) for s in range(4) for i in range(5)}
    assert len(seeds) == 20
    assert size_layer(10**6, BuildConfig()) == 7440
