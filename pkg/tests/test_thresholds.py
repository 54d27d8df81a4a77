import numpy as np
import pytest
from hypothesis import given, strategies as st

from burr.config import ThresholdMode, default_two_bit_values
from burr.thresholds import EXCEPTION_ENTRY_BYTES, ThresholdStore, is_bumped, quantize

B = 128
VALUES = default_two_bit_values(128, 64)
MODES = list(ThresholdMode)


def test_default_two_bit_values():
    assert VALUES == (0, 64, 112, 128)
    assert default_two_bit_values(64, 64) == (0, 32, 48, 64)


@pytest.mark.parametrize("t,expected", [(128, 128), (100, 64), (0, 0), (65, 64), (112, 112)])
def test_quantize_two_bit(t, expected):
    assert quantize(t, ThresholdMode.TWO_BIT, VALUES) == expected


@given(st.integers(0, B))
def test_quantize_exact_modes(t):
    assert quantize(t, ThresholdMode.UNCOMPRESSED) == t
    assert quantize(t, ThresholdMode.ONE_PLUS_BIT) == t


@given(st.integers(0, B), st.integers(0, B))
def test_quantize_properties(t, u):
    q = quantize(t, ThresholdMode.TWO_BIT, VALUES)
    assert q <= t
    assert quantize(q, ThresholdMode.TWO_BIT, VALUES) == q
    if t <= u:
        assert q <= quantize(u, ThresholdMode.TWO_BIT, VALUES)
    bumped_exact = {o for o in range(B) if is_bumped(o, t)}
    bumped_q = {o for o in range(B) if is_bumped(o, q)}
    assert bumped_exact <= bumped_q


def test_is_bumped():
    assert is_bumped(70, 64)
    assert not any(is_bumped(o, B) for o in range(B))
    assert is_bumped(0, 0)


def test_set_threshold_one_plus():
    s = ThresholdStore(10, B, ThresholdMode.ONE_PLUS_BIT)
    s.set_threshold(3, B)
    assert s.exceptions == {} and s.lookup_threshold(3) == B
    s.set_threshold(4, 65)
    assert s.exceptions == {4: 65} and s.lookup_threshold(4) == 65
    assert s.codes[0] >> 4 & 1 == 1
    s.set_threshold(4, B)
    assert s.exceptions == {} and s.lookup_threshold(4) == B


def test_set_threshold_uncompressed_and_two_bit():
    s = ThresholdStore(10, B, ThresholdMode.UNCOMPRESSED)
    s.set_threshold(2, 7)
    assert s.lookup_threshold(2) == 7
    s = ThresholdStore(10, B, ThresholdMode.TWO_BIT, VALUES)
    s.set_threshold(9, 64)
    assert s.lookup_threshold(9) == 64
    with pytest.raises(ValueError):
        s.set_threshold(1, 65)


@pytest.mark.parametrize("mode", MODES)
def test_never_set_bucket_bumps_nothing(mode):
    s = ThresholdStore(33, B, mode, VALUES)
    assert all(s.lookup_threshold(i) == B for i in range(33))
    assert np.all(s.decode() == B)


@pytest.mark.parametrize("mode", MODES)
def test_randomized_round_trip(mode, rng):
    nb = 997
    s = ThresholdStore(nb, B, mode, VALUES)
    expect = np.full(nb, B)
    for _ in range(10_000):
        bucket = int(rng.integers(0, nb))
        t = quantize(int(rng.integers(0, B + 1)), mode, VALUES)
        s.set_threshold(bucket, t)
        expect[bucket] = t
    assert [s.lookup_threshold(i) for i in range(nb)] == expect.tolist()
    assert np.array_equal(s.decode(), expect)
    assert ThresholdStore.from_thresholds(expect, B, mode, VALUES) == s


def test_from_thresholds_rejects_unrepresentable():
    with pytest.raises(ValueError):
        ThresholdStore.from_thresholds(np.array([65]), B, ThresholdMode.TWO_BIT, VALUES)


def test_threshold_bytes():
    assert ThresholdStore(1000, B, ThresholdMode.TWO_BIT, VALUES).threshold_bytes() == 250
    s = ThresholdStore(1024, B, ThresholdMode.ONE_PLUS_BIT)
    for bucket in (1, 50, 900):
        s.set_threshold(bucket, 65)
    assert EXCEPTION_ENTRY_BYTES == 5
    assert s.threshold_bytes() == 143
    assert ThresholdStore(10, B, ThresholdMode.UNCOMPRESSED).threshold_bytes() == 10
