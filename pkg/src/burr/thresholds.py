"""Per-bucket bump thresholds and their three storage encodings.

A key whose intra-bucket offset is ``>= t`` is bumped to the next layer, so
``t == b`` bumps nothing and ``t == 0`` bumps the whole bucket.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from .bits import pack_bits, packed_size, unpack_bits
from .config import ThresholdMode

EXCEPTION_ENTRY_BYTES = 5  # 4-byte bucket index + 1-byte threshold

MODE_CODES = {
    ThresholdMode.UNCOMPRESSED: 0,
    ThresholdMode.TWO_BIT: 1,
    ThresholdMode.ONE_PLUS_BIT: 2,
}
CODE_BITS = {
    ThresholdMode.UNCOMPRESSED: 8,
    ThresholdMode.TWO_BIT: 2,
    ThresholdMode.ONE_PLUS_BIT: 1,
}


@nb.njit(inline="always")
def quantize_nb(t, mode_code, values):
    if mode_code != 1:
        return t
    best = values[0]
    for v in values:
        if v <= t:
            best = v
    return best


@nb.njit(inline="always")
def lookup_nb(mode_code, codes, exc_buckets, exc_thresholds, values, b, bucket):
    if mode_code == 0:
        return np.int64(codes[bucket])
    if mode_code == 1:
        byte = codes[bucket >> 2]
        return np.int64(values[(byte >> ((bucket & 3) * 2)) & 3])
    if (codes[bucket >> 3] >> (bucket & 7)) & 1 == 0:
        return np.int64(b)
    lo = 0
    hi = exc_buckets.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if exc_buckets[mid] < bucket:
            lo = mid + 1
        else:
            hi = mid
    return np.int64(exc_thresholds[lo])


def quantize(t_required: int, mode: ThresholdMode, values=None) -> int:
    """Largest representable threshold not above ``t_required``.

    Rounding down only ever bumps more keys, never fewer.
    """
    mode = ThresholdMode(mode)
    if mode is not ThresholdMode.TWO_BIT:
        return int(t_required)
    if values is None:
        raise ValueError("2-bit quantization needs the four allowed values")
    return max(v for v in values if v <= t_required)


def is_bumped(offset: int, t: int) -> bool:
    return offset >= t


class ThresholdStore:
    """Thresholds of one layer, packed ``code_bits`` per bucket.

    For the 1+-bit mode a set bit means "something was bumped" and the exact
    threshold lives in ``exceptions``.
    """

    def __init__(self, num_buckets: int, b: int, mode: ThresholdMode, values=None):
        self.num_buckets = int(num_buckets)
        self.b = int(b)
        self.mode = ThresholdMode(mode)
        if self.mode is ThresholdMode.TWO_BIT:
            if values is None or len(values) != 4 or values[0] != 0 or values[-1] != b:
                raise ValueError("2-bit mode needs values (0, t1, t2, b)")
            self.values = tuple(int(v) for v in values)
        else:
            self.values = (self.b,)
        self.exceptions: dict[int, int] = {}
        self.codes = np.zeros(packed_size(self.num_buckets, self.code_bits), dtype=np.uint8)
        default = {ThresholdMode.UNCOMPRESSED: self.b, ThresholdMode.TWO_BIT: 3,
                   ThresholdMode.ONE_PLUS_BIT: 0}[self.mode]
        if default:
            self.codes[:] = pack_bits(np.full(self.num_buckets, default), self.code_bits)

    @property
    def code_bits(self) -> int:
        return CODE_BITS[self.mode]

    @classmethod
    def from_thresholds(cls, thresholds: np.ndarray, b: int, mode: ThresholdMode, values=None):
        """Encode a full per-bucket threshold array (already quantized)."""
        thresholds = np.asarray(thresholds, dtype=np.int64)
        store = cls(thresholds.shape[0], b, mode, values)
        if store.mode is ThresholdMode.UNCOMPRESSED:
            codes = thresholds
        elif store.mode is ThresholdMode.TWO_BIT:
            vals = np.asarray(store.values)
            codes = np.searchsorted(vals, thresholds)
            if np.any(codes > 3) or np.any(vals[np.minimum(codes, 3)] != thresholds):
                raise ValueError("threshold not representable in 2-bit mode")
        else:
            bumped = np.flatnonzero(thresholds < b)
            store.exceptions = dict(zip(bumped.tolist(), thresholds[bumped].tolist()))
            codes = (thresholds < b).astype(np.int64)
        store.codes = pack_bits(codes, store.code_bits)
        return store

    def _write_code(self, bucket: int, code: int):
        bits = self.code_bits
        byte, shift = divmod(bucket * bits, 8)
        mask = ((1 << bits) - 1) << shift
        self.codes[byte] = (int(self.codes[byte]) & ~mask & 0xFF) | (code << shift)

    def set_threshold(self, bucket: int, t: int):
        if not 0 <= bucket < self.num_buckets:
            raise IndexError(bucket)
        if not 0 <= t <= self.b:
            raise ValueError(f"threshold {t} outside [0, {self.b}]")
        if self.mode is ThresholdMode.UNCOMPRESSED:
            self._write_code(bucket, t)
        elif self.mode is ThresholdMode.TWO_BIT:
            if t not in self.values:
                raise ValueError(f"threshold {t} is not one of {self.values}")
            self._write_code(bucket, self.values.index(t))
        elif t == self.b:
            self._write_code(bucket, 0)
            self.exceptions.pop(bucket, None)
        else:
            self._write_code(bucket, 1)
            self.exceptions[bucket] = t

    def lookup_threshold(self, bucket: int) -> int:
        if not 0 <= bucket < self.num_buckets:
            raise IndexError(bucket)
        bits = self.code_bits
        byte, shift = divmod(bucket * bits, 8)
        code = (int(self.codes[byte]) >> shift) & ((1 << bits) - 1)
        if self.mode is ThresholdMode.UNCOMPRESSED:
            return code
        if self.mode is ThresholdMode.TWO_BIT:
            return self.values[code]
        return self.exceptions[bucket] if code else self.b

    def decode(self) -> np.ndarray:
        """All thresholds as an int64 array."""
        codes = unpack_bits(self.codes, self.code_bits, self.num_buckets, dtype=np.int64)
        if self.mode is ThresholdMode.UNCOMPRESSED:
            return codes
        if self.mode is ThresholdMode.TWO_BIT:
            return np.asarray(self.values, dtype=np.int64)[codes]
        out = np.full(self.num_buckets, self.b, dtype=np.int64)
        for bucket, t in self.exceptions.items():
            out[bucket] = t
        return out

    def exception_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exception table as bucket-sorted ``(uint32 buckets, uint8 thresholds)``."""
        items = sorted(self.exceptions.items())
        buckets = np.array([k for k, _ in items], dtype=np.uint32)
        ts = np.array([v for _, v in items], dtype=np.uint8)
        return buckets, ts

    def threshold_bytes(self) -> int:
        return packed_size(self.num_buckets, self.code_bits) + len(self.exceptions) * EXCEPTION_ENTRY_BYTES

    def __eq__(self, other):
        if not isinstance(other, ThresholdStore):
            return NotImplemented
        return (self.mode is other.mode and self.b == other.b and self.values == other.values
                and self.num_buckets == other.num_buckets and self.exceptions == other.exceptions
                and np.array_equal(self.codes, other.codes))

    def __repr__(self):
        return (f"ThresholdStore(mode={self.mode.value}, buckets={self.num_buckets}, "
                f"exceptions={len(self.exceptions)})")
