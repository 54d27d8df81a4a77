"""Seeded key hashing and the per-layer split into start slot, coefficients, fingerprint.

Every scalar function here has a numba twin used by the batch kernels; the
two are kept bit-identical and cross-checked in the tests.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numba as nb
import numpy as np

M64 = (1 << 64) - 1
M32 = (1 << 32) - 1

_C1 = 0x87C37B91114253D5
_C2 = 0x4CF5AD432745937F
_GOLDEN = 0x9E3779B97F4A7C15
_LEN_MUL = 0xC2B2AE3D27D4EB4F
_COEFF_SALT = 0xD6E8FEB86659FD93
_FP_SALT = 0xA0761D6478BD642F


class RowAddress(NamedTuple):
    start: int
    bucket: int
    offset: int


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & M64


def fmix64(k: int) -> int:
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & M64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & M64
    k ^= k >> 33
    return k


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def master_hash(key: bytes, seed: int) -> int:
    """64-bit keyed hash of a byte string (murmur-style word absorption)."""
    key = bytes(key)
    n = len(key)
    h = fmix64(seed ^ _GOLDEN) ^ ((n * _LEN_MUL) & M64)
    for pos in range(0, n, 8):
        word = int.from_bytes(key[pos:pos + 8], "little")
        k = _rotl((word * _C1) & M64, 31)
        k = (k * _C2) & M64
        h = _rotl(h ^ k, 27)
        h = (h * 5 + 0x52DCE729) & M64
    return fmix64(h ^ n)


def layer_hash(h: int, layer: int, layer_seed: int) -> int:
    if layer < 0:
        raise ValueError("layer must be non-negative")
    salt = fmix64((((layer_seed & M32) << 32) | (layer & M32)) + _GOLDEN & M64)
    return fmix64(h ^ salt)


def row_address(h: int, num_buckets: int, b: int) -> RowAddress:
    start = (h * (num_buckets * b)) >> 64
    return RowAddress(start, start // b, start % b)


def coefficient_word(h: int, w: int) -> int:
    c = fmix64(h ^ _COEFF_SALT)
    if w < 64:
        c &= (1 << w) - 1
    return c | 1


def fingerprint(h: int, r: int) -> int:
    if not 1 <= r <= 16:
        raise ValueError("r must be in [1, 16]")
    return fmix64(h ^ _FP_SALT) >> (64 - r)


# -- numba twins ---------------------------------------------------------

_u64 = np.uint64


@nb.njit(inline="always")
def _rotl_nb(x, k):
    return (x << _u64(k)) | (x >> _u64(64 - k))


@nb.njit(inline="always")
def fmix64_nb(k):
    k ^= k >> _u64(33)
    k *= _u64(0xFF51AFD7ED558CCD)
    k ^= k >> _u64(33)
    k *= _u64(0xC4CEB9FE1A85EC53)
    k ^= k >> _u64(33)
    return k


@nb.njit(inline="always")
def splitmix64_nb(x):
    z = x + _u64(_GOLDEN)
    z = (z ^ (z >> _u64(30))) * _u64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _u64(27))) * _u64(0x94D049BB133111EB)
    return z ^ (z >> _u64(31))


@nb.njit(inline="always")
def _absorb(h, word):
    k = _rotl_nb(word * _u64(_C1), 31) * _u64(_C2)
    h = _rotl_nb(h ^ k, 27)
    return h * _u64(5) + _u64(0x52DCE729)


@nb.njit(inline="always")
def _seed_state(seed, n):
    return fmix64_nb(seed ^ _u64(_GOLDEN)) ^ (_u64(n) * _u64(_LEN_MUL))


@nb.njit(nogil=True, cache=True)
def _hash_flat(buf, offsets, seed, out):
    for i in range(out.shape[0]):
        lo = offsets[i]
        hi = offsets[i + 1]
        n = hi - lo
        h = _seed_state(seed, n)
        pos = lo
        while pos < hi:
            word = _u64(0)
            end = min(pos + 8, hi)
            for j in range(pos, end):
                word |= _u64(buf[j]) << _u64(8 * (j - pos))
            h = _absorb(h, word)
            pos += 8
        out[i] = fmix64_nb(h ^ _u64(n))


@nb.njit(nogil=True, cache=True)
def _hash_words8(words, seed, out):
    base = _seed_state(seed, 8)
    for i in range(words.shape[0]):
        out[i] = fmix64_nb(_absorb(base, words[i]) ^ _u64(8))


@nb.njit(inline="always")
def layer_salt_nb(layer, layer_seed):
    return fmix64_nb(((_u64(layer_seed) << _u64(32)) | _u64(layer)) + _u64(_GOLDEN))


@nb.njit(inline="always")
def mulhi64_nb(a, b):
    lo32 = _u64(0xFFFFFFFF)
    a_lo = a & lo32
    a_hi = a >> _u64(32)
    b_lo = b & lo32
    b_hi = b >> _u64(32)
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _u64(32)) + (p1 & lo32) + (p2 & lo32)
    return p3 + (p1 >> _u64(32)) + (p2 >> _u64(32)) + (mid >> _u64(32))


@nb.njit(inline="always")
def coefficient_word_nb(h, mask):
    return (fmix64_nb(h ^ _u64(_COEFF_SALT)) & mask) | _u64(1)


@nb.njit(inline="always")
def fingerprint_nb(h, r):
    return fmix64_nb(h ^ _u64(_FP_SALT)) >> _u64(64 - r)


def coeff_mask(w: int) -> np.uint64:
    return np.uint64(M64 if w == 64 else (1 << w) - 1)


@nb.njit(nogil=True, cache=True)
def _address_rows(hashes, salt, s_range, mask, layer_h, starts, coeffs):
    for i in range(hashes.shape[0]):
        hi = fmix64_nb(hashes[i] ^ salt)
        layer_h[i] = hi
        starts[i] = np.int64(mulhi64_nb(hi, s_range))
        coeffs[i] = coefficient_word_nb(hi, mask)


@nb.njit(nogil=True, cache=True)
def _fingerprints(hashes, r, out):
    for i in range(hashes.shape[0]):
        out[i] = fingerprint_nb(hashes[i], r)


# -- batch front ends ----------------------------------------------------

def _as_word_keys(keys: np.ndarray) -> np.ndarray | None:
    if keys.dtype == np.uint64 and keys.ndim == 1:
        return keys
    if keys.dtype == np.uint8 and keys.ndim == 2 and keys.shape[1] == 8:
        return np.ascontiguousarray(keys).view("<u8").reshape(-1).astype(np.uint64)
    return None


def hash_keys(keys: Sequence[bytes] | np.ndarray, seed: int) -> np.ndarray:
    """Master hashes for many keys at once.

    ``keys`` is either a sequence of byte strings or a ``uint64`` array whose
    elements stand for their 8-byte little-endian encodings.
    """
    seed = np.uint64(seed)
    if isinstance(keys, np.ndarray):
        words = _as_word_keys(keys)
        if words is None:
            raise TypeError("array keys must be uint64 or an (n, 8) uint8 array")
        out = np.empty(words.shape[0], dtype=np.uint64)
        _hash_words8(words, seed, out)
        return out
    keys = [bytes(k) for k in keys]
    lengths = np.fromiter((len(k) for k in keys), dtype=np.int64, count=len(keys))
    offsets = np.zeros(len(keys) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    buf = np.frombuffer(b"".join(keys), dtype=np.uint8) if keys else np.zeros(0, np.uint8)
    out = np.empty(len(keys), dtype=np.uint64)
    _hash_flat(buf, offsets, seed, out)
    return out


def key_bytes(words: np.ndarray) -> list[bytes]:
    """Render ``uint64`` synthetic keys as the byte strings they stand for."""
    return [int(x).to_bytes(8, "little") for x in words]


def address_rows(hashes: np.ndarray, layer: int, layer_seed: int, s_range: int, w: int):
    """Layer hash, start slot and coefficient word for every master hash."""
    n = hashes.shape[0]
    layer_h = np.empty(n, dtype=np.uint64)
    starts = np.empty(n, dtype=np.int64)
    coeffs = np.empty(n, dtype=np.uint64)
    salt = np.uint64(fmix64((((layer_seed & M32) << 32) | (layer & M32)) + _GOLDEN & M64))
    _address_rows(hashes, salt, np.uint64(s_range), coeff_mask(w), layer_h, starts, coeffs)
    return layer_h, starts, coeffs


def fingerprints(hashes: np.ndarray, r: int) -> np.ndarray:
    out = np.empty(hashes.shape[0], dtype=np.uint64)
    _fingerprints(hashes, np.uint64(r), out)
    return out.astype(np.uint16)
