"""Little-endian packing of fixed-width unsigned codes into bytes."""

import numpy as np

_CHUNK = 1 << 20  # values per chunk; a multiple of 8 keeps chunks byte aligned


def packed_size(count: int, width: int) -> int:
    return (count * width + 7) // 8


def pack_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Pack ``width`` low bits of each value, value 0 in the lowest bits."""
    values = np.asarray(values)
    if width == 8:
        return values.astype(np.uint8)
    if width == 16:
        return values.astype("<u2").view(np.uint8).copy()
    shifts = np.arange(width, dtype=np.uint32)
    parts = []
    for lo in range(0, values.shape[0], _CHUNK):
        chunk = values[lo:lo + _CHUNK].astype(np.uint32)
        bits = ((chunk[:, None] >> shifts) & 1).astype(np.uint8)
        parts.append(np.packbits(bits.reshape(-1), bitorder="little"))
    if not parts:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(parts)


def unpack_bits(buf: np.ndarray, width: int, count: int, dtype=np.uint16) -> np.ndarray:
    buf = np.asarray(buf, dtype=np.uint8)
    if buf.shape[0] != packed_size(count, width):
        raise ValueError(f"expected {packed_size(count, width)} packed bytes, got {buf.shape[0]}")
    if width == 8:
        return buf.astype(dtype)
    if width == 16:
        return buf.view("<u2").astype(dtype)
    weights = (1 << np.arange(width, dtype=np.uint32)).astype(np.uint32)
    out = np.empty(count, dtype=dtype)
    step = _CHUNK * width // 8
    for i, lo in enumerate(range(0, count, _CHUNK)):
        n = min(_CHUNK, count - lo)
        bits = np.unpackbits(buf[i * step:i * step + packed_size(n, width)], bitorder="little")
        bits = bits[: n * width].reshape(n, width).astype(np.uint32)
        out[lo:lo + n] = bits @ weights
    return out
