"""Binary structure file.

Layout (all integers little-endian, fixed width)::

    magic  b"BURR"            4 bytes
    version                   u16
    config block              r u8, w u8, b u16, overload f64, mode u8, layers u8,
                              base_slack f64, base_growth f64, max_base_attempts u16,
                              seed u64, two-bit values 4 x u16
    per bumping layer         num_buckets u64, layer_seed u32,
                              codes: length u64 + bytes,
                              exceptions: count u64 + count x (bucket u32, threshold u8),
                              table: length u64 + r-bit packed slots
    base layer                m u64, seed u32, table: length u64 + packed slots

Exceptions are written sorted by bucket. Nothing about how the structure was
built (thread count, cuts) is recorded.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from .bits import pack_bits, packed_size, unpack_bits
from .config import BuildConfig, ThresholdMode
from .layer import Layer
from .structure import BaseLayer, RetrievalStructure
from .thresholds import CODE_BITS, ThresholdStore

MAGIC = b"BURR"
VERSION = 1

_MODES = [ThresholdMode.UNCOMPRESSED, ThresholdMode.TWO_BIT, ThresholdMode.ONE_PLUS_BIT]
_CONFIG = struct.Struct("<BBHdBBddHQ4H")
_EXC = np.dtype([("bucket", "<u4"), ("t", "u1")])


class StructureFileError(ValueError):
    """Raised for malformed, truncated or foreign structure files."""


def dumps(structure: RetrievalStructure) -> bytes:
    cfg = structure.config
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", VERSION))
    tb = cfg.two_bit_values or (0, 0, 0, 0)
    out.write(_CONFIG.pack(cfg.r, cfg.w, cfg.b, cfg.overload, _MODES.index(cfg.mode), cfg.layers,
                           cfg.base_slack, cfg.base_growth, cfg.max_base_attempts, cfg.seed, *tb))
    for layer in structure.layers:
        out.write(struct.pack("<QI", layer.num_buckets, layer.layer_seed))
        _write_blob(out, layer.thresholds.codes.tobytes())
        buckets, ts = layer.thresholds.exception_arrays()
        exc = np.empty(buckets.shape[0], dtype=_EXC)
        exc["bucket"] = buckets
        exc["t"] = ts
        out.write(struct.pack("<Q", exc.shape[0]))
        out.write(exc.tobytes())
        _write_blob(out, pack_bits(layer.table, cfg.r).tobytes())
    out.write(struct.pack("<QI", structure.base.m, structure.base.seed))
    _write_blob(out, pack_bits(structure.base.table, cfg.r).tobytes())
    return out.getvalue()


def _write_blob(out, data: bytes):
    out.write(struct.pack("<Q", len(data)))
    out.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> memoryview:
        if n < 0 or self.pos + n > len(self.data):
            raise StructureFileError(f"truncated file while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str | struct.Struct, what: str):
        st = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        return st.unpack(self.take(st.size, what))

    def blob(self, expected: int, what: str) -> np.ndarray:
        (length,) = self.unpack("<Q", what + " length")
        if length != expected:
            raise StructureFileError(f"{what}: expected {expected} bytes, header says {length}")
        return np.frombuffer(self.take(length, what), dtype=np.uint8).copy()


def loads(data: bytes) -> RetrievalStructure:
    rd = _Reader(data)
    if bytes(rd.take(4, "magic")) != MAGIC:
        raise StructureFileError("not a BURR structure file (bad magic)")
    (version,) = rd.unpack("<H", "version")
    if version != VERSION:
        raise StructureFileError(f"unsupported format version {version}")
    r, w, b, overload, mode_idx, n_layers, slack, growth, attempts, seed, *tb = rd.unpack(_CONFIG, "config")
    if mode_idx >= len(_MODES):
        raise StructureFileError(f"unknown threshold mode {mode_idx}")
    mode = _MODES[mode_idx]
    try:
        cfg = BuildConfig(r=r, w=w, b=b, overload=overload, mode=mode, layers=n_layers, seed=seed,
                          base_slack=slack, base_growth=growth, max_base_attempts=attempts,
                          two_bit_values=tuple(tb) if mode is ThresholdMode.TWO_BIT else None)
    except ValueError as exc:
        raise StructureFileError(f"invalid config block: {exc}") from exc
    layers = []
    for i in range(n_layers):
        num_buckets, lseed = rd.unpack("<QI", f"layer {i} header")
        if num_buckets < 1:
            raise StructureFileError(f"layer {i} has no buckets")
        store = ThresholdStore(num_buckets, b, mode, cfg.two_bit_values)
        store.codes = rd.blob(packed_size(num_buckets, CODE_BITS[mode]), f"layer {i} threshold codes")
        (n_exc,) = rd.unpack("<Q", f"layer {i} exception count")
        exc = np.frombuffer(rd.take(n_exc * _EXC.itemsize, f"layer {i} exceptions"), dtype=_EXC)
        if mode is ThresholdMode.ONE_PLUS_BIT:
            flagged = np.flatnonzero(unpack_bits(store.codes, 1, num_buckets))
            if not np.array_equal(flagged, exc["bucket"]) or np.any(exc["t"] >= b):
                raise StructureFileError(f"layer {i}: exception table does not match threshold bits")
            store.exceptions = dict(zip(exc["bucket"].tolist(), exc["t"].tolist()))
        elif n_exc:
            raise StructureFileError(f"layer {i}: exceptions only exist in 1+-bit mode")
        if mode is ThresholdMode.UNCOMPRESSED and np.any(store.codes > b):
            raise StructureFileError(f"layer {i}: threshold above bucket size")
        m = num_buckets * b + w - 1
        table = unpack_bits(rd.blob(packed_size(m, r), f"layer {i} table"), r, m)
        layers.append(Layer(num_buckets=num_buckets, layer_seed=lseed, table=table, thresholds=store))
    m_base, bseed = rd.unpack("<QI", "base header")
    if m_base < w:
        raise StructureFileError("base layer smaller than the ribbon width")
    base_table = unpack_bits(rd.blob(packed_size(m_base, r), "base table"), r, m_base)
    if rd.pos != len(rd.data):
        raise StructureFileError(f"{len(rd.data) - rd.pos} trailing bytes after base layer")
    return RetrievalStructure(config=cfg, layers=layers, base=BaseLayer(m=m_base, seed=bseed, table=base_table))


def save(structure: RetrievalStructure, path: str | os.PathLike):
    with open(path, "wb") as fh:
        fh.write(dumps(structure))


def load(path: str | os.PathLike) -> RetrievalStructure:
    with open(path, "rb") as fh:
        return loads(fh.read())
