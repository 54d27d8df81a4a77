"""Incremental banded Gaussian elimination over GF(2) with r-bit right-hand sides.

The system keeps at most one row per slot. A row stored at slot ``s`` has
bit 0 of its coefficient word set and covers slots ``s .. s + w - 1``. Slot
emptiness is encoded as a zero coefficient word.
"""

from __future__ import annotations

from typing import NamedTuple

import numba as nb
import numpy as np

REDUNDANT = -1
FAILURE = -2

_u64 = np.uint64


class Row(NamedTuple):
    start: int
    coeff: int
    rhs: int


@nb.njit(inline="always")
def insert_nb(sys_coeff, sys_rhs, start, coeff, rhs):
    """Insert one row; returns the pivot slot, REDUNDANT or FAILURE."""
    s = start
    c = coeff
    v = np.int64(rhs)
    while True:
        cur = sys_coeff[s]
        if cur == 0:
            sys_coeff[s] = c
            sys_rhs[s] = v
            return s
        c ^= cur
        v ^= np.int64(sys_rhs[s])
        if c == 0:
            return REDUNDANT if v == 0 else FAILURE
        while (c & _u64(1)) == 0:
            c >>= _u64(1)
            s += 1


@nb.njit(nogil=True, cache=True)
def _insert_one(sys_coeff, sys_rhs, start, coeff, rhs):
    return insert_nb(sys_coeff, sys_rhs, start, coeff, rhs)


@nb.njit(nogil=True, cache=True)
def insert_all(sys_coeff, sys_rhs, order, starts, coeffs, rhs):
    """Insert rows in ``order``; index into ``order`` of the first failure, else -1."""
    for k in range(order.shape[0]):
        i = order[k]
        if insert_nb(sys_coeff, sys_rhs, starts[i], coeffs[i], rhs[i]) == FAILURE:
            return k
    return -1


@nb.njit(nogil=True, cache=True)
def back_substitute_nb(sys_coeff, sys_rhs, lo, hi, table):
    for s in range(hi - 1, lo - 1, -1):
        c = sys_coeff[s]
        if c == 0:
            table[s] = 0
            continue
        acc = sys_rhs[s]
        c >>= _u64(1)
        j = s + 1
        while c != 0:
            if c & _u64(1):
                if j >= hi:
                    raise ValueError("stored row reaches past the end of the back-substitution range")
                acc ^= table[j]
            c >>= _u64(1)
            j += 1
        table[s] = acc


@nb.njit(inline="always")
def dot_nb(table, start, coeff):
    acc = table[start]
    c = coeff >> _u64(1)
    j = start + 1
    while c != 0:
        if c & _u64(1):
            acc ^= table[j]
        c >>= _u64(1)
        j += 1
    return acc


@nb.njit(nogil=True, cache=True)
def _dot_one(table, start, coeff):
    return dot_nb(table, start, coeff)


class BucketJournal:
    """Rows of the bucket in progress, in insertion order, as (offset, pivot)."""

    def __init__(self):
        self.entries: list[tuple[int, int]] = []

    def append(self, offset: int, pivot: int):
        if self.entries and offset < self.entries[-1][0]:
            raise ValueError("journal offsets must be non-decreasing")
        self.entries.append((offset, pivot))

    def clear(self):
        self.entries.clear()

    def __len__(self):
        return len(self.entries)


class BandedSystem:
    """Slot-indexed storage: a coefficient word and an r-bit rhs per slot."""

    def __init__(self, m: int, r: int = 8, w: int = 64):
        self.m = int(m)
        self.r = r
        self.w = w
        self.coeff = np.zeros(self.m, dtype=np.uint64)
        self.rhs = np.zeros(self.m, dtype=np.uint16)

    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.coeff)

    def snapshot(self) -> dict[int, tuple[int, int]]:
        return {int(s): (int(self.coeff[s]), int(self.rhs[s])) for s in self.occupied()}


def insert_row(system: BandedSystem, row: Row, journal: BucketJournal | None = None, offset: int = 0) -> int:
    """Eliminate ``row`` against the stored rows.

    Returns the pivot slot where the reduced row was stored, ``REDUNDANT`` if
    the row is implied by the stored ones, or ``FAILURE`` if it contradicts
    them (the caller has to bump). Stored rows are never modified.
    """
    start, coeff, rhs = int(row.start), int(row.coeff), int(row.rhs)
    if not coeff & 1:
        raise ValueError("coefficient bit 0 must be set")
    if start < 0 or start + coeff.bit_length() > system.m:
        raise ValueError("row window does not fit the system")
    if rhs >> system.r:
        raise ValueError(f"rhs does not fit in {system.r} bits")
    result = _insert_one(system.coeff, system.rhs, np.int64(start), np.uint64(coeff), np.int64(rhs))
    if result >= 0 and journal is not None:
        journal.append(offset, result)
    return int(result)


def uninstall_from(system: BandedSystem, journal: BucketJournal, threshold: int) -> int:
    """Clear every journaled row whose offset is ``>= threshold``.

    Only valid for the bucket currently in progress: its rows were the last
    ones stored, so nothing that survives was reduced by them.
    """
    removed = 0
    while journal.entries and journal.entries[-1][0] >= threshold:
        _, pivot = journal.entries.pop()
        system.coeff[pivot] = 0
        system.rhs[pivot] = 0
        removed += 1
    return removed


def back_substitute(system: BandedSystem, lo: int = 0, hi: int | None = None,
                    table: np.ndarray | None = None) -> np.ndarray:
    """Solve slots ``[lo, hi)`` right to left; empty slots get 0."""
    hi = system.m if hi is None else hi
    if table is None:
        table = np.zeros(system.m, dtype=np.uint16)
    if hi > lo:
        back_substitute_nb(system.coeff, system.rhs, np.int64(lo), np.int64(hi), table)
    return table


def query_dot(table: np.ndarray, start: int, coeff: int) -> int:
    """XOR of ``table[start + j]`` over the set bits ``j`` of ``coeff``."""
    if start < 0 or start + int(coeff).bit_length() > table.shape[0]:
        raise ValueError("window does not fit the table")
    return int(_dot_one(table, np.int64(start), np.uint64(coeff)))
