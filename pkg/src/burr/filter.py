"""Approximate membership filter: a retrieval structure over r-bit fingerprints."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import BuildConfig, ParallelOptions
from .hashing import fingerprint, fingerprints, hash_keys, master_hash
from .structure import RetrievalStructure, construct, query_hashes


@dataclass(eq=False)
class RibbonFilter:
    structure: RetrievalStructure

    @property
    def r(self) -> int:
        return self.structure.config.r

    def __contains__(self, key: bytes) -> bool:
        return may_contain(self, key)


def build_filter_from_hashes(hashes: np.ndarray, config: BuildConfig,
                             options: ParallelOptions | None = None) -> RibbonFilter:
    return RibbonFilter(construct(hashes, fingerprints(hashes, config.r), config, options))


def build_filter(keys: Sequence[bytes] | np.ndarray, r: int = 8, config: BuildConfig | None = None,
                 options: ParallelOptions | None = None) -> RibbonFilter:
    """Filter over ``keys``; duplicates are fine (they store identical fingerprints)."""
    config = replace(config or BuildConfig(), r=r)
    return build_filter_from_hashes(hash_keys(keys, config.seed), config, options)


def may_contain_hashes(f: RibbonFilter, hashes: np.ndarray) -> np.ndarray:
    return query_hashes(f.structure, hashes) == fingerprints(hashes, f.r)


def may_contain_many(f: RibbonFilter, keys: Sequence[bytes] | np.ndarray) -> np.ndarray:
    return may_contain_hashes(f, hash_keys(keys, f.structure.config.seed))


def may_contain(f: RibbonFilter, key: bytes) -> bool:
    """False means ``key`` was certainly not in the build set."""
    h = master_hash(key, f.structure.config.seed)
    return int(query_hashes(f.structure, np.array([h], dtype=np.uint64))[0]) == fingerprint(h, f.r)
