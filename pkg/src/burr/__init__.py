"""Bumped ribbon retrieval with thread-parallel construction."""

from .config import BuildConfig, ParallelOptions, Strategy, ThresholdMode
from .structure import (BaseLayer, ConstructionError, RetrievalStructure, build, construct, query,
                        query_hashes, query_many)

__all__ = [
    "BaseLayer", "BuildConfig", "ConstructionError", "ParallelOptions", "RetrievalStructure",
    "Strategy", "ThresholdMode", "build", "construct", "query", "query_hashes", "query_many",
]
