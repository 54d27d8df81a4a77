"""Tunables for building a bumped ribbon retrieval structure."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ThresholdMode(str, enum.Enum):
    UNCOMPRESSED = "uncompressed"
    TWO_BIT = "2bit"
    ONE_PLUS_BIT = "1plus"


class Strategy(str, enum.Enum):
    NOSEARCH = "nosearch"
    MINBUMP = "minbump"
    MAXPREV = "maxprev"
    DIFF = "diff"


RIBBON_WIDTHS = (16, 32, 64)


def default_two_bit_values(b: int, w: int) -> tuple[int, int, int, int]:
    """Four allowed thresholds ``(0, b - w, b - w/4, b)``.

    Falls back to quarters of the bucket when ``b == w`` would make the
    first two values collide.
    """
    values = (0, b - w, b - w // 4, b)
    if not all(x < y for x, y in zip(values, values[1:])):
        values = (0, b // 2, b - b // 4, b)
    return values


@dataclass(frozen=True)
class BuildConfig:
    r: int = 8
    w: int = 64
    b: int = 128
    overload: float = 0.05
    mode: ThresholdMode = ThresholdMode.ONE_PLUS_BIT
    layers: int = 4
    seed: int = 0
    base_slack: float = 0.10
    base_growth: float = 1.25
    max_base_attempts: int = 8
    two_bit_values: tuple[int, int, int, int] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "mode", ThresholdMode(self.mode))
        if not 1 <= self.r <= 16:
            raise ValueError(f"r must be in [1, 16], got {self.r}")
        if self.w not in RIBBON_WIDTHS:
            raise ValueError(f"w must be one of {RIBBON_WIDTHS}, got {self.w}")
        if not self.w <= self.b <= 255:
            raise ValueError(f"bucket size must satisfy w <= b <= 255, got {self.b}")
        if self.layers < 1:
            raise ValueError("at least one bumping layer is required")
        if self.overload < 0:
            raise ValueError("overload must be non-negative")
        if self.base_growth <= 1.0 or self.max_base_attempts < 1:
            raise ValueError("base layer needs growth > 1 and at least one attempt")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode is ThresholdMode.TWO_BIT:
            if self.two_bit_values is None:
                object.__setattr__(self, "two_bit_values", default_two_bit_values(self.b, self.w))
            v = tuple(int(x) for x in self.two_bit_values)
            if len(v) != 4 or v[0] != 0 or v[3] != self.b or not all(x < y for x, y in zip(v, v[1:])):
                raise ValueError(f"2-bit values must be strictly increasing from 0 to b, got {v}")
            object.__setattr__(self, "two_bit_values", v)

    @property
    def threshold_values(self) -> tuple[int, ...]:
        """Allowed thresholds for the 2-bit encoding, ``(b,)`` otherwise."""
        return self.two_bit_values if self.mode is ThresholdMode.TWO_BIT else (self.b,)


@dataclass(frozen=True)
class ParallelOptions:
    """How construction is split across threads. Never stored with the structure."""

    threads: int = 1
    minbpt: int = 1000
    strategy: Strategy = Strategy.NOSEARCH
    search_range: int = 50

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.threads < 1 or self.minbpt < 1 or self.search_range < 0:
            raise ValueError("threads and minbpt must be >= 1, search_range >= 0")
