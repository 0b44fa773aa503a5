"""Discount weight profiles ``β_N(k)`` for finite-horizon costs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = ["DiscountProfile", "CONSTANT", "LINEAR", "weight", "weight_sum", "weights", "parse_discount"]


@dataclass(frozen=True)
class DiscountProfile:
    """``kind`` is ``"constant"``, ``"linear"`` or ``"table"``."""

    kind: str
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "table"):
            raise ValueError(f"unknown discount kind {self.kind!r}")
        if self.kind == "table":
            if not self.table:
                raise ValueError("custom discount table must be non-empty")
            t = tuple(float(w) for w in self.table)
            if any(not (0.0 < w <= 1.0) for w in t):
                raise ValueError("custom discount weights must lie in (0, 1]")
            object.__setattr__(self, "table", t)

    @classmethod
    def custom(cls, ws: Sequence[float]) -> "DiscountProfile":
        return cls("table", tuple(ws))

    def __str__(self) -> str:
        return self.kind if self.kind != "table" else f"table{list(self.table)}"


CONSTANT = DiscountProfile("constant")
LINEAR = DiscountProfile("linear")


def _check_horizon(profile: DiscountProfile, N: int):
    if N < 1:
        raise ValueError(f"horizon must be >= 1, got {N}")
    if profile.kind == "table" and len(profile.table) < N:
        raise ValueError(f"discount table has {len(profile.table)} entries, horizon {N}")


def weight(profile: DiscountProfile, k: int, N: int) -> float:
    _check_horizon(profile, N)
    if not 0 <= k <= N - 1:
        raise IndexError(f"stage {k} outside [0, {N - 1}]")
    if profile.kind == "constant":
        return 1.0
    if profile.kind == "linear":
        return (N - k) / N
    return profile.table[k]


def weights(profile: DiscountProfile, N: int) -> np.ndarray:
    """All weights ``β_N(0..N-1)`` as an array."""
    _check_horizon(profile, N)
    if profile.kind == "constant":
        return np.ones(N)
    if profile.kind == "linear":
        return (N - np.arange(N)) / N
    return np.array(profile.table[:N])


def weight_sum(profile: DiscountProfile, N: int) -> float:
    _check_horizon(profile, N)
    if profile.kind == "constant":
        return float(N)
    if profile.kind == "linear":
        return (N + 1) / 2
    return float(np.sum(profile.table[:N]))


def parse_discount(value) -> DiscountProfile:
    """Config value ``"constant" | "linear" | [w0, w1, ...]``."""
    if isinstance(value, DiscountProfile):
        return value
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("constant", "undiscounted"):
            return CONSTANT
        if key in ("linear", "discounted"):
            return LINEAR
        raise ValueError(f"unknown discount {value!r}")
    return DiscountProfile.custom(list(value))
