"""Shared small utilities: box domains, low-discrepancy point sets, rng plumbing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class Box:
    """Axis-aligned box domain [lo, hi] in R^d."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lo) / self.width

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=float) * self.width

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.atleast_2d(x)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


def unit_box(d: int) -> Box:
    return Box(np.zeros(d), np.ones(d))


def sobol_points(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Scrambled Sobol point set of exactly n points in the unit cube."""
    seed = int(rng.integers(0, 2**31 - 1))
    eng = qmc.Sobol(d, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = eng.random(2**m)
    return pts[:n]


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
