"""Per-objective evaluation history supporting decoupled input locations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UnsupportedModeError(RuntimeError):
    """An acquisition required coupled data but the log is decoupled."""


@dataclass
class ObservationLog:
    """Evaluation history: one (inputs, values) list per objective.

    Coupled steps append one location to every objective; decoupled steps
    append to a single objective, so the per-objective lists may differ both
    in length and in locations.
    """

    dim: int
    n_objectives: int
    xs: list = field(default=None)
    ys: list = field(default=None)
    iterations: int = 0

    def __post_init__(self):
        if self.xs is None:
            self.xs = [np.zeros((0, self.dim)) for _ in range(self.n_objectives)]
        if self.ys is None:
            self.ys = [np.zeros(0) for _ in range(self.n_objectives)]

    def add_coupled(self, x, y):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.n_objectives:
            raise ValueError("need one value per objective")
        for k in range(self.n_objectives):
            self.xs[k] = np.vstack([self.xs[k], x])
            self.ys[k] = np.append(self.ys[k], y[k])
        self.iterations += 1

    def add_single(self, k: int, x, y: float):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        self.xs[k] = np.vstack([self.xs[k], x])
        self.ys[k] = np.append(self.ys[k], float(y))
        self.iterations += 1

    def counts(self) -> np.ndarray:
        return np.array([len(y) for y in self.ys])

    @property
    def is_coupled(self) -> bool:
        n0 = self.xs[0].shape[0]
        return all(
            x.shape == self.xs[0].shape and np.array_equal(x, self.xs[0])
            for x in self.xs
        ) and n0 >= 0

    def coupled_inputs(self) -> tuple[np.ndarray, np.ndarray]:
        """Shared locations and the (N, K) value matrix; coupled mode only."""
        if not self.is_coupled:
            raise UnsupportedModeError("observation log is decoupled")
        return self.xs[0].copy(), np.stack(self.ys, axis=1)

    def union_inputs(self, tol: float = 1e-12) -> np.ndarray:
        """Union of observed locations across objectives, deduplicated."""
        allx = np.vstack(self.xs)
        if allx.shape[0] == 0:
            return allx
        keep = []
        for i, x in enumerate(allx):
            if not any(np.linalg.norm(x - allx[j]) <= tol for j in keep):
                keep.append(i)
        return allx[keep]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_objectives": self.n_objectives,
            "iterations": self.iterations,
            "xs": [x.tolist() for x in self.xs],
            "ys": [y.tolist() for y in self.ys],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationLog":
        log = cls(d["dim"], d["n_objectives"])
        log.xs = [np.asarray(x, dtype=float).reshape(-1, d["dim"])
                  for x in d["xs"]]
        log.ys = [np.asarray(y, dtype=float) for y in d["ys"]]
        log.iterations = d["iterations"]
        return log
