"""Compact NSGA-II for minimizing cheap surrogate objectives on the unit box."""

from __future__ import annotations

import numpy as np

from .pareto import non_dominated_mask
from .util import as_rng


def _fast_non_dominated_ranks(F: np.ndarray) -> np.ndarray:
    n = F.shape[0]
    ranks = np.full(n, -1, dtype=int)
    remaining = np.ones(n, dtype=bool)
    rank = 0
    while remaining.any():
        idx = np.flatnonzero(remaining)
        mask = non_dominated_mask(F[idx])
        ranks[idx[mask]] = rank
        remaining[idx[mask]] = False
        rank += 1
    return ranks


def _crowding(F: np.ndarray) -> np.ndarray:
    n, k = F.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        span = F[order[-1], j] - F[order[0], j]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span <= 0:
            continue
        dist[order[1:-1]] += (F[order[2:], j] - F[order[:-2], j]) / span
    return dist


def _sbx(parents: np.ndarray, rng, eta: float) -> np.ndarray:
    a, b = parents
    u = rng.uniform(size=a.shape)
    beta = np.where(u <= 0.5,
                    (2 * u) ** (1 / (eta + 1)),
                    (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
    swap = rng.uniform(size=a.shape) < 0.5
    c1 = 0.5 * ((1 + beta) * a + (1 - beta) * b)
    c2 = 0.5 * ((1 - beta) * a + (1 + beta) * b)
    return np.clip(np.where(swap, c2, c1), 0.0, 1.0)


def _poly_mutation(x: np.ndarray, rng, eta: float, rate: float) -> np.ndarray:
    u = rng.uniform(size=x.shape)
    do = rng.uniform(size=x.shape) < rate
    delta = np.where(u < 0.5,
                     (2 * u) ** (1 / (eta + 1)) - 1,
                     1 - (2 * (1 - u)) ** (1 / (eta + 1)))
    return np.clip(np.where(do, x + delta, x), 0.0, 1.0)


def nsga2_minimize(fun, d: int, rng, pop_size: int = 100,
                   n_generations: int = 100, eta_crossover: float = 15.0,
                   eta_mutation: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
    """Evolve a population on the unit box; returns the final non-dominated
    set (inputs, objective values).  ``fun`` maps (B, d) to (B, K)."""
    rng = as_rng(rng)
    rate = 1.0 / d
    X = rng.uniform(size=(pop_size, d))
    F = np.atleast_2d(fun(X))
    for _ in range(n_generations):
        ranks = _fast_non_dominated_ranks(F)
        crowd = np.zeros(pop_size)
        for r in np.unique(ranks):
            sel = ranks == r
            crowd[sel] = _crowding(F[sel])
        # binary tournament on (rank, -crowding)
        cand = rng.integers(0, pop_size, size=(pop_size, 2))
        better = np.where(
            (ranks[cand[:, 0]] < ranks[cand[:, 1]])
            | ((ranks[cand[:, 0]] == ranks[cand[:, 1]])
               & (crowd[cand[:, 0]] >= crowd[cand[:, 1]])),
            cand[:, 0], cand[:, 1])
        parents = X[better]
        half = pop_size // 2
        kids = _sbx((parents[:half], parents[half:2 * half]), rng,
                    eta_crossover)
        kids = np.vstack([kids, _sbx((parents[half:2 * half], parents[:half]),
                                     rng, eta_crossover)])
        kids = _poly_mutation(kids[:pop_size], rng, eta_mutation, rate)
        FX = np.atleast_2d(fun(kids))
        X_all = np.vstack([X, kids])
        F_all = np.vstack([F, FX])
        ranks_all = _fast_non_dominated_ranks(F_all)
        chosen = []
        for r in np.unique(ranks_all):
            sel = np.flatnonzero(ranks_all == r)
            if len(chosen) + len(sel) <= pop_size:
                chosen.extend(sel.tolist())
            else:
                crowd_r = _crowding(F_all[sel])
                order = np.argsort(-crowd_r, kind="stable")
                chosen.extend(sel[order[: pop_size - len(chosen)]].tolist())
                break
        X = X_all[chosen]
        F = F_all[chosen]
    mask = non_dominated_mask(F)
    return X[mask], F[mask]
