"""Monte-Carlo ground truth for the entropy-reduction acquisition.

Joint function draws on a small grid give exact posterior samples; draws are
grouped by the Pareto set they induce, and the entropy of the conditional
predictive at every grid point is estimated with a nearest-neighbor
differential-entropy estimator.  Desk-scale only: used to validate the EP
approximation, never inside the optimization loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from . import gp as gpmod
from .gp import GPPosterior
from .pareto import non_dominated_mask
from .util import as_rng

GAUSS_ENTROPY_CONST = 0.5 * np.log(2.0 * np.pi * np.e)


def knn_entropy_1d(samples: np.ndarray, k: int = 5) -> float:
    """Kozachenko-Leonenko differential entropy estimate for scalar samples."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.shape[0]
    if n <= k:
        raise ValueError("need more samples than neighbors")
    # k-th NN distance: the k-th smallest among the k sorted neighbors on
    # either side
    cands = np.full((n, 2 * k), np.inf)
    for j in range(1, k + 1):
        cands[j:, j - 1] = x[j:] - x[:-j]
        cands[:-j, k + j - 1] = x[j:] - x[:-j]
    cands.sort(axis=1)
    eps = np.maximum(cands[:, k - 1], 1e-300)
    return float(digamma(n) - digamma(k) + np.mean(np.log(2.0 * eps)))


def gaussian_entropy(variance) -> np.ndarray:
    return GAUSS_ENTROPY_CONST + 0.5 * np.log(np.asarray(variance, dtype=float))


def _grid_pareto_sets(samples: np.ndarray) -> list[np.ndarray]:
    """Grid indices of the Pareto set of every joint draw (n, G, K)."""
    return [np.flatnonzero(non_dominated_mask(s)) for s in samples]


def _sets_match(a_idx, b_idx, grid, tol):
    """Every point of each set within ``tol`` of some point of the other."""
    pa, pb = grid[a_idx], grid[b_idx]
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)
    return bool(d.min(axis=1).max() <= tol and d.min(axis=0).max() <= tol)


def _match_all(masks: np.ndarray, ref_idx: np.ndarray, within: np.ndarray
               ) -> np.ndarray:
    """Vectorized symmetric grid-cell match of every draw's Pareto set
    against one reference set.

    ``masks`` is boolean (n, G); ``within`` is the boolean (G, G) matrix of
    pairwise grid distances ≤ tol.
    """
    cover_ref = within[:, ref_idx].any(axis=1)            # (G,)
    a_to_b = ~(masks & ~cover_ref).any(axis=1)
    b_to_a = (masks @ within[:, ref_idx].astype(float) > 0).all(axis=1)
    return a_to_b & b_to_a


@dataclass(frozen=True)
class OracleResult:
    grid: np.ndarray
    total: np.ndarray            # (G,)
    per_objective: np.ndarray    # (G, K)
    predictive_entropy: np.ndarray
    n_reference_sets: int
    n_accepted: list


def unconditioned_entropy(gps: list[GPPosterior], grid: np.ndarray,
                          n_funcs: int, rng, knn_k: int = 5,
                          noise_variances=None) -> np.ndarray:
    """kNN entropy of unconditioned draws per grid point per objective."""
    rng = as_rng(rng)
    samples = _draw_joint(gps, grid, n_funcs, rng, noise_variances)
    G, K = grid.shape[0], len(gps)
    out = np.zeros((G, K))
    for k in range(K):
        for g in range(G):
            out[g, k] = knn_entropy_1d(samples[:, g, k], knn_k)
    return out


def _draw_joint(gps, grid, n_funcs, rng, noise_variances=None):
    """Exact multivariate-normal joint draws on the grid: (n_funcs, G, K)."""
    G = grid.shape[0]
    K = len(gps)
    out = np.zeros((n_funcs, G, K))
    for k, gp in enumerate(gps):
        mean, cov = gpmod.posterior_joint(gp, grid)
        cov = cov + 1e-9 * gp.hyperparams.amplitude * np.eye(G)
        L = np.linalg.cholesky(cov)
        z = rng.standard_normal((n_funcs, G))
        out[:, :, k] = mean + z @ L.T
        if noise_variances is not None and noise_variances[k] > 0:
            out[:, :, k] += rng.standard_normal((n_funcs, G)) * \
                np.sqrt(noise_variances[k])
    return out


def mc_acquisition(gps: list[GPPosterior], grid, n_funcs: int = 5000,
                   knn_k: int = 5, rng=None, n_reference_sets: int = 10,
                   min_accepted: int = 50, noise_variances=None
                   ) -> OracleResult:
    """Monte-Carlo estimate of the entropy-reduction acquisition on a grid.

    Draws ``n_funcs`` exact joint function samples, picks
    ``n_reference_sets`` of their grid-Pareto sets as reference Pareto
    samples, accepts for each reference the draws whose Pareto set matches it
    at grid resolution, and estimates the conditional entropies with a kNN
    estimator.  Acceptance tolerance is widened once if fewer than
    ``min_accepted`` draws match; a still-starved reference is dropped.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] > 200:
        raise ValueError("oracle grid limited to 200 points")
    rng = as_rng(rng)
    K = len(gps)
    G = grid.shape[0]
    noise = np.zeros(K) if noise_variances is None else \
        np.asarray(noise_variances, dtype=float)

    f_samples = _draw_joint(gps, grid, n_funcs, rng)
    y_samples = f_samples.copy()
    for k in range(K):
        if noise[k] > 0:
            y_samples[:, :, k] += rng.standard_normal((n_funcs, G)) * \
                np.sqrt(noise[k])

    pareto_sets = _grid_pareto_sets(f_samples)
    masks = np.zeros((n_funcs, G), dtype=bool)
    for i, s in enumerate(pareto_sets):
        masks[i, s] = True
    # grid-cell tolerance: nearest-neighbor spacing of the grid
    if G > 1:
        d2 = np.linalg.norm(grid[:, None] - grid[None, :], axis=-1)
        np.fill_diagonal(d2, np.inf)
        cell = float(d2.min(axis=1).max())
        dists = np.linalg.norm(grid[:, None] - grid[None, :], axis=-1)
    else:
        cell = np.inf
        dists = np.zeros((1, 1))

    ref_idx = rng.choice(n_funcs, size=n_reference_sets, replace=False)
    cond_entropy = np.zeros((G, K))
    n_used = 0
    accepted_counts = []
    for r in ref_idx:
        ref = pareto_sets[r]
        for tol in (cell, 2.0 * cell):
            acc = np.flatnonzero(_match_all(masks, ref, dists <= tol))
            if len(acc) >= min_accepted:
                break
        if len(acc) < min_accepted:
            accepted_counts.append(0)
            continue
        sub = y_samples[acc]
        h = np.zeros((G, K))
        for k in range(K):
            for g in range(G):
                h[g, k] = knn_entropy_1d(sub[:, g, k], knn_k)
        cond_entropy += h
        n_used += 1
        accepted_counts.append(len(acc))
    if n_used == 0:
        raise RuntimeError("no reference Pareto sample accepted enough draws")
    cond_entropy /= n_used

    _, v_pd = _predict(gps, grid)
    pred_entropy = gaussian_entropy(v_pd + noise)
    per_objective = pred_entropy - cond_entropy
    return OracleResult(grid, per_objective.sum(axis=1), per_objective,
                        pred_entropy, n_used, accepted_counts)


def _predict(gps, X):
    means, varis = [], []
    for gp in gps:
        m, v = gpmod.predict(gp, X)
        means.append(m)
        varis.append(v)
    return np.stack(means, axis=1), np.stack(varis, axis=1)
