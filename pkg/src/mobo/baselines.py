"""Baseline acquisition strategies.

ParEGO (random Chebyshev scalarization + expected improvement), SMSego
(optimistic hypervolume gain), EHI (exact expected hypervolume improvement,
cell decomposition), SUR (expected drop in the integrated probability of
improvement) and uniform random search.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from . import gp as gpmod
from .gp import GPPosterior
from .observations import ObservationLog, UnsupportedModeError
from .pareto import FrontSet, hypervolume, non_dominated_mask
from .util import Box, as_rng, sobol_points


class InfeasibleKError(ValueError):
    """Cell-decomposition methods are exponential in K; K > 3 is rejected."""


# ---------------------------------------------------------------------------
# ParEGO
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarizationWeights:
    """Simplex weights and the linear-term coefficient of the scalarization."""

    theta: np.ndarray
    rho: float = 0.05

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if np.any(th < 0) or np.any(th > 1) or abs(th.sum() - 1.0) > 1e-12:
            raise ValueError("theta must lie on the unit simplex")
        object.__setattr__(self, "theta", th)


def parego_scalarize(w: ScalarizationWeights, f) -> np.ndarray | float:
    """Chebyshev-plus-linear scalarization max_k(theta_k f_k) + rho sum."""
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    F = np.atleast_2d(f)
    if F.shape[1] != w.theta.shape[0]:
        raise ValueError("dimension mismatch")
    g = np.max(w.theta * F, axis=1) + w.rho * np.sum(w.theta * F, axis=1)
    return float(g[0]) if single else g


def expected_improvement(mean, var, best) -> np.ndarray:
    """Closed-form EI for minimization: E[max(0, best - y)]."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(var, dtype=float), 1e-300))
    z = (best - mean) / sd
    return (best - mean) * ndtr(z) + sd * norm.pdf(z)


def parego_acquisition(log: ObservationLog, n_samples: int, rng):
    """Averaged-EI acquisition from fresh random scalarizations.

    One scalarization and one hyperparameter draw per sample; requires
    coupled observations.  Returns a batch-callable acquisition.
    """
    rng = as_rng(rng)
    if not log.is_coupled:
        raise UnsupportedModeError("ParEGO requires coupled observations")
    X, Y = log.coupled_inputs()
    models = []
    for _ in range(n_samples):
        theta = rng.dirichlet(np.ones(log.n_objectives))
        w = ScalarizationWeights(theta)
        t = parego_scalarize(w, Y)
        mu, sd = t.mean(), max(t.std(), 1e-8)
        t_std = (t - mu) / sd
        hp = gpmod.sample_hyperparams(X, t_std, 1, rng, dim=log.dim)[0]
        models.append((gpmod.fit(X, t_std, hp), float(t_std.min())))

    def acq(Xc):
        Xc = np.atleast_2d(np.asarray(Xc, dtype=float))
        total = np.zeros(Xc.shape[0])
        for model, best in models:
            m, v = gpmod.predict(model, Xc)
            total += expected_improvement(m, v, best)
        return total / len(models)

    return acq


# ---------------------------------------------------------------------------
# SMSego
# ---------------------------------------------------------------------------


def smsego_acquisition(predict_fn, front: FrontSet, X, reference,
                       c: float = 1.0, eps: float | None = None) -> np.ndarray:
    """Hypervolume gain of the epsilon-corrected optimistic estimate.

    ``predict_fn`` maps (B, d) to (mean (B, K), var (B, K)).  ``eps`` defaults
    to 1e-3 of the per-objective front range.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    reference = np.asarray(reference, dtype=float)
    mean, var = predict_fn(X)
    if eps is None:
        span = front.points.max(axis=0) - front.points.min(axis=0)
        eps = 1e-3 * np.where(span > 0, span, 1.0)
    optimistic = mean - c * np.sqrt(np.maximum(var, 0.0)) - eps
    hv0 = hypervolume(front, reference)
    out = np.zeros(X.shape[0])
    for i, o in enumerate(optimistic):
        if np.any(np.all(front.points <= o, axis=1)):
            continue  # dominated (or equal) after correction
        ext = FrontSet(np.vstack([front.points, o[None, :]]))
        out[i] = max(hypervolume(ext, reference) - hv0, 0.0)
    return out


# ---------------------------------------------------------------------------
# EHI: exact expected hypervolume improvement via cell decomposition
# ---------------------------------------------------------------------------


def ehi_cell_count(front: FrontSet, k_obj: int) -> int:
    return (len(front) + 1) ** k_obj


def _cell_grid(front: np.ndarray, reference: np.ndarray):
    """Per-objective cell boundaries (-inf, sorted front values, ref)."""
    K = front.shape[1]
    bounds = []
    for k in range(K):
        vals = np.sort(front[:, k])
        bounds.append(np.concatenate([[-np.inf], vals, [reference[k]]]))
    return bounds


def _nondominated_cells(front: np.ndarray, bounds) -> np.ndarray:
    """Boolean mask over the cell lattice: True when the cell lies outside
    the region dominated by the front."""
    K = front.shape[1]
    shape = tuple(len(b) - 1 for b in bounds)
    lowers = np.meshgrid(*[b[:-1] for b in bounds], indexing="ij")
    lower = np.stack([l.ravel() for l in lowers], axis=1)
    dominated = np.zeros(lower.shape[0], dtype=bool)
    for a in front:
        dominated |= np.all(lower >= a, axis=1)
    return (~dominated).reshape(shape)


def _psi(z, mean, sd):
    """Antiderivative of the Gaussian cdf: integral of P(y <= t) up to z."""
    out = np.zeros(np.broadcast(z, mean).shape)
    finite = np.isfinite(z)
    w = (np.where(finite, z, 0.0) - mean) / sd
    out = np.where(finite, (np.where(finite, z, 0.0) - mean) * ndtr(w)
                   + sd * norm.pdf(w), 0.0)
    return out


def ehi_acquisition(predict_fn, front: FrontSet, X, reference) -> np.ndarray:
    """Exact expected hypervolume improvement for K <= 3.

    The non-dominated region below the reference decomposes into
    (|front|+1)^K axis-aligned cells; the expected improvement is the sum of
    the per-cell integrals of the product of per-objective cdf
    antiderivatives.
    """
    front_pts = front.points
    K = front_pts.shape[1]
    if K > 3:
        raise InfeasibleKError("EHI cell count is exponential in K")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    reference = np.asarray(reference, dtype=float)
    mean, var = predict_fn(X)
    sd = np.sqrt(np.maximum(var, 1e-300))
    bounds = _cell_grid(front_pts, reference)
    mask = _nondominated_cells(front_pts, bounds)
    assert mask.size == ehi_cell_count(front, K)
    # per-objective Psi differences across cell edges: (B, n+1)
    diffs = []
    for k in range(K):
        b = bounds[k]
        psi = _psi(b[None, :], mean[:, k, None], sd[:, k, None])
        diffs.append(np.diff(psi, axis=1))
    if K == 1:
        return np.einsum("bi,i->b", diffs[0], mask)
    if K == 2:
        return np.einsum("bi,bj,ij->b", diffs[0], diffs[1], mask)
    return np.einsum("bi,bj,bl,ijl->b", diffs[0], diffs[1], diffs[2], mask)


# ---------------------------------------------------------------------------
# SUR
# ---------------------------------------------------------------------------


def prob_dominated(mean, sd, front: np.ndarray) -> np.ndarray:
    """P(a Gaussian vector with independent components is weakly dominated by
    some front point).  ``mean``/``sd`` have shape (..., K)."""
    K = front.shape[1]
    if K == 1:
        return ndtr((mean[..., 0] - front[:, 0].min()) / sd[..., 0])
    if K == 2:
        f = front[non_dominated_mask(front)]
        f = f[np.argsort(f[:, 0])]
        x_hi = np.append(f[1:, 0], np.inf)
        p = np.zeros(mean.shape[:-1])
        for i in range(f.shape[0]):
            p1 = ndtr((np.minimum(x_hi[i], 1e300) - mean[..., 0]) / sd[..., 0]) \
                if np.isfinite(x_hi[i]) else 1.0
            p0 = ndtr((f[i, 0] - mean[..., 0]) / sd[..., 0])
            p2 = 1.0 - ndtr((f[i, 1] - mean[..., 1]) / sd[..., 1])
            p += (p1 - p0) * p2
        return p
    if K == 3:
        f = front[non_dominated_mask(front)]
        order = np.argsort(f[:, 2])
        f = f[order]
        z_hi = np.append(f[1:, 2], np.inf)
        p = np.zeros(mean.shape[:-1])
        for j in range(f.shape[0]):
            pz_hi = ndtr((z_hi[j] - mean[..., 2]) / sd[..., 2]) \
                if np.isfinite(z_hi[j]) else 1.0
            pz_lo = ndtr((f[j, 2] - mean[..., 2]) / sd[..., 2])
            sub = f[: j + 1, :2]
            sub = sub[non_dominated_mask(sub)]
            p2d = prob_dominated(mean[..., :2], sd[..., :2], sub)
            p += (pz_hi - pz_lo) * p2d
        return p
    raise InfeasibleKError("SUR cell decomposition is exponential in K")


def sur_acquisition(gps: list[GPPosterior], front: FrontSet, X,
                    integration_points: np.ndarray,
                    noise_variances=None, gh_nodes: int = 5) -> np.ndarray:
    """Expected decrease of the summed probability of improvement.

    The improvement probability is summed over the integration point set;
    the post-evaluation value is a Gauss-Hermite average over fantasized
    observations at each candidate, applied through closed-form rank-one
    posterior updates.  K <= 3 only.
    """
    K = len(gps)
    if K > 3:
        raise InfeasibleKError("SUR is exponential in K")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(integration_points, dtype=float))
    noise = np.zeros(K) if noise_variances is None else \
        np.asarray(noise_variances, dtype=float)
    front_pts = front.points

    mu_z = np.zeros((Z.shape[0], K))
    v_z = np.zeros((Z.shape[0], K))
    for k, gp in enumerate(gps):
        mu_z[:, k], v_z[:, k] = gpmod.predict(gp, Z)
    sd_z = np.sqrt(v_z)
    current = float(np.sum(1.0 - prob_dominated(mu_z, sd_z, front_pts)))

    nodes, weights = np.polynomial.hermite_e.hermegauss(gh_nodes)
    weights = weights / weights.sum()
    combos = list(product(range(gh_nodes), repeat=K))

    out = np.zeros(X.shape[0])
    for i, x in enumerate(X):
        mu_x = np.zeros(K)
        var_x = np.zeros(K)
        rho = np.zeros((Z.shape[0], K))
        for k, gp in enumerate(gps):
            m, v = gpmod.predict(gp, x)
            mu_x[k] = m
            var_x[k] = v + noise[k]
            rho[:, k] = gpmod.posterior_cross(gp, Z, x[None, :])[:, 0]
        v_new = np.maximum(v_z - rho**2 / var_x, 1e-12)
        sd_new = np.sqrt(v_new)
        gain = rho / var_x           # (Z, K): mean shift per unit residual
        expected = 0.0
        for combo in combos:
            wgt = np.prod([weights[c] for c in combo])
            resid = np.array([nodes[c] for c in combo]) * np.sqrt(var_x)
            mu_new = mu_z + gain * resid
            # the fantasized observation joins the front before probabilities
            # are re-measured; with a fixed front the fantasy average would
            # reproduce the current criterion exactly
            fant = np.vstack([front_pts, (mu_x + resid)[None, :]])
            fant = fant[non_dominated_mask(fant)]
            crit = np.sum(1.0 - prob_dominated(mu_new, sd_new, fant))
            expected += wgt * crit
        out[i] = current - expected
    return out


def sur_integration_points(d: int, rng, n: int = 512) -> np.ndarray:
    return sobol_points(n, d, rng)


# ---------------------------------------------------------------------------
# random search
# ---------------------------------------------------------------------------


def random_acquisition(domain: Box, rng) -> np.ndarray:
    """Uniform draw from the box."""
    rng = as_rng(rng)
    return rng.uniform(domain.lo, domain.hi)
