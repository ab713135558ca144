"""Gaussian-process regression per objective.

Matern 5/2 kernel with ARD lengthscales, exact Cholesky-based inference,
slice-sampled hyperparameter posteriors and approximate posterior function
draws through random cosine features.  Inputs are expected to live in the
unit hypercube and targets to be standardized by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .util import as_rng

SQRT5 = np.sqrt(5.0)


class GPFitError(RuntimeError):
    """Covariance matrix stayed non-positive-definite after jitter escalation."""


@dataclass(frozen=True)
class KernelHyperparams:
    """Matern 5/2 hyperparameters: ARD lengthscales, amplitude, noise variance."""

    lengthscales: np.ndarray
    amplitude: float
    noise_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if np.any(ls <= 0) or self.amplitude <= 0 or self.noise_variance < 0:
            raise ValueError("invalid hyperparameters")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


def matern52(hp: KernelHyperparams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix between point sets a (n, d) and b (m, d)."""
    a = np.atleast_2d(a) / hp.lengthscales
    b = np.atleast_2d(b) / hp.lengthscales
    d2 = np.maximum(
        np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T,
        0.0,
    )
    r = np.sqrt(d2)
    s = SQRT5 * r
    return hp.amplitude * (1.0 + s + s * s / 3.0) * np.exp(-s)


@dataclass(frozen=True)
class GPPosterior:
    """Fitted GP state: training data, Cholesky factor of K + noise*I, weights."""

    inputs: np.ndarray
    targets: np.ndarray
    hyperparams: KernelHyperparams
    chol: np.ndarray | None
    alpha: np.ndarray | None
    jitter: float

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def _chol_with_jitter(K: np.ndarray, amplitude: float) -> tuple[np.ndarray, float]:
    jitter = 0.0
    for _ in range(8):
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(K.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = 1e-10 * amplitude if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4 * amplitude:
                break
    raise GPFitError("covariance not positive definite after jitter escalation")


def fit(inputs, targets, hp: KernelHyperparams) -> GPPosterior:
    """Fit a GP posterior; with zero observations the prior is returned."""
    X = np.asarray(inputs, dtype=float).reshape(-1, hp.dim)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("inputs/targets length mismatch")
    if X.shape[0] == 0:
        return GPPosterior(X, y, hp, None, None, 0.0)
    K = matern52(hp, X, X) + hp.noise_variance * np.eye(X.shape[0])
    L, jitter = _chol_with_jitter(K, hp.amplitude)
    alpha = cho_solve((L, True), y)
    return GPPosterior(X, y, hp, L, alpha, jitter)


def predict(gp: GPPosterior, x) -> tuple[np.ndarray, np.ndarray]:
    """Latent predictive mean and variance at x ((d,) or (B, d)).

    Observation noise is not included; callers add ``noise_variance`` when
    they need the predictive distribution of noisy targets.
    """
    single = np.asarray(x).ndim == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    hp = gp.hyperparams
    if X.shape[1] != hp.dim:
        raise ValueError("dimension mismatch")
    floor = 1e-10 * hp.amplitude
    if gp.n == 0:
        mean = np.zeros(X.shape[0])
        var = np.full(X.shape[0], hp.amplitude)
    else:
        ks = matern52(hp, gp.inputs, X)
        mean = ks.T @ gp.alpha
        v = solve_triangular(gp.chol, ks, lower=True)
        var = np.maximum(hp.amplitude - np.sum(v * v, axis=0), floor)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def posterior_joint(gp: GPPosterior, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean vector and covariance matrix of f at ``pts`` (m, d)."""
    pts = np.atleast_2d(pts)
    hp = gp.hyperparams
    Kpp = matern52(hp, pts, pts)
    if gp.n == 0:
        return np.zeros(pts.shape[0]), Kpp
    ks = matern52(hp, gp.inputs, pts)
    mean = ks.T @ gp.alpha
    v = solve_triangular(gp.chol, ks, lower=True)
    return mean, Kpp - v.T @ v


def posterior_cross(gp: GPPosterior, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Posterior covariance between f(a) (m, d) and f(b) (B, d); shape (m, B)."""
    hp = gp.hyperparams
    Kab = matern52(hp, a, b)
    if gp.n == 0:
        return Kab
    va = solve_triangular(gp.chol, matern52(hp, gp.inputs, a), lower=True)
    vb = solve_triangular(gp.chol, matern52(hp, gp.inputs, b), lower=True)
    return Kab - va.T @ vb


# ---------------------------------------------------------------------------
# hyperparameter posterior sampling
# ---------------------------------------------------------------------------

# log-normal priors on the unit cube: lengthscale median 0.3 of the domain
# width, amplitude median 1, noise variance median 1e-2; log-sd 1 each
PRIOR_LOG_LS_MEAN = float(np.log(0.3))
PRIOR_LOG_AMP_MEAN = 0.0
PRIOR_LOG_NOISE_MEAN = float(np.log(1e-2))
PRIOR_LOG_SD = 1.0


def _log_marginal(X: np.ndarray, y: np.ndarray, hp: KernelHyperparams) -> float:
    n = X.shape[0]
    if n == 0:
        return 0.0
    K = matern52(hp, X, X) + (hp.noise_variance + 1e-10 * hp.amplitude) * np.eye(n)
    try:
        cf = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve(cf, y)
    return float(
        -0.5 * y @ alpha
        - np.sum(np.log(np.diag(cf[0])))
        - 0.5 * n * np.log(2 * np.pi)
    )


def _log_posterior(theta: np.ndarray, X: np.ndarray, y: np.ndarray, d: int) -> float:
    # theta = (log lengthscales, log amplitude, log noise_variance)
    prior_means = np.concatenate(
        [np.full(d, PRIOR_LOG_LS_MEAN), [PRIOR_LOG_AMP_MEAN, PRIOR_LOG_NOISE_MEAN]]
    )
    lp = float(-0.5 * np.sum(((theta - prior_means) / PRIOR_LOG_SD) ** 2))
    hp = KernelHyperparams(np.exp(theta[:d]), np.exp(theta[d]), np.exp(theta[d + 1]))
    return lp + _log_marginal(X, y, hp)


def _slice_sweep(theta, logp, lp0, rng, width=1.0, max_steps=8):
    for i in rng.permutation(len(theta)):
        level = lp0 + np.log(rng.uniform())
        r = rng.uniform()
        lo = theta[i] - r * width
        hi = theta[i] + (1 - r) * width
        th = theta.copy()
        for _ in range(max_steps):
            th[i] = lo
            if logp(th) <= level:
                break
            lo -= width
        for _ in range(max_steps):
            th[i] = hi
            if logp(th) <= level:
                break
            hi += width
        while True:
            prop = rng.uniform(lo, hi)
            th[i] = prop
            lp = logp(th)
            if lp > level:
                theta[i] = prop
                lp0 = lp
                break
            if prop < theta[i]:
                lo = prop
            else:
                hi = prop
    return theta, lp0


def sample_hyperparams(inputs, targets, n_samples: int, rng,
                       burn_in: int = 10, dim: int | None = None
                       ) -> list[KernelHyperparams]:
    """Slice-sample hyperparameters from their posterior (log space).

    With zero observations the draws follow the prior (``dim`` then fixes the
    number of lengthscales).  Deterministic for a fixed rng state.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = as_rng(rng)
    X = np.atleast_2d(np.asarray(inputs, dtype=float)) if len(inputs) else \
        np.zeros((0, dim or 1))
    y = np.asarray(targets, dtype=float).reshape(-1)
    d = X.shape[1]
    theta = np.concatenate(
        [np.full(d, PRIOR_LOG_LS_MEAN), [PRIOR_LOG_AMP_MEAN, PRIOR_LOG_NOISE_MEAN]]
    )

    def logp(th):
        return _log_posterior(th, X, y, d)

    lp0 = logp(theta)
    for _ in range(burn_in):
        theta, lp0 = _slice_sweep(theta, logp, lp0, rng)
    draws = []
    for _ in range(n_samples):
        theta, lp0 = _slice_sweep(theta, logp, lp0, rng)
        draws.append(
            KernelHyperparams(np.exp(theta[:d]), np.exp(theta[d]), np.exp(theta[d + 1]))
        )
    return draws


# ---------------------------------------------------------------------------
# random-feature posterior draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSample:
    """One posterior function draw as a linear model in random cosine features."""

    frequencies: np.ndarray  # (n_features, d)
    phases: np.ndarray       # (n_features,)
    weights: np.ndarray      # (n_features,)
    amplitude_scale: float


def eval_feature_sample(fs: FeatureSample, x) -> np.ndarray | float:
    """Deterministic evaluation of a feature sample at x ((d,) or (B, d))."""
    single = np.asarray(x).ndim == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != fs.frequencies.shape[1]:
        raise ValueError("dimension mismatch")
    phi = fs.amplitude_scale * np.cos(X @ fs.frequencies.T + fs.phases)
    out = phi @ fs.weights
    return float(out[0]) if single else out


def _draw_features(hp: KernelHyperparams, n_features: int, rng):
    # Matern 5/2 spectral density: frequencies are multivariate-t with 5
    # degrees of freedom, scaled by the inverse lengthscales
    d = hp.dim
    z = rng.standard_normal((n_features, d)) / hp.lengthscales
    g = rng.chisquare(5.0, size=n_features)
    W = z * np.sqrt(5.0 / g)[:, None]
    b = rng.uniform(0.0, 2 * np.pi, size=n_features)
    scale = np.sqrt(2.0 * hp.amplitude / n_features)
    return W, b, scale


def draw_posterior_function(gp: GPPosterior, n_features: int, rng) -> FeatureSample:
    """Approximate posterior draw of f via random features (Matheron update)."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    rng = as_rng(rng)
    hp = gp.hyperparams
    W, b, scale = _draw_features(hp, n_features, rng)
    w0 = rng.standard_normal(n_features)
    if gp.n == 0:
        return FeatureSample(W, b, w0, scale)
    phi = scale * np.cos(gp.inputs @ W.T + b)       # (n, n_features)
    f0 = phi @ w0
    noise = hp.noise_variance + 1e-8 * hp.amplitude
    eps = rng.standard_normal(gp.n) * np.sqrt(noise)
    A = phi @ phi.T + noise * np.eye(gp.n)
    resid = np.linalg.solve(A, gp.targets - f0 - eps)
    w = w0 + phi.T @ resid
    return FeatureSample(W, b, w, scale)
