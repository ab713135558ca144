"""Expectation-propagation approximation of the Pareto-conditioned predictive.

Conditioning the GP predictive on a sampled Pareto set introduces, for every
(point, Pareto-point) pair, a non-Gaussian factor stating that the Pareto
point cannot be dominated.  Each factor is replaced by a product of per
objective bivariate Gaussian factors whose natural parameters are refined by
damped parallel EP.  The refined state is then reused to evaluate, for any
candidate location, the variance of the conditional predictive and from it
the entropy-reduction acquisition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import gp as gpmod
from .gp import GPPosterior

_LOG2PI = np.log(2.0 * np.pi)


class EPFailure(RuntimeError):
    """EP could not produce a positive-definite reconstruction."""


@dataclass
class EPConfig:
    tol: float = 1e-4
    max_iters: int = 200
    damping: float = 0.5
    min_damping: float = 1e-3
    jitter: float = 1e-8


@dataclass
class PairFactorTable:
    """Natural parameters of the bivariate Gaussian factors, one row per
    ordered (point, Pareto-point) pair and one column per objective.

    ``a_idx`` indexes the non-star role and ``b_idx`` the star role in the
    joint vector [f(X*), f(Xhat)].  ``p11``/``p22`` are the precisions on the
    two slots, ``p12`` the cross natural parameter, ``h1``/``h2`` the natural
    means.
    """

    a_idx: np.ndarray
    b_idx: np.ndarray
    p11: np.ndarray
    p22: np.ndarray
    p12: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    def params(self) -> np.ndarray:
        return np.stack([self.p11, self.p22, self.p12, self.h1, self.h2])

    def copy(self) -> "PairFactorTable":
        return PairFactorTable(
            self.a_idx, self.b_idx,
            self.p11.copy(), self.p22.copy(), self.p12.copy(),
            self.h1.copy(), self.h2.copy(),
        )


@dataclass
class CPDState:
    """Reconstructed conditional predictive over [f(X*), f(Xhat)] per objective,
    plus the reusable pieces needed to condition a new candidate point."""

    x_star: np.ndarray              # (M, d)
    x_hat: np.ndarray               # (N, d)
    gps: list[GPPosterior]          # one per objective
    factors: PairFactorTable
    mu: np.ndarray                  # (K, M+N)
    sigma: np.ndarray               # (K, M+N, M+N)
    prior_mu: np.ndarray            # (K, M+N)
    prior_prec: np.ndarray          # (K, M+N, M+N)
    n_sweeps: int = 0
    converged: bool = False
    fallback_count: int = 0
    # candidate-path caches, filled lazily
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return self.x_star.shape[0]

    @property
    def n_obs(self) -> int:
        return self.x_hat.shape[0]

    @property
    def k_obj(self) -> int:
        return len(self.gps)


# ---------------------------------------------------------------------------
# 2x2 natural-parameter arithmetic (vectorized over trailing axes)
# ---------------------------------------------------------------------------


def _nat_from_moments(v1, v2, c, m1, m2):
    det = v1 * v2 - c * c
    p11 = v2 / det
    p22 = v1 / det
    p12 = -c / det
    h1 = p11 * m1 + p12 * m2
    h2 = p12 * m1 + p22 * m2
    return p11, p22, p12, h1, h2, det


def _moments_from_nat(p11, p22, p12, h1, h2):
    det = p11 * p22 - p12 * p12
    v1 = p22 / det
    v2 = p11 / det
    c = -p12 / det
    m1 = v1 * h1 + c * h2
    m2 = c * h1 + v2 * h2
    return v1, v2, c, m1, m2, det


def cavity(joint_moments, factor_nat):
    """Cavity of a bivariate Gaussian: joint naturals minus factor naturals.

    ``joint_moments`` is (v1, v2, c, m1, m2); ``factor_nat`` is
    (p11, p22, p12, h1, h2).  Raises on a non-PD result.
    """
    v1, v2, c, m1, m2 = joint_moments
    jp11, jp22, jp12, jh1, jh2, _ = _nat_from_moments(v1, v2, c, m1, m2)
    p11 = jp11 - factor_nat[0]
    p22 = jp22 - factor_nat[1]
    p12 = jp12 - factor_nat[2]
    h1 = jh1 - factor_nat[3]
    h2 = jh2 - factor_nat[4]
    cv1, cv2, cc, cm1, cm2, det = _moments_from_nat(p11, p22, p12, h1, h2)
    if np.any(det <= 0) or np.any(p11 <= 0) or np.any(p22 <= 0):
        raise FloatingPointError("non-PD cavity")
    return cv1, cv2, cc, cm1, cm2


def tilted_log_Z(cavities) -> float:
    """log of the normalizer of the tilted distribution.

    ``cavities`` is a sequence of per-objective bivariate moments
    (v, v_star, c, m, m_star).  The exact factor forbids the star point being
    weakly worse in every objective, so the normalizer is one minus the
    product over objectives of P(f_star >= f).
    """
    acc = 0.0
    for v, vs, c, m, ms in cavities:
        s = v + vs - 2.0 * c
        if s <= 0:
            raise FloatingPointError("nonpositive pair-difference variance")
        acc += float(log_ndtr((ms - m) / np.sqrt(s)))
    # log(1 - exp(acc)), stable near acc -> 0
    with np.errstate(divide="ignore"):
        return float(np.log(-np.expm1(acc)))


def _tilted_terms(v, vs, c, m, ms):
    """Per-objective beta and pair-difference sd arrays (vectorized)."""
    s = v + vs - 2.0 * c
    sd = np.sqrt(np.maximum(s, 1e-300))
    beta = (ms - m) / sd
    return beta, sd, s


def tilted_update(cavities, damping: float = 1.0, old_factors=None):
    """Moment-match each pair marginal to the tilted distribution.

    ``cavities``: list over objectives of (v, v_star, c, m, m_star) arrays of a
    common shape.  Returns per-objective updated factor naturals
    (p11, p22, p12, h1, h2) and a validity mask.  When ``old_factors`` is
    given, the naturals are the damped blend with the old values.
    """
    K = len(cavities)
    betas, sds = [], []
    log_phis = []
    for v, vs, c, m, ms in cavities:
        beta, sd, s = _tilted_terms(v, vs, c, m, ms)
        betas.append(beta)
        sds.append(sd)
        log_phis.append(log_ndtr(beta))
    log_prod = np.sum(log_phis, axis=0)
    with np.errstate(divide="ignore"):
        log_Zhat = np.log(-np.expm1(np.minimum(log_prod, -1e-300)))
    valid = np.isfinite(log_Zhat)

    out = []
    norm_pdf = lambda b: np.exp(-0.5 * b * b - 0.5 * _LOG2PI)
    for k in range(K):
        v, vs, c, m, ms = cavities[k]
        beta, sd = betas[k], sds[k]
        # rho = phi(beta) * prod_{k' != k} Phi(beta_k') / Zhat
        log_tail = log_prod - log_phis[k]
        rho = norm_pdf(beta) * np.exp(log_tail - log_Zhat)
        dm = rho / sd          # d logZ / d m
        dm_s = -rho / sd       # d logZ / d m_star
        curv = (beta * rho - rho * rho) / (sd * sd)
        # mean_new = mean + V g ; cov_new = V + V H V with H = curv*[[1,-1],[-1,1]]
        g1, g2 = dm, dm_s
        m1 = m + v * g1 + c * g2
        m2 = ms + c * g1 + vs * g2
        # V H V: with u = (v - c, c - vs): V @ [1,-1]^T = (v - c, c - vs)
        u1 = v - c
        u2 = c - vs
        nv1 = v + curv * u1 * u1
        nv2 = vs + curv * u2 * u2
        nc = c + curv * u1 * u2
        det_new = nv1 * nv2 - nc * nc
        ok = valid & (det_new > 0) & (nv1 > 0) & (nv2 > 0)
        p11n, p22n, p12n, h1n, h2n, _ = _nat_from_moments(
            np.where(ok, nv1, 1.0), np.where(ok, nv2, 1.0),
            np.where(ok, nc, 0.0), m1, m2)
        cp11, cp22, cp12, ch1, ch2, _ = _nat_from_moments(v, vs, c, m, ms)
        f = (p11n - cp11, p22n - cp22, p12n - cp12, h1n - ch1, h2n - ch2)
        if old_factors is not None:
            old = old_factors[k]
            f = tuple(
                np.where(ok, damping * fn + (1 - damping) * fo, fo)
                for fn, fo in zip(f, old)
            )
        else:
            f = tuple(np.where(ok, damping * fn, 0.0) for fn in f)
        out.append(f)
    return out, valid


# ---------------------------------------------------------------------------
# EP refinement over the fixed factors
# ---------------------------------------------------------------------------


def _joint_prior(gps, x_star, x_hat, jitter):
    """GP posterior mean/cov over [f(X*), f(Xhat)] per objective, plus naturals."""
    pts = np.vstack([x_star, x_hat]) if x_hat.size else x_star
    K = len(gps)
    P = pts.shape[0]
    mu0 = np.zeros((K, P))
    sig0 = np.zeros((K, P, P))
    prec0 = np.zeros((K, P, P))
    for k, gp in enumerate(gps):
        m, S = gpmod.posterior_joint(gp, pts)
        S = S + jitter * gp.hyperparams.amplitude * np.eye(P)
        mu0[k] = m
        sig0[k] = S
        prec0[k] = np.linalg.inv(S)
    return mu0, sig0, prec0


def _pair_indices(m: int, n: int):
    """All ordered (a, b) pairs with b a star index, a any index, a != b."""
    a, b = np.meshgrid(np.arange(m + n), np.arange(m), indexing="ij")
    a = a.ravel()
    b = b.ravel()
    keep = a != b
    return a[keep], b[keep]


def _reconstruct(prior_mu, prior_prec, factors: PairFactorTable):
    K, P = prior_mu.shape
    S = prior_prec.copy()
    h = np.einsum("kij,kj->ki", prior_prec, prior_mu)
    a, b = factors.a_idx, factors.b_idx
    for k in range(K):
        np.add.at(S[k], (a, a), factors.p11[:, k])
        np.add.at(S[k], (b, b), factors.p22[:, k])
        np.add.at(S[k], (a, b), factors.p12[:, k])
        np.add.at(S[k], (b, a), factors.p12[:, k])
        np.add.at(h[k], a, factors.h1[:, k])
        np.add.at(h[k], b, factors.h2[:, k])
    sigma = np.zeros_like(S)
    mu = np.zeros_like(h)
    for k in range(K):
        try:
            L = np.linalg.cholesky(S[k])
        except np.linalg.LinAlgError:
            return None, None
        inv = np.linalg.inv(L)
        sigma[k] = inv.T @ inv
        mu[k] = sigma[k] @ h[k]
    return mu, sigma


def run_ep(gps: list[GPPosterior], x_star: np.ndarray, x_hat: np.ndarray,
           cfg: EPConfig | None = None) -> CPDState:
    """Refine all candidate-independent factors to convergence.

    ``x_star`` is the sampled Pareto set (M, d); ``x_hat`` the union of
    observed input locations (N, d).  Raises :class:`EPFailure` when no
    positive-definite reconstruction can be maintained.
    """
    cfg = cfg or EPConfig()
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1, x_star.shape[1])
    M, N = x_star.shape[0], x_hat.shape[0]
    K = len(gps)
    mu0, sig0, prec0 = _joint_prior(gps, x_star, x_hat, cfg.jitter)

    a_idx, b_idx = _pair_indices(M, N)
    F = a_idx.shape[0]
    zeros = lambda: np.zeros((F, K))
    factors = PairFactorTable(a_idx, b_idx, zeros(), zeros(), zeros(),
                              zeros(), zeros())
    mu, sigma = mu0.copy(), sig0.copy()
    damping = cfg.damping
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iters + 1):
        prev = factors.params()
        backup = factors.copy()
        # gather bivariate marginals for every pair and objective: (F, K)
        v1 = sigma[:, a_idx, a_idx].T
        v2 = sigma[:, b_idx, b_idx].T
        c = sigma[:, a_idx, b_idx].T
        m1 = mu[:, a_idx].T
        m2 = mu[:, b_idx].T
        # cavity = marginal naturals minus factor naturals
        jp11, jp22, jp12, jh1, jh2, _ = _nat_from_moments(v1, v2, c, m1, m2)
        p11 = jp11 - factors.p11
        p22 = jp22 - factors.p22
        p12 = jp12 - factors.p12
        h1 = jh1 - factors.h1
        h2 = jh2 - factors.h2
        cv1, cv2, cc, cm1, cm2, det = _moments_from_nat(p11, p22, p12, h1, h2)
        cav_ok = (det > 0) & (p11 > 0) & (p22 > 0)
        s_pair = cv1 + cv2 - 2.0 * cc
        cav_ok &= s_pair > 0
        safe = lambda arr, fill, k: np.where(cav_ok[:, k], arr, fill)
        cavities = [
            (safe(cv1[:, k], 1.0, k), safe(cv2[:, k], 1.0, k),
             safe(cc[:, k], 0.0, k), safe(cm1[:, k], 0.0, k),
             safe(cm2[:, k], 1.0, k))
            for k in range(K)
        ]
        old = [
            (factors.p11[:, k], factors.p22[:, k], factors.p12[:, k],
             factors.h1[:, k], factors.h2[:, k])
            for k in range(K)
        ]
        updated, valid = tilted_update(cavities, damping=damping,
                                       old_factors=old)
        for k in range(K):
            ok = cav_ok[:, k] & valid[:, k] if valid.ndim == 2 else \
                cav_ok[:, k] & valid
            p11u, p22u, p12u, h1u, h2u = updated[k]
            factors.p11[:, k] = np.where(ok, p11u, factors.p11[:, k])
            factors.p22[:, k] = np.where(ok, p22u, factors.p22[:, k])
            factors.p12[:, k] = np.where(ok, p12u, factors.p12[:, k])
            factors.h1[:, k] = np.where(ok, h1u, factors.h1[:, k])
            factors.h2[:, k] = np.where(ok, h2u, factors.h2[:, k])
        new_mu, new_sigma = _reconstruct(mu0, prec0, factors)
        if new_mu is None:
            factors = backup
            damping *= 0.5
            if damping < cfg.min_damping:
                raise EPFailure("reconstruction stayed non-PD")
            continue
        mu, sigma = new_mu, new_sigma
        delta = np.max(np.abs(factors.params() - prev)) if F else 0.0
        if delta < cfg.tol:
            converged = True
            break

    return CPDState(x_star, x_hat, list(gps), factors, mu, sigma,
                    mu0, prec0, n_sweeps=sweeps, converged=converged)


# ---------------------------------------------------------------------------
# conditional predictive variance at candidate locations
# ---------------------------------------------------------------------------


def _candidate_cache(cpd: CPDState):
    """Per-objective reusable blocks for the candidate-conditioning path."""
    if "ready" in cpd._cache:
        return cpd._cache
    M = cpd.m
    cache = cpd._cache
    cache["sig0_inv"] = np.zeros_like(cpd.sigma)
    cache["W"] = np.zeros((cpd.k_obj, M, cpd.m + cpd.n_obs))
    cache["Q"] = np.zeros_like(cpd.sigma)
    cache["u"] = np.zeros_like(cpd.mu)
    cache["p_star"] = np.zeros((cpd.k_obj, M, M))
    for k in range(cpd.k_obj):
        prec0 = cpd.prior_prec[k]
        sig = cpd.sigma[k]
        cache["sig0_inv"][k] = prec0
        cache["W"][k] = (sig @ prec0)[:M, :]
        cache["Q"][k] = prec0 - prec0 @ sig @ prec0
        cache["u"][k] = prec0 @ (cpd.mu[k] - cpd.prior_mu[k])
        c_star = sig[:M, :M]
        cache["p_star"][k] = np.linalg.inv(
            c_star + 1e-12 * np.eye(M) * max(np.max(np.diag(c_star)), 1.0))
    cache["ready"] = True
    return cache


def conditional_variance_at(cpd: CPDState, X) -> np.ndarray:
    """Variance of the Pareto-conditioned predictive at candidates X (B, d).

    The M candidate-dependent factors get exactly one EP pass each.  Returns
    an array (B, K) of latent variances; observation noise is added by the
    caller.  Non-PD candidate systems fall back to the unconditioned
    predictive variance and bump ``cpd.fallback_count``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B = X.shape[0]
    M = cpd.m
    K = cpd.k_obj
    pts = np.vstack([cpd.x_star, cpd.x_hat]) if cpd.n_obs else cpd.x_star
    cache = _candidate_cache(cpd)
    out = np.zeros((B, K))

    # per-objective joint of [f(X*), f(x)] under the refined state
    m_x = np.zeros((K, B))
    s_xx = np.zeros((K, B))
    c_sx = np.zeros((K, M, B))
    v_pd = np.zeros((K, B))
    for k in range(K):
        gp = cpd.gps[k]
        mean0, var0 = gpmod.predict(gp, X)
        v_pd[k] = var0
        k_x = gpmod.posterior_cross(gp, pts, X)          # (M+N, B)
        c_sx[k] = cache["W"][k] @ k_x
        m_x[k] = mean0 + k_x.T @ cache["u"][k]
        s_xx[k] = var0 - np.einsum("ib,ij,jb->b", k_x, cache["Q"][k], k_x)
    floor = np.array([1e-10 * gp.hyperparams.amplitude for gp in cpd.gps])
    s_xx = np.maximum(s_xx, floor[:, None])

    # single parallel EP pass over the M candidate factors, jointly across k.
    # cavity = joint marginal of (f(x), f(x*_j)) since the candidate factors
    # start at zero.
    mu_star = cpd.mu[:, :M]                              # (K, M)
    v_star = np.array([np.diag(cpd.sigma[k][:M, :M]) for k in range(K)])
    cav = [
        (
            np.broadcast_to(s_xx[k][:, None], (B, M)),
            np.broadcast_to(v_star[k][None, :], (B, M)),
            c_sx[k].T,
            np.broadcast_to(m_x[k][:, None], (B, M)),
            np.broadcast_to(mu_star[k][None, :], (B, M)),
        )
        for k in range(K)
    ]
    pair_ok = np.ones((B, M), dtype=bool)
    for k in range(K):
        v, vs, c, _, _ = cav[k]
        pair_ok &= (v + vs - 2 * c) > 0
        pair_ok &= (v * vs - c * c) > 0
    cav = [
        tuple(np.where(pair_ok, arr, fill) for arr, fill in
              zip(cavk, (1.0, 1.0, 0.0, 0.0, 1.0)))
        for cavk, k in zip(cav, range(K))
    ]
    upd, valid = tilted_update(cav, damping=1.0)
    use = pair_ok & valid

    for k in range(K):
        p11, p22, p12, _, _ = upd[k]
        p11 = np.where(use, p11, 0.0)   # (B, M), precision on f(x)
        p22 = np.where(use, p22, 0.0)   # precision on f(x*_j)
        p12 = np.where(use, p12, 0.0)
        p_star = cache["p_star"][k]
        w = p_star @ c_sx[k]                             # (M, B)
        sig_c = s_xx[k] - np.einsum("mb,mb->b", c_sx[k], w)
        bad = sig_c <= floor[k]
        sig_c = np.where(bad, 1.0, sig_c)
        # upper block of the candidate natural precision, per candidate
        A = p_star[None, :, :] + \
            (w.T[:, :, None] * w.T[:, None, :]) / sig_c[:, None, None]
        A[:, np.arange(M), np.arange(M)] += p22
        cross = (-w / sig_c).T + p12                     # (B, M)
        s_mm = 1.0 / sig_c + p11.sum(axis=1)
        try:
            sol = np.linalg.solve(A, cross[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            sol = None
        if sol is None:
            var = np.full(B, np.nan)
        else:
            var = 1.0 / (s_mm - np.einsum("bm,bm->b", cross, sol))
        good = (~bad) & np.isfinite(var) & (var > 0) if sol is not None \
            else np.zeros(B, dtype=bool)
        n_bad = int(B - good.sum())
        if n_bad:
            cpd.fallback_count += n_bad
        out[:, k] = np.where(good, var, v_pd[k])
        out[:, k] = np.maximum(out[:, k], floor[k])
    return out


# ---------------------------------------------------------------------------
# acquisition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcquisitionEval:
    """Entropy-reduction acquisition at one location."""

    total: float
    per_objective: np.ndarray
    v_pd: np.ndarray
    v_cpd: np.ndarray


def acquisition_batch(contexts, X, noise_variances=None) -> np.ndarray:
    """Per-objective acquisition over candidates X for a set of EP contexts.

    ``contexts`` is a list of lists: one inner list of CPDStates (the Pareto
    sample contexts) per hyperparameter sample; all contexts in an inner list
    share their GPs.  ``noise_variances`` optionally maps each hyperparameter
    sample to per-objective observation-noise variances added to every
    variance before the entropy difference.  Returns (B, K).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B = X.shape[0]
    per_h = []
    for h, ctx_list in enumerate(contexts):
        live = [c for c in ctx_list if c is not None]
        if not live:
            continue
        K = live[0].k_obj
        noise = np.zeros(K) if noise_variances is None else \
            np.asarray(noise_variances[h], dtype=float)
        _, v_pd = _predict_all(live[0].gps, X)
        log_cpd = np.zeros((B, K))
        for c in live:
            v_cpd = conditional_variance_at(c, X)
            log_cpd += 0.5 * np.log(v_cpd + noise)
        log_cpd /= len(live)
        per_h.append(0.5 * np.log(v_pd + noise) - log_cpd)
    if not per_h:
        raise EPFailure("every EP context failed")
    return np.mean(per_h, axis=0)


def _predict_all(gps, X):
    means = []
    varis = []
    for gp in gps:
        m, v = gpmod.predict(gp, X)
        means.append(m)
        varis.append(v)
    return np.stack(means, axis=1), np.stack(varis, axis=1)


def acquisition(contexts, x, noise_variances=None) -> AcquisitionEval:
    """Acquisition at a single point; total is exactly the objective sum."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    per_k = acquisition_batch(contexts, x, noise_variances)[0]
    live = [c for ctx in contexts for c in ctx if c is not None]
    _, v_pd = _predict_all(live[0].gps, x)
    v_cpd = np.mean([conditional_variance_at(c, x)[0] for c in live], axis=0)
    return AcquisitionEval(float(np.sum(per_k)), per_k, v_pd[0], v_cpd)
