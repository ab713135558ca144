"""Sequential optimization driver: model refits, acquisition maximization,
coupled and decoupled stepping, and recommendations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import baselines, gp as gpmod
from .ep import EPConfig, EPFailure, acquisition_batch, run_ep
from .observations import ObservationLog, UnsupportedModeError
from .pareto import FrontSet, non_dominated_mask
from .pareto_sampling import SamplerConfig, sample_pareto_set, subsample_representative
from .util import Box, as_rng, sobol_points

METHODS = ("pesmo", "pesmo_decoupled", "parego", "smsego", "ehi", "sur", "random")


@dataclass
class LoopConfig:
    method: str = "pesmo"
    n_hyper_samples: int = 10
    n_pareto_samples: int = 10
    n_grid: int = 1000
    n_starts: int = 5
    n_initial: int = 5
    recommend_cap: int = 100
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    ep: EPConfig = field(default_factory=EPConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class RunState:
    domain: Box
    log: ObservationLog
    rng: np.random.Generator
    config: LoopConfig
    models: list = None          # models[h][k]: GPPosterior on standardized targets
    scales: list = None          # per objective (mean, sd) of raw targets

    @property
    def iteration(self) -> int:
        return self.log.iterations


def standardize_scales(log: ObservationLog) -> list[tuple[float, float]]:
    out = []
    for k in range(log.n_objectives):
        y = log.ys[k]
        sd = float(y.std()) if y.size else 0.0
        out.append((float(y.mean()) if y.size else 0.0, sd if sd > 1e-12 else 1.0))
    return out


def fit_models(log: ObservationLog, n_hyper_samples: int, rng):
    """One GP per (hyperparameter sample, objective), on standardized targets."""
    rng = as_rng(rng)
    scales = standardize_scales(log)
    # every objective's chain starts from the same seed so that identical
    # objectives get identical hyperparameter draws (exact tie-breaking)
    chain_seed = int(rng.integers(2**63))
    draws = []
    for k in range(log.n_objectives):
        t = (log.ys[k] - scales[k][0]) / scales[k][1]
        draws.append(gpmod.sample_hyperparams(
            log.xs[k], t, n_hyper_samples, np.random.default_rng(chain_seed),
            dim=log.dim))
    models = []
    for h in range(n_hyper_samples):
        row = []
        for k in range(log.n_objectives):
            t = (log.ys[k] - scales[k][0]) / scales[k][1]
            row.append(gpmod.fit(log.xs[k], t, draws[k][h]))
        models.append(row)
    return models, scales


def initial_design(state: RunState, evaluate, n: int | None = None):
    """Low-discrepancy seeding with all objectives evaluated at every point."""
    n = state.config.n_initial if n is None else n
    pts = state.domain.from_unit(sobol_points(n, state.domain.dim, state.rng))
    for x in pts:
        state.log.add_coupled(x, evaluate(x))


def maximize_acquisition(acq, domain: Box, rng, n_grid: int = 1000,
                         n_starts: int = 5, return_ranked: bool = False):
    """Grid seeding plus quasi-Newton polishing of the best grid points.

    ``acq`` maps a (B, d) batch to (B,) scores to maximize.  Gradients are
    central finite differences with step 1e-4 of the box width, and iterates
    are kept inside the box by L-BFGS-B bounds.
    """
    rng = as_rng(rng)
    grid = domain.from_unit(sobol_points(n_grid, domain.dim, rng))
    vals = np.asarray(acq(grid), dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        raise RuntimeError("acquisition returned no finite values on the grid")
    vals = np.where(finite, vals, -np.inf)
    starts = grid[np.argsort(vals)[::-1][:n_starts]]
    step = 1e-4 * domain.width

    def neg_with_grad(x):
        pts = np.vstack([x[None, :],
                         x[None, :] + np.diag(step),
                         x[None, :] - np.diag(step)])
        v = np.asarray(acq(pts), dtype=float)
        g = (v[1:1 + domain.dim] - v[1 + domain.dim:]) / (2.0 * step)
        if not np.all(np.isfinite(v)):
            return np.inf, np.zeros_like(x)
        return -v[0], -g

    ranked = []
    bounds = list(zip(domain.lo, domain.hi))
    for x0 in starts:
        res = minimize(neg_with_grad, x0, jac=True, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": 50})
        x = domain.clip(res.x)
        ranked.append((float(np.asarray(acq(x[None, :]))[0]), x))
    ranked.sort(key=lambda t: -t[0])
    if return_ranked:
        return [x for _, x in ranked]
    return ranked[0][1]


def pesmo_contexts(state: RunState):
    """S Pareto-sample EP contexts per hyperparameter sample, plus per-sample
    observation-noise variances.  Failed EP runs become None entries."""
    cfg = state.config
    x_hat = state.log.union_inputs()
    contexts, noise = [], []
    for gps in state.models:
        row = []
        for _ in range(cfg.n_pareto_samples):
            ps = sample_pareto_set(gps, state.rng, cfg.sampler)
            try:
                row.append(run_ep(gps, ps.inputs, x_hat, cfg.ep))
            except EPFailure:
                row.append(None)
        contexts.append(row)
        noise.append(np.array([g.hyperparams.noise_variance for g in gps]))
    if all(c is None for row in contexts for c in row):
        raise EPFailure("every EP context failed")
    return contexts, noise


def _averaged_predict(models):
    """Hyperparameter-mixture predictive moments as a batch callable."""
    def predict_fn(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K = len(models[0])
        ms = np.zeros((len(models), X.shape[0], K))
        vs = np.zeros_like(ms)
        for h, gps in enumerate(models):
            for k, g in enumerate(gps):
                m, v = gpmod.predict(g, X)
                ms[h, :, k] = m
                vs[h, :, k] = v + g.hyperparams.noise_variance
        mean = ms.mean(axis=0)
        var = vs.mean(axis=0) + ms.var(axis=0)
        return mean, var
    return predict_fn


def _standardized_front(state: RunState):
    _, Y = state.log.coupled_inputs()
    scales = standardize_scales(state.log)
    Ystd = (Y - np.array([s[0] for s in scales])) / np.array([s[1] for s in scales])
    front = FrontSet(Ystd[non_dominated_mask(Ystd)])
    reference = Ystd.max(axis=0) + 1.0
    return front, reference


def _coupled_acquisition(state: RunState):
    """The batch acquisition callable for the configured coupled method."""
    cfg = state.config
    if cfg.method in ("pesmo", "pesmo_decoupled"):
        contexts, noise = pesmo_contexts(state)
        return lambda X: acquisition_batch(contexts, X, noise).sum(axis=1)
    if cfg.method == "parego":
        return baselines.parego_acquisition(state.log, cfg.n_hyper_samples,
                                            state.rng)
    front, reference = _standardized_front(state)
    predict_fn = _averaged_predict(state.models)
    if cfg.method == "smsego":
        return lambda X: baselines.smsego_acquisition(predict_fn, front, X,
                                                      reference)
    if cfg.method == "ehi":
        return lambda X: baselines.ehi_acquisition(predict_fn, front, X,
                                                   reference)
    if cfg.method == "sur":
        Z = baselines.sur_integration_points(state.domain.dim, state.rng)
        Z = state.domain.from_unit(Z)
        gps = state.models[0]
        nv = np.array([g.hyperparams.noise_variance for g in gps])
        return lambda X: baselines.sur_acquisition(gps, front, X, Z,
                                                   noise_variances=nv)
    raise ValueError(cfg.method)


def step_coupled(state: RunState, evaluate) -> RunState:
    """Refit, maximize the configured acquisition, evaluate all objectives.

    ``evaluate`` maps a point to a length-K observation vector.  An
    evaluation failure moves on to the next-best refined start.
    """
    cfg = state.config
    if cfg.method == "random":
        x = baselines.random_acquisition(state.domain, state.rng)
        state.log.add_coupled(x, evaluate(x))
        return state
    state.models, state.scales = fit_models(state.log, cfg.n_hyper_samples,
                                            state.rng)
    acq = _coupled_acquisition(state)
    ranked = maximize_acquisition(acq, state.domain, state.rng, cfg.n_grid,
                                  cfg.n_starts, return_ranked=True)
    last_err = None
    for x in ranked:
        try:
            y = evaluate(x)
        except Exception as err:  # noqa: BLE001 - objective code is external
            last_err = err
            continue
        state.log.add_coupled(x, y)
        return state
    raise RuntimeError("all candidate evaluations failed") from last_err


def step_decoupled(state: RunState, evaluate_single) -> RunState:
    """Maximize each per-objective acquisition separately and evaluate only
    the objective with the largest maximum (ties to the lowest index)."""
    cfg = state.config
    if cfg.method not in ("pesmo", "pesmo_decoupled"):
        raise UnsupportedModeError(
            "decoupled stepping needs a per-objective decomposable acquisition")
    state.models, state.scales = fit_models(state.log, cfg.n_hyper_samples,
                                            state.rng)
    contexts, noise = pesmo_contexts(state)
    K = state.log.n_objectives
    best_x = []
    best_val = np.empty(K)
    # identical search grid per objective, so equal acquisitions tie exactly
    search_seed = int(state.rng.integers(2**63))
    for k in range(K):
        acq_k = lambda X, k=k: acquisition_batch(contexts, X, noise)[:, k]
        x = maximize_acquisition(acq_k, state.domain,
                                 np.random.default_rng(search_seed),
                                 cfg.n_grid, cfg.n_starts)
        best_x.append(x)
        best_val[k] = float(np.asarray(acq_k(x[None, :]))[0])
    k_star = int(np.argmax(best_val))
    state.log.add_single(k_star, best_x[k_star], evaluate_single(k_star,
                                                                best_x[k_star]))
    return state


def recommend(state: RunState, cap: int | None = None):
    """Pareto set of the hyperparameter-averaged posterior means.

    Returns (inputs, FrontSet) with objective values in the raw target scale.
    """
    if any(c == 0 for c in state.log.counts()):
        raise ValueError("need at least one observation per objective")
    if state.models is None:
        state.models, state.scales = fit_models(
            state.log, state.config.n_hyper_samples, state.rng)
    scales = state.scales or standardize_scales(state.log)
    mu0 = np.array([s[0] for s in scales])
    sd0 = np.array([s[1] for s in scales])

    def mean_fn(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K = state.log.n_objectives
        out = np.zeros((X.shape[0], K))
        for gps in state.models:
            for k, g in enumerate(gps):
                out[:, k] += gpmod.predict(g, X)[0]
        return mu0 + sd0 * out / len(state.models)

    cfg = state.config.sampler
    d = state.domain.dim
    if d <= cfg.grid_dim_threshold:
        Xu = sobol_points(cfg.grid_points_per_dim * d, d, state.rng)
        X = state.domain.from_unit(Xu)
        F = mean_fn(X)
    else:
        from .nsga2 import nsga2_minimize
        Xu, F = nsga2_minimize(lambda Z: mean_fn(state.domain.from_unit(Z)),
                               d, state.rng, pop_size=cfg.nsga_pop,
                               n_generations=cfg.nsga_generations)
        X = state.domain.from_unit(Xu)
    mask = non_dominated_mask(F)
    X, F = X[mask], F[mask]
    cap = state.config.recommend_cap if cap is None else cap
    if X.shape[0] > cap:
        ps = subsample_representative(X, F, cap)
        X, F = ps.inputs, ps.values
    return X, FrontSet(F)
