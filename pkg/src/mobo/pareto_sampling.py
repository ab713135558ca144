"""Monte-Carlo sampling of Pareto sets from posterior function draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp as gpmod
from .gp import FeatureSample, GPPosterior
from .nsga2 import nsga2_minimize
from .pareto import non_dominated_mask
from .util import as_rng, sobol_points


@dataclass
class SamplerConfig:
    grid_dim_threshold: int = 4
    grid_points_per_dim: int = 1000
    max_points: int = 50
    n_features: int = 500
    nsga_pop: int = 100
    nsga_generations: int = 100


@dataclass(frozen=True)
class ParetoSample:
    """One Monte-Carlo draw of the Pareto set: inputs (M, d) and the sampled
    objective values (M, K), rows mutually non-dominated."""

    inputs: np.ndarray
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        inp = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        val = np.atleast_2d(np.asarray(self.values, dtype=float))
        if inp.shape[0] != val.shape[0] or inp.shape[0] < 1:
            raise ValueError("inconsistent Pareto sample")
        object.__setattr__(self, "inputs", inp)
        object.__setattr__(self, "values", val)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]


def subsample_representative(inputs, values, m: int) -> ParetoSample:
    """Greedy farthest-point subset of a candidate front in objective space.

    Starts from the extreme point of the first objective; objectives are
    normalized to [0, 1] before measuring distances.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    if n <= m:
        return ParetoSample(inputs, values)
    span = values.max(axis=0) - values.min(axis=0)
    span[span <= 0] = 1.0
    norm = (values - values.min(axis=0)) / span
    chosen = [int(np.argmin(values[:, 0]))]
    dist = np.linalg.norm(norm - norm[chosen[0]], axis=1)
    for _ in range(m - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(norm - norm[nxt], axis=1))
    idx = np.array(chosen)
    return ParetoSample(inputs[idx], values[idx])


def pareto_of_draws(draws: list[FeatureSample], X: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Non-dominated subset of the draws evaluated on candidate inputs X."""
    F = np.stack([gpmod.eval_feature_sample(fs, X) for fs in draws], axis=1)
    mask = non_dominated_mask(F)
    return X[mask], F[mask]


def sample_pareto_set(gps: list[GPPosterior], rng,
                      cfg: SamplerConfig | None = None,
                      draws: list[FeatureSample] | None = None) -> ParetoSample:
    """Draw one Pareto-set sample on the unit box.

    One posterior function draw per objective; the induced multi-objective
    problem is solved on a d*1000 low-discrepancy grid in low dimension, by
    NSGA-II otherwise, and the resulting front is subsampled to at most
    ``cfg.max_points`` representative points.
    """
    cfg = cfg or SamplerConfig()
    rng = as_rng(rng)
    d = gps[0].hyperparams.dim
    if any(g.hyperparams.dim != d for g in gps):
        raise ValueError("objectives disagree on input dimension")
    if draws is None:
        draws = [gpmod.draw_posterior_function(g, cfg.n_features, rng)
                 for g in gps]
    if d <= cfg.grid_dim_threshold:
        grid = sobol_points(d * cfg.grid_points_per_dim, d, rng)
        xs, vs = pareto_of_draws(draws, grid)
    else:
        fun = lambda X: np.stack(
            [gpmod.eval_feature_sample(fs, X) for fs in draws], axis=1)
        xs, vs = nsga2_minimize(fun, d, rng, pop_size=cfg.nsga_pop,
                                n_generations=cfg.nsga_generations)
    return subsample_representative(xs, vs, cfg.max_points)
