"""Synthetic benchmark problems, experiment orchestration, and metrics."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import __version__, gp as gpmod
from .ep import EPConfig
from .gp import KernelHyperparams
from .loop import (LoopConfig, METHODS, RunState, initial_design, recommend,
                   step_coupled, step_decoupled)
from .observations import ObservationLog
from .pareto import FrontSet, hypervolume, log_relative_hv_diff, non_dominated_mask
from .pareto_sampling import SamplerConfig
from .util import unit_box, sobol_points

CHECKPOINT_VERSION = 1

PROBLEM_LENGTHSCALE = 0.3
PROBLEM_AMPLITUDE = 1.0


@dataclass
class ExperimentConfig:
    method: str = "pesmo"
    dim: int = 3
    n_objectives: int = 2
    noise_sd: float = 0.0
    budget: int = 50
    repetitions: int = 1
    seed: int = 0
    decoupled: bool = False
    n_hyper_samples: int = 10
    n_pareto_samples: int = 10
    n_initial: int = 5
    n_grid: int = 1000
    n_starts: int = 5
    pareto_max_points: int = 50
    pareto_grid_points_per_dim: int = 1000
    rff_features: int = 500
    nsga_pop: int = 100
    nsga_generations: int = 100
    mixed_problem: bool = False
    out_dir: str = "results"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.budget < self.n_initial:
            raise ValueError("budget must cover the initial design")
        if self.n_objectives < 1 or self.dim < 1:
            raise ValueError("dim and n_objectives must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def loop_config(self) -> LoopConfig:
        method = self.method
        if method == "pesmo" and self.decoupled:
            method = "pesmo_decoupled"
        return LoopConfig(
            method=method,
            n_hyper_samples=self.n_hyper_samples,
            n_pareto_samples=self.n_pareto_samples,
            n_grid=self.n_grid,
            n_starts=self.n_starts,
            n_initial=self.n_initial,
            sampler=SamplerConfig(
                grid_points_per_dim=self.pareto_grid_points_per_dim,
                max_points=self.pareto_max_points,
                n_features=self.rff_features,
                nsga_pop=self.nsga_pop,
                nsga_generations=self.nsga_generations),
            ep=EPConfig(),
        )


@dataclass
class SyntheticProblem:
    """Exactly evaluable objectives with a cached true front."""

    functions: list                  # batch callables (B, d) -> (B,)
    dim: int
    n_objectives: int
    seed: int
    grid: np.ndarray                 # dense evaluation cache, inputs
    grid_values: np.ndarray          # (n, K)
    true_front: FrontSet
    reference: np.ndarray
    hv_true: float

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([f(x) for f in self.functions], axis=1)[0] \
            if x.shape[0] == 1 else \
            np.stack([f(x) for f in self.functions], axis=1)

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([f(X) for f in self.functions], axis=1)

    def densify(self, extra_inputs: np.ndarray):
        """Fold additional true evaluations into the front cache."""
        vals = self.evaluate_batch(extra_inputs)
        allv = np.vstack([self.grid_values, vals])
        self.grid = np.vstack([self.grid, np.atleast_2d(extra_inputs)])
        self.grid_values = allv
        self.true_front = FrontSet(allv[non_dominated_mask(allv)])
        self.hv_true = float(np.asarray(
            hypervolume(self.true_front, self.reference)).ravel()[0])


def _prior_sample_fn(d: int, rng, n_features: int = 1000,
                     lengthscale: float = PROBLEM_LENGTHSCALE,
                     amplitude: float = PROBLEM_AMPLITUDE):
    hp = KernelHyperparams(lengthscales=np.full(d, lengthscale),
                           amplitude=amplitude, noise_variance=0.0)
    prior = gpmod.fit(np.zeros((0, d)), np.zeros(0), hp)
    fs = gpmod.draw_posterior_function(prior, n_features, rng)
    return lambda X: gpmod.eval_feature_sample(fs, X)


def _finish_problem(functions, d, K, seed, rng,
                    grid_size: int | None = None) -> SyntheticProblem:
    n = grid_size if grid_size is not None else d * 10_000
    grid = sobol_points(n, d, rng)
    vals = np.stack([f(grid) for f in functions], axis=1)
    front = FrontSet(vals[non_dominated_mask(vals)])
    span = vals.max(axis=0) - vals.min(axis=0)
    reference = vals.max(axis=0) + 0.1 * np.where(span > 0, span, 1.0)
    hv = float(np.asarray(hypervolume(front, reference)).ravel()[0])
    return SyntheticProblem(functions, d, K, seed, grid, vals, front,
                            reference, hv)


def generate_problem(d: int, k_obj: int, seed: int,
                     n_features: int = 1000,
                     grid_size: int | None = None) -> SyntheticProblem:
    """K independent draws from a stationary prior, via random features."""
    rng = np.random.default_rng(seed)
    functions = [_prior_sample_fn(d, rng, n_features) for _ in range(k_obj)]
    return _finish_problem(functions, d, k_obj, seed, rng, grid_size)


def generate_mixed_problem(d: int, seed: int, n_features: int = 1000,
                           grid_size: int | None = None) -> SyntheticProblem:
    """Two nonlinear prior-sample objectives plus two linear objectives.

    The linear pair is cheap for a model to learn, so a decoupled optimizer
    should concentrate evaluations on the first two (hard) objectives.
    """
    rng = np.random.default_rng(seed)
    functions = [_prior_sample_fn(d, rng, n_features) for _ in range(2)]
    for _ in range(2):
        w = rng.normal(0.0, 1.0, d)
        w *= 1.0 / np.linalg.norm(w)
        b = rng.normal(0.0, 0.1)
        functions.append(lambda X, w=w, b=b: np.atleast_2d(X) @ w + b)
    return _finish_problem(functions, d, 4, seed, rng, grid_size)


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


def _metric_row(cfg, seed, state, problem) -> dict:
    t0 = time.perf_counter()
    X_rec, _ = recommend(state)
    true_vals = problem.evaluate_batch(X_rec)
    rec_front = FrontSet(true_vals[non_dominated_mask(true_vals)])
    hv_rec = float(np.asarray(
        hypervolume(rec_front, problem.reference)).ravel()[0])
    if hv_rec > problem.hv_true:
        problem.densify(X_rec)
        hv_rec = min(hv_rec, problem.hv_true)
    row = {
        "method": cfg.method + ("_decoupled" if cfg.decoupled else ""),
        "seed": seed,
        "iteration": state.log.iterations,
    }
    counts = state.log.counts()
    for k in range(cfg.n_objectives):
        row[f"evals_obj{k + 1}"] = int(counts[k])
    row["hv_rec"] = hv_rec
    row["log_rel_hv_diff"] = log_relative_hv_diff(problem.hv_true, hv_rec)
    row["wall_ms"] = (time.perf_counter() - t0) * 1000.0
    return row


def run_repetition(cfg: ExperimentConfig, seed: int,
                   problem: SyntheticProblem | None = None,
                   metrics_every: int = 1) -> tuple[list[dict], RunState]:
    """One seeded optimization run; returns metric rows and the final state."""
    if problem is None:
        problem = (generate_mixed_problem(cfg.dim, seed) if cfg.mixed_problem
                   else generate_problem(cfg.dim, cfg.n_objectives, seed))
    rng = np.random.default_rng(seed)
    state = RunState(domain=unit_box(cfg.dim),
                     log=ObservationLog(dim=cfg.dim,
                                        n_objectives=cfg.n_objectives),
                     rng=rng, config=cfg.loop_config())

    def noisy(x):
        y = problem.evaluate(np.atleast_2d(x))
        y = y[0] if y.ndim == 2 else y
        if cfg.noise_sd > 0:
            y = y + rng.normal(0.0, cfg.noise_sd, cfg.n_objectives)
        return y

    def noisy_single(k, x):
        return float(noisy(x)[k])

    initial_design(state, noisy)
    rows = [_metric_row(cfg, seed, state, problem)]
    while state.log.iterations < cfg.budget:
        if cfg.decoupled:
            step_decoupled(state, noisy_single)
        else:
            step_coupled(state, noisy)
        done = state.log.iterations >= cfg.budget
        if done or (state.log.iterations - cfg.n_initial) % metrics_every == 0:
            rows.append(_metric_row(cfg, seed, state, problem))
    return rows, state


def run_experiment(cfg: ExperimentConfig, metrics_every: int = 1):
    """All repetitions; failures are recorded per seed, never hidden."""
    all_rows, states, failures = [], {}, {}
    for r in range(cfg.repetitions):
        seed = cfg.seed + r
        try:
            rows, state = run_repetition(cfg, seed, metrics_every=metrics_every)
        except Exception as err:  # noqa: BLE001 - surfaced in the manifest
            failures[seed] = repr(err)
            import warnings
            warnings.warn(f"repetition seed={seed} failed: {err!r}")
            continue
        all_rows.extend(rows)
        states[seed] = state
    return all_rows, states, failures


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def result_header(k_obj: int) -> list[str]:
    return (["method", "seed", "iteration"]
            + [f"evals_obj{k + 1}" for k in range(k_obj)]
            + ["hv_rec", "log_rel_hv_diff", "wall_ms"])


def emit_outputs(cfg: ExperimentConfig, rows: list[dict], states: dict,
                 failures: dict, out_dir) -> dict:
    """Write results.csv, manifest.yaml, and per-seed checkpoints."""
    from pathlib import Path
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = result_header(cfg.n_objectives)
    csv_path = out / "results.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    manifest = {
        "library_version": __version__,
        "config": asdict(cfg),
        "failures": failures,
        "problem_prior": {"lengthscale": PROBLEM_LENGTHSCALE,
                          "amplitude": PROBLEM_AMPLITUDE},
    }
    manifest_path = out / "manifest.yaml"
    with open(manifest_path, "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    paths = {"results": str(csv_path), "manifest": str(manifest_path)}
    for seed, state in states.items():
        p = out / f"checkpoint_seed{seed}.json"
        save_checkpoint(state, p)
        paths[f"checkpoint_seed{seed}"] = str(p)
    return paths


def load_config_file(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    return data


def save_checkpoint(state: RunState, path):
    payload = {
        "version": CHECKPOINT_VERSION,
        "log": state.log.to_dict(),
        "rng_state": state.rng.bit_generator.state,
        "method": state.config.method,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[ObservationLog, np.random.Generator, str]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version "
                         f"{payload.get('version')!r}")
    log = ObservationLog.from_dict(payload["log"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng_state"]
    return log, rng, payload["method"]
