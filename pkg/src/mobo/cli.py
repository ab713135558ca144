"""Command-line interface: experiments, EP validation, hypervolume, plots."""

from __future__ import annotations

import csv
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bench import ExperimentConfig, emit_outputs, load_config_file, run_experiment
from .pareto import FrontSet, hypervolume, non_dominated_mask
from . import plots


@click.group()
@click.version_option(__version__)
def main():
    """Multi-objective Bayesian optimization experiments."""


def _merged_config(config_path, overrides: dict) -> ExperimentConfig:
    base = load_config_file(config_path) if config_path else {}
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    return ExperimentConfig(**base)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Config file; flags override its values.")
@click.option("--method", type=str, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--objectives", "n_objectives", type=int, default=None)
@click.option("--noise-sd", type=float, default=None)
@click.option("--budget", type=int, default=None)
@click.option("--reps", "repetitions", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--decoupled/--coupled", default=None)
@click.option("--hyper-samples", "n_hyper_samples", type=int, default=None)
@click.option("--pareto-samples", "n_pareto_samples", type=int, default=None)
@click.option("--mixed-problem/--plain-problem", default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def run(config_path, **overrides):
    """Run a seeded experiment and write results, manifest, and figures."""
    cfg = _merged_config(config_path, overrides)
    rows, states, failures = run_experiment(cfg)
    paths = emit_outputs(cfg, rows, states, failures, cfg.out_dir)
    agg = plots.aggregate_results([{k: str(v) for k, v in r.items()}
                                   for r in rows])
    fig_path = Path(cfg.out_dir) / "convergence.png"
    plots.plot_convergence(agg, fig_path)
    paths["figure"] = str(fig_path)
    for name, path in sorted(paths.items()):
        click.echo(f"{name}: {path}")
    if failures:
        raise SystemExit(1)


@main.command("validate-ep")
@click.option("--seed", type=int, default=0)
@click.option("--observations", "n_obs", type=int, default=5)
@click.option("--grid-size", type=int, default=100)
@click.option("--pareto-samples", "n_pareto_samples", type=int, default=10)
@click.option("--mc-draws", "n_funcs", type=int, default=20000)
@click.option("--out", "out_dir", type=click.Path(), default="ep_validation")
def validate_ep(seed, n_obs, grid_size, n_pareto_samples, n_funcs, out_dir):
    """Compare the EP acquisition against the sampling oracle on a 1-D
    problem; write the curve table and an overlay figure."""
    from .validate import ep_oracle_comparison
    v = ep_oracle_comparison(seed=seed, n_obs=n_obs, grid_size=grid_size,
                             n_pareto_samples=n_pareto_samples,
                             n_funcs=n_funcs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "ep_vs_oracle.csv"
    K = v.ep_curves.shape[1]
    header = (["x"] + [f"ep_obj{k + 1}" for k in range(K)]
              + [f"mc_obj{k + 1}" for k in range(K)])
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, x in enumerate(v.grid):
            writer.writerow([x, *v.ep_curves[i], *v.mc_curves[i]])
    fig = out / "ep_vs_oracle.png"
    plots.plot_ep_validation(v.grid, v.ep_curves, v.mc_curves, fig)
    click.echo(f"table: {table}")
    click.echo(f"figure: {fig}")
    click.echo(f"spearman_total: {v.spearman_total:.4f}")
    for k in range(K):
        click.echo(f"spearman_obj{k + 1}: "
                   f"{v.spearman_per_objective[k]:.4f}")
    click.echo(f"argmax_cells_total: {v.argmax_distance_total}")


@main.command()
@click.argument("points_file", type=click.Path(exists=True))
@click.option("--reference", required=True,
              help="Comma-separated reference point, e.g. '1.0,1.0'.")
@click.option("--plot", "plot_path", type=click.Path(), default=None,
              help="Also render the front to this image path.")
def hv(points_file, reference, plot_path):
    """Hypervolume of the non-dominated rows of a delimited point file."""
    pts = np.loadtxt(points_file, delimiter=",", ndmin=2)
    ref = np.array([float(t) for t in reference.split(",")])
    if pts.shape[1] != ref.shape[0]:
        raise click.UsageError("reference dimension mismatch")
    front = FrontSet(pts[non_dominated_mask(pts)])
    val = hypervolume(front, ref, rng=np.random.default_rng(0))
    click.echo(f"hypervolume: {val:.10g}")
    if plot_path:
        plots.plot_front(front.points, plot_path, reference=ref)
        click.echo(f"figure: {plot_path}")


@main.command("plot-data")
@click.argument("results_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default="plots")
def plot_data(results_file, out_dir):
    """Aggregate a results table into mean curves and render the figure."""
    rows = plots.read_results(results_file)
    agg = plots.aggregate_results(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "aggregate.csv"
    plots.write_aggregate(agg, table)
    fig = out / "convergence.png"
    plots.plot_convergence(agg, fig)
    click.echo(f"table: {table}")
    click.echo(f"figure: {fig}")


if __name__ == "__main__":
    main()
