"""Experiment orchestration and CSV/metadata persistence.

Each run writes plot-ready CSV series plus a ``metadata.json`` holding the
resolved configuration, seeds, graph quantities and every bound, so any
artifact can be regenerated bit for bit.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np

from . import __version__
from .bounds import compute_bounds_report, log_violation
from .config import ExperimentConfig, NoiseConfig
from .consensus import (
    Trajectory,
    map_trials,
    run_noisy_max,
    run_sma_baseline,
    run_two_phase,
    second_run_length,
    settling_iteration,
    soft_max,
    trajectory_statistics,
    trial_streams,
)
from .errors import DomainError
from .graph import Graph, degree_histogram, diameter, spectral_radius
from .models import BoundsReport, NoiseFamily
from .noise import NoiseModel

logger = logging.getLogger(__name__)

SMA_LABEL = "baseline-surrogate"
ROBUST_DEFAULT_RANGE = (100.0, 200.0)

STATS_COLUMNS = {
    "t": "iteration index",
    "mean": "mean state across nodes",
    "min": "smallest node state",
    "max": "largest node state",
    "std": "population standard deviation of node states",
}

BOUND_COLUMNS = {
    "n_nodes": "number of nodes N",
    "rho": "spectral radius of the adjacency matrix",
    "p": "edge erasure probability",
    "family": "noise family",
    "variance": "noise variance",
    "upper_ldp": "large-deviation upper bound: smallest x with sup_beta H(beta) + beta log(rho(1-p)) - beta I(x/beta) < 0",
    "beta_star": "maximising beta of the large-deviation objective at the bound",
    "upper_gaussian_closed": "Gaussian closed form sup_beta sigma sqrt(2 beta (H(beta) + beta log(rho(1-p))))",
    "upper_alternative": "alternative upper bound: root of I(x) = log(rho(1-p) + 1)",
    "upper_mgf_direct": "MGF-direct upper bound: inf_gamma log(1 + rho(1-p) M(gamma)) / gamma",
    "phi": "empirical correction 1 - 1/(2 sqrt(N))",
    "upper_empirical": "phi times upper_ldp",
    "lower": "greedy-path lower bound sum_i (d_i/2E) E[m_plus(Z_i)], Z_i ~ Binomial(d_i, 1-p)",
    "lower_quantile": "regular graphs: F^-1(d/(d+1))",
}


@dataclass(frozen=True)
class Series:
    """One plotted curve: named columns over rows of numbers."""

    columns: dict[str, str]
    rows: np.ndarray
    label: str | None = None


@dataclass(frozen=True)
class FigureRecipe:
    """A reproducible figure: what to simulate and which series to emit."""

    recipe_id: str
    kind: Literal["bounds", "robust", "sma"]
    description: str
    series: tuple[str, ...]
    family: NoiseFamily | None = None
    p: float | None = None

    def configure(self, cfg: ExperimentConfig) -> ExperimentConfig:
        updates: dict[str, Any] = {}
        if self.family is not None:
            updates["noise"] = NoiseConfig(family=self.family, variance=cfg.noise.variance)
        if self.p is not None:
            updates["p"] = self.p
        return cfg.model_copy(update=updates)


_BOUNDS_SERIES = ("growth_per_node", "lower", "upper_ldp", "upper_empirical", "mean_slope")
_ROBUST_SERIES = ("conventional", "robust", "lambda_hat")

RECIPES: dict[str, FigureRecipe] = {
    r.recipe_id: r
    for r in (
        FigureRecipe("bounds-fixed", "bounds", "Gaussian noise on a fixed graph: bounds against Monte Carlo growth", _BOUNDS_SERIES, NoiseFamily.GAUSSIAN, 0.0),
        FigureRecipe("bounds-random", "bounds", "Gaussian noise with edge erasures p=0.5", _BOUNDS_SERIES, NoiseFamily.GAUSSIAN, 0.5),
        FigureRecipe("bounds-laplace", "bounds", "Laplace noise on a fixed graph", _BOUNDS_SERIES, NoiseFamily.LAPLACE, 0.0),
        FigureRecipe("bounds-uniform", "bounds", "Uniform noise on a fixed graph", _BOUNDS_SERIES, NoiseFamily.UNIFORM, 0.0),
        FigureRecipe("robust-fixed", "robust", "Robust versus conventional max consensus, fixed graph", _ROBUST_SERIES, p=0.0),
        FigureRecipe("robust-random", "robust", "Robust versus conventional max consensus, p=0.5", _ROBUST_SERIES, p=0.5),
        FigureRecipe("sma-comparison", "sma", "Robust max consensus against the soft-max consensus surrogate", ("robust", "sma")),
    )
}


def get_recipe(recipe: FigureRecipe | str) -> FigureRecipe:
    if isinstance(recipe, FigureRecipe):
        return recipe
    try:
        return RECIPES[recipe]
    except KeyError:
        raise DomainError(f"Unknown figure {recipe!r}; expected one of {sorted(RECIPES)}.")


# Formatting


def format_value(value: Any) -> str:
    """17 significant digits, '.' decimal point, '-inf' for the semiring zero."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def write_rows(path: Path, header: Sequence[str], rows, preamble: Sequence[str] = ()) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        for line in preamble:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_series(directory: Path, name: str, series: Series) -> Path:
    return write_rows(directory / f"{name}.csv", list(series.columns), series.rows.tolist())


def write_bounds_csv(report: BoundsReport, path: Path) -> Path:
    """One-row CSV of a bounds report, preceded by '# column: formula' comment lines."""
    data = report.model_dump()
    preamble = [f"{name}: {meaning}" for name, meaning in BOUND_COLUMNS.items()]
    return write_rows(path, list(BOUND_COLUMNS), [[data[k] for k in BOUND_COLUMNS]], preamble)


def write_metadata(directory: Path, metadata: dict) -> Path:
    path = directory / "metadata.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def graph_summary(g: Graph, rho: float | None = None) -> dict:
    return {
        "n_nodes": g.n_nodes,
        "edge_count": g.edge_count,
        "rho": spectral_radius(g) if rho is None else rho,
        "diameter": diameter(g),
        "degree_histogram": {str(k): v for k, v in degree_histogram(g).items()},
    }


def base_metadata(cfg: ExperimentConfig, g: Graph, report: BoundsReport, command: str) -> dict:
    return {
        "version": __version__,
        "command": command,
        "config": cfg.model_dump(mode="json"),
        "seed": cfg.seed,
        "graph": graph_summary(g, report.rho),
        "phi": report.phi,
        "bounds": report.model_dump(mode="json"),
        "bound_columns": BOUND_COLUMNS,
    }


def initial_state(bounds: tuple[float, float], n_nodes: int, seed: int) -> np.ndarray:
    """Evenly spaced measurements over ``bounds`` in seeded random node order.

    The largest value is exactly the upper end of the range.
    """
    lo, hi = bounds
    return np.random.default_rng(seed).permutation(np.linspace(lo, hi, n_nodes))


def _stats_series(trajectory: Trajectory, label: str | None = None) -> Series:
    return Series(STATS_COLUMNS, trajectory_statistics(trajectory), label)


# Recipe builders


def _bounds_series(cfg: ExperimentConfig, g: Graph, model: NoiseModel, report: BoundsReport):
    n, t_max = g.n_nodes, cfg.t_max

    def trial(rng: np.random.Generator):
        run = run_noisy_max(g, np.zeros(n), model, cfg.p, t_max, rng)
        return run.final / t_max, run.states.mean(axis=1)

    logger.info("Monte Carlo growth: %d trials of %d iterations", cfg.trials, t_max)
    results = map_trials(trial, cfg.trials, cfg.seed, cfg.threads)
    lam = np.vstack([r[0] for r in results])
    mean_path = np.vstack([r[1] for r in results]).mean(axis=0)

    nodes = np.arange(n, dtype=float)
    ddof = 1 if cfg.trials > 1 else 0
    t = np.arange(1, t_max + 1, dtype=float)

    def horizontal(value: float) -> Series:
        return Series({"node": "node index", "value": "bound value"}, np.column_stack([nodes, np.full(n, value)]))

    series = {
        "growth_per_node": Series(
            {
                "node": "node index",
                "lambda_hat": "trial mean of x_i(t_max)/t_max",
                "lambda_hat_variance": "variance of x_i(t_max)/t_max across trials",
            },
            np.column_stack([nodes, lam.mean(axis=0), lam.var(axis=0, ddof=ddof)]),
        ),
        "lower": horizontal(report.lower),
        "upper_ldp": horizontal(report.upper_ldp),
        "upper_empirical": horizontal(report.upper_empirical),
        "mean_slope": Series(
            {"t": "iteration index", "mean_state": "trial mean of the network-mean state", "slope": "mean_state / t"},
            np.column_stack([t, mean_path[1:], mean_path[1:] / t]),
        ),
    }
    network_means = lam.mean(axis=1)
    estimate = float(network_means.mean())
    stderr = float(network_means.std(ddof=ddof) / np.sqrt(cfg.trials))
    violated = log_violation(estimate, report.upper_empirical)
    extra = {"growth": {"mean": estimate, "stderr": stderr, "exceeds_upper_empirical": violated}}
    return series, extra


def _mean_states(runs: Sequence[np.ndarray]) -> Series:
    """Statistics of the trial-mean trajectory."""
    mean = np.mean(np.stack(runs), axis=0)
    return Series(STATS_COLUMNS, trajectory_statistics(Trajectory(states=mean, config_fingerprint="")))


def _robust_series(cfg: ExperimentConfig, g: Graph, model: NoiseModel, report: BoundsReport):
    d = diameter(g)
    t2 = second_run_length(g, cfg.t2)
    horizon = cfg.horizon or max(30, t2)
    x0 = initial_state(cfg.initial_range or ROBUST_DEFAULT_RANGE, g.n_nodes, cfg.seed)
    conventional_rng, robust_rng = trial_streams(cfg.seed, 2)

    logger.info("Robust comparison: horizon=%d t_max=%d t2=%d diameter=%d", horizon, cfg.t_max, t2, d)
    conventional = run_noisy_max(g, x0, model, cfg.p, horizon, conventional_rng)
    robust = run_two_phase(g, x0, model, cfg.p, cfg.t_max, t2, robust_rng)

    series = {
        "conventional": _stats_series(conventional),
        "robust": _stats_series(robust.compensated),
        "lambda_hat": Series(
            {"node": "node index", "lambda_hat": "first-run estimate x_i(t_max)/t_max"},
            np.column_stack([np.arange(g.n_nodes, dtype=float), robust.lambda_hat]),
        ),
    }
    true_max = float(x0.max())
    extra = {
        "true_max": true_max,
        "horizon": horizon,
        "t2": t2,
        "robust_final_mean": float(robust.compensated.final.mean()),
        "conventional_final_mean": float(conventional.final.mean()),
    }
    return series, extra


def _sma_series(cfg: ExperimentConfig, g: Graph, model: NoiseModel, report: BoundsReport):
    t2 = second_run_length(g, cfg.t2)
    steps = cfg.sma_horizon
    d = diameter(g)
    if steps < d:
        raise DomainError(f"sma_horizon={steps} is shorter than the diameter {d}.")
    x0 = initial_state(cfg.sma_initial_range, g.n_nodes, cfg.seed)
    true_max = float(x0.max())
    seeds = np.random.SeedSequence(cfg.seed).generate_state(1 + len(cfg.sma_betas))

    logger.info("Soft-max comparison: %d trials, t2=%d, sma_horizon=%d", cfg.trials, t2, steps)
    robust_runs = map_trials(
        lambda rng: run_two_phase(g, x0, model, cfg.p, cfg.t_max, t2, rng).compensated.states,
        cfg.trials,
        int(seeds[0]),
        cfg.threads,
    )
    robust = _mean_states(robust_runs)
    robust_bias = float(robust.rows[-1, 1]) - true_max
    series = {"robust": robust}
    summary: dict[str, dict] = {"robust": {"final_bias": robust_bias, "iterations": t2, "trials": cfg.trials}}

    for beta, seed in zip(cfg.sma_betas, seeds[1:]):
        name = f"sma_beta_{beta:g}"
        runs = map_trials(
            lambda rng, beta=beta: run_sma_baseline(g, x0, model, beta, steps, rng, cfg.p, cfg.sma_transmit_scale).states,
            cfg.trials,
            int(seed),
            cfg.threads,
        )
        stats = _mean_states(runs).rows
        mean_series = stats[:, 1]
        tail = max(1, int(np.ceil(0.1 * mean_series.size)))
        plateau = float(mean_series[-tail:].mean())
        series[name] = Series(STATS_COLUMNS, stats, SMA_LABEL)
        summary[name] = {
            "label": SMA_LABEL,
            "beta": beta,
            "soft_max": soft_max(x0, beta),
            "plateau": plateau,
            "plateau_bias": plateau - true_max,
            "settling_iteration": settling_iteration(mean_series),
        }
    sma_biases = [abs(summary[f"sma_beta_{b:g}"]["plateau_bias"]) for b in cfg.sma_betas]
    summary["robust"]["smaller_than_sma"] = abs(robust_bias) < min(sma_biases)
    return series, {"true_max": true_max, "t2": t2, "comparison": summary}


_BUILDERS = {"bounds": _bounds_series, "robust": _robust_series, "sma": _sma_series}


def reproduce_figure(recipe: FigureRecipe | str, cfg: ExperimentConfig) -> dict[str, Path]:
    """Write every series of ``recipe`` under ``output_dir/recipe_id``; returns name -> path."""
    recipe = get_recipe(recipe)
    cfg = recipe.configure(cfg)
    logger.info("Reproducing %s: %s", recipe.recipe_id, recipe.description)

    g = cfg.graph.build()
    model = cfg.noise.build()
    report = compute_bounds_report(model, g, cfg.p)
    series, extra = _BUILDERS[recipe.kind](cfg, g, model, report)

    out = Path(cfg.output_dir) / recipe.recipe_id
    paths = {name: write_series(out, name, s) for name, s in series.items()}
    metadata = base_metadata(cfg, g, report, f"reproduce {recipe.recipe_id}")
    metadata["recipe"] = {"id": recipe.recipe_id, "description": recipe.description, "series": list(recipe.series)}
    metadata["series"] = {
        name: {"file": paths[name].name, "columns": s.columns, **({"label": s.label} if s.label else {})}
        for name, s in series.items()
    }
    metadata.update(extra)
    paths["metadata"] = write_metadata(out, metadata)
    return paths


# Single-command runs


def run_bounds(cfg: ExperimentConfig) -> tuple[BoundsReport, dict[str, Path]]:
    g = cfg.graph.build()
    report = compute_bounds_report(cfg.noise.build(), g, cfg.p)
    out = Path(cfg.output_dir) / "bounds"
    paths = {"bounds": write_bounds_csv(report, out / "bounds.csv")}
    paths["metadata"] = write_metadata(out, base_metadata(cfg, g, report, "bounds"))
    return report, paths


def run_simulate(cfg: ExperimentConfig) -> dict[str, Path]:
    """Per-iteration statistics of one uncompensated run of ``t_max`` steps."""
    g = cfg.graph.build()
    model = cfg.noise.build()
    report = compute_bounds_report(model, g, cfg.p)
    x0 = np.zeros(g.n_nodes) if cfg.initial_range is None else initial_state(cfg.initial_range, g.n_nodes, cfg.seed)
    (rng,) = trial_streams(cfg.seed, 1)
    trajectory = run_noisy_max(g, x0, model, cfg.p, cfg.t_max, rng)

    out = Path(cfg.output_dir) / "simulate"
    paths = {"simulate": write_series(out, "simulate", _stats_series(trajectory))}
    metadata = base_metadata(cfg, g, report, "simulate")
    metadata["fingerprint"] = trajectory.config_fingerprint
    metadata["series"] = {"simulate": {"file": "simulate.csv", "columns": STATS_COLUMNS}}
    paths["metadata"] = write_metadata(out, metadata)
    return paths


def run_robust(cfg: ExperimentConfig) -> dict[str, Path]:
    """Both runs of the robust algorithm and the lambda_hat vector."""
    g = cfg.graph.build()
    model = cfg.noise.build()
    report = compute_bounds_report(model, g, cfg.p)
    x0 = initial_state(cfg.initial_range or ROBUST_DEFAULT_RANGE, g.n_nodes, cfg.seed)
    (rng,) = trial_streams(cfg.seed, 1)
    run = run_two_phase(g, x0, model, cfg.p, cfg.t_max, cfg.t2, rng)

    series = {
        "estimation": _stats_series(run.estimation),
        "compensated": _stats_series(run.compensated),
        "lambda_hat": Series(
            {"node": "node index", "lambda_hat": "first-run estimate x_i(t_max)/t_max"},
            np.column_stack([np.arange(g.n_nodes, dtype=float), run.lambda_hat]),
        ),
    }
    out = Path(cfg.output_dir) / "robust"
    paths = {name: write_series(out, name, s) for name, s in series.items()}
    metadata = base_metadata(cfg, g, report, "robust")
    metadata["true_max"] = float(x0.max())
    metadata["final_bias"] = float(run.compensated.final.mean() - x0.max())
    metadata["series"] = {name: {"file": f"{name}.csv", "columns": s.columns} for name, s in series.items()}
    paths["metadata"] = write_metadata(out, metadata)
    return paths
