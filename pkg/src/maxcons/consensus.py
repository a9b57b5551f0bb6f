"""Noisy max consensus simulation, growth-rate estimation and the robust algorithm.

Every iteration draws a fresh edge realization and noise matrix, then
applies ``x(t+1) = W(t) (x) x(t) - c``. The robust algorithm runs twice:
once from zero to estimate each node's growth rate, then from the true
measurements with that estimate subtracted at every update.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .graph import Graph, diameter, sample_realization
from .maxplus import build_noise_matrix, propagate
from .models import ConsensusResult, GrowthEstimate, GrowthSummary
from .noise import NoiseModel

logger = logging.getLogger(__name__)

T = TypeVar("T")

MIN_VARIANCE_TRIALS = 100
PLATEAU_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States x_i(t) for t = 0..T of one run; row 0 is the initial vector."""

    states: np.ndarray = field(repr=False)
    config_fingerprint: str

    @property
    def t_count(self) -> int:
        return self.states.shape[0] - 1

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def config_fingerprint(g: Graph, model: NoiseModel, p: float, rng: np.random.Generator, **extra) -> str:
    """SHA-256 over graph edges, noise law, erasure probability and generator state."""
    payload = {
        "n_nodes": g.n_nodes,
        "edges": g.edges,
        "noise": model.describe(),
        "p": p,
        "rng": rng.bit_generator.state,
        **extra,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _check_run(g: Graph, x0: np.ndarray, steps: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.n_nodes,):
        raise DomainError(f"Initial state has shape {x0.shape}, expected ({g.n_nodes},).")
    if not np.isfinite(x0).all():
        raise DomainError("Initial measurements must be finite.")
    if steps < 1:
        raise DomainError(f"Iteration count must be at least 1, got {steps}.")
    return x0


def run_noisy_max(
    g: Graph,
    x0: np.ndarray,
    model: NoiseModel,
    p: float,
    steps: int,
    rng: np.random.Generator,
    compensation: float | np.ndarray | None = None,
    self_loop_noise: bool = False,
    erasure_penalty: float | None = None,
) -> Trajectory:
    """Iterate x_i <- max(x_i, max_j (x_j + v_ij)) - c_i over active edges."""
    x = _check_run(g, x0, steps)
    fingerprint = config_fingerprint(g, model, p, rng, self_loop_noise=self_loop_noise)
    offset = np.zeros(g.n_nodes) if compensation is None else np.broadcast_to(compensation, (g.n_nodes,))

    states = np.empty((steps + 1, g.n_nodes))
    states[0] = x
    for t in range(steps):
        realization = sample_realization(g, p, rng)
        w = build_noise_matrix(realization, model, rng, self_loop_noise, erasure_penalty)
        x = propagate(w, x) - offset
        states[t + 1] = x
    return Trajectory(states=states, config_fingerprint=fingerprint)


def estimate_growth_rate(
    g: Graph,
    model: NoiseModel,
    p: float,
    t_max: int,
    rng: np.random.Generator,
    self_loop_noise: bool = False,
) -> GrowthEstimate:
    """lambda_hat_i = x_i(t_max) / t_max from a zero-initialised, uncompensated run."""
    run = run_noisy_max(g, np.zeros(g.n_nodes), model, p, t_max, rng, self_loop_noise=self_loop_noise)
    lam = run.final / t_max
    stderr = float(lam.std(ddof=1) / np.sqrt(lam.size)) if lam.size > 1 else 0.0
    return GrowthEstimate(lambda_hat_per_node=lam.tolist(), t_max=t_max, mean=float(lam.mean()), stderr=stderr)


# Trial fan-out


def trial_streams(seed: int, trials: int) -> list[np.random.Generator]:
    """One independent generator per trial, derived from ``seed``."""
    if trials < 1:
        raise DomainError(f"Trial count must be at least 1, got {trials}.")
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def map_trials(
    fn: Callable[[np.random.Generator], T],
    trials: int,
    seed: int,
    threads: int | None = None,
) -> list[T]:
    """Apply ``fn`` to each trial stream; results come back in trial order."""
    streams = trial_streams(seed, trials)
    if not threads or threads <= 1:
        return [fn(rng) for rng in streams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, streams))


def growth_rate_trials(
    g: Graph,
    model: NoiseModel,
    p: float,
    t_max: int,
    trials: int,
    seed: int,
    threads: int | None = None,
) -> GrowthSummary:
    """Growth-rate estimates over independent trials."""
    logger.info("Estimating growth rate: N=%d %s p=%g t_max=%d trials=%d", g.n_nodes, model.describe(), p, t_max, trials)
    rows = map_trials(
        lambda rng: np.asarray(estimate_growth_rate(g, model, p, t_max, rng).lambda_hat_per_node),
        trials,
        seed,
        threads,
    )
    lam = np.vstack(rows)
    network_means = lam.mean(axis=1)
    ddof = 1 if trials > 1 else 0
    return GrowthSummary(
        per_node_mean=lam.mean(axis=0).tolist(),
        per_node_variance=lam.var(axis=0, ddof=ddof).tolist(),
        t_max=t_max,
        trials=trials,
        mean=float(network_means.mean()),
        stderr=float(network_means.std(ddof=ddof) / np.sqrt(trials)),
    )


# Robust two-run algorithm


@dataclass(frozen=True, eq=False)
class RobustRun:
    """Both runs of the robust algorithm and the per-node estimate they share."""

    estimation: Trajectory
    compensated: Trajectory
    lambda_hat: np.ndarray = field(repr=False)


def second_run_length(g: Graph, t2: int | None) -> int:
    """``t2``, defaulting to twice the diameter; never shorter than the diameter."""
    d = diameter(g)
    t2 = 2 * d if t2 is None else t2
    if t2 < d:
        raise DomainError(f"Second run needs at least diameter={d} iterations, got t2={t2}.")
    return t2


def run_two_phase(
    g: Graph,
    x0: np.ndarray,
    model: NoiseModel,
    p: float,
    t_max: int,
    t2: int | None,
    rng: np.random.Generator,
) -> RobustRun:
    """First run from zero for ``t_max`` steps, second from ``x0`` for ``t2`` steps.

    Each node subtracts its own estimate. Over longer second runs the
    finite-``t_max`` error of that estimate shows up as a slow drift.
    """
    t2 = second_run_length(g, t2)
    if t_max < 1:
        raise DomainError(f"t_max must be at least 1, got {t_max}.")
    x0 = _check_run(g, x0, t2)

    estimation = run_noisy_max(g, np.zeros(g.n_nodes), model, p, t_max, rng)
    lam = estimation.final / t_max
    compensated = run_noisy_max(g, x0, model, p, t2, rng, compensation=lam)
    return RobustRun(estimation=estimation, compensated=compensated, lambda_hat=lam)


def robust_max_consensus(
    g: Graph,
    x0: np.ndarray,
    model: NoiseModel,
    p: float,
    t_max: int,
    t2: int | None,
    rng: np.random.Generator,
) -> ConsensusResult:
    run = run_two_phase(g, x0, model, p, t_max, t2, rng)
    final = run.compensated.final
    true_max = float(np.max(x0))
    return ConsensusResult(
        final_estimates=final.tolist(),
        lambda_hat=run.lambda_hat.tolist(),
        true_max=true_max,
        bias=float(np.mean(final - true_max)),
        iteration_count=run.compensated.t_count,
    )


def robust_consensus_trials(
    g: Graph,
    x0: np.ndarray,
    model: NoiseModel,
    p: float,
    t_max: int,
    t2: int | None,
    trials: int,
    seed: int,
    threads: int | None = None,
) -> ConsensusResult:
    """Average of repeated robust executions; dispersion is that of node 0's estimate."""
    results = map_trials(lambda rng: robust_max_consensus(g, x0, model, p, t_max, t2, rng), trials, seed, threads)
    finals = np.array([r.final_estimates for r in results])
    lams = np.array([r.lambda_hat for r in results])
    true_max = results[0].true_max
    return ConsensusResult(
        final_estimates=finals.mean(axis=0).tolist(),
        lambda_hat=lams.mean(axis=0).tolist(),
        true_max=true_max,
        bias=float(np.mean(finals - true_max)),
        iteration_count=results[0].iteration_count,
        variance_across_trials=float(finals[:, 0].var(ddof=1)) if trials > 1 else 0.0,
        trials=trials,
    )


def end_to_end_variance(
    g: Graph,
    model: NoiseModel,
    p: float,
    t_max: int,
    t2: int | None,
    trials: int,
    seed: int,
    x0: np.ndarray | None = None,
    threads: int | None = None,
) -> float:
    """Empirical variance of node 0's final estimate; ``t2`` defaults to the diameter."""
    if trials < MIN_VARIANCE_TRIALS:
        raise DomainError(f"Variance estimate needs at least {MIN_VARIANCE_TRIALS} trials, got {trials}.")
    t2 = diameter(g) if t2 is None else t2
    x0 = np.zeros(g.n_nodes) if x0 is None else x0
    return robust_consensus_trials(g, x0, model, p, t_max, t2, trials, seed, threads).variance_across_trials


def end_to_end_variance_bound(variance: float, diameter_hops: int, t_max: int) -> float:
    """sigma^2 (D^2 / t_max + D)."""
    return variance * (diameter_hops**2 / t_max + diameter_hops)


# Soft-max average consensus baseline


def soft_max(x: np.ndarray, beta: float) -> float:
    """(1 / beta) log sum_i exp(beta x_i)."""
    return float(logsumexp(beta * np.asarray(x, dtype=float)) / beta)


def metropolis_weights(g: Graph) -> np.ndarray:
    """w_ij = 1 / (1 + max(d_i, d_j)) on edges, zero elsewhere."""
    w = np.zeros((g.n_nodes, g.n_nodes))
    if g.edges:
        rows, cols = g.edge_index
        degrees = np.asarray(g.degrees)
        values = 1.0 / (1.0 + np.maximum(degrees[rows], degrees[cols]))
        w[rows, cols] = values
        w[cols, rows] = values
    return w


def run_sma_baseline(
    g: Graph,
    x0: np.ndarray,
    model: NoiseModel,
    beta_design: float,
    steps: int,
    rng: np.random.Generator,
    p: float = 0.0,
    transmit_scale: float | None = None,
) -> Trajectory:
    """Average consensus on y_i = exp(beta x_i) under additive link noise.

    Node i reports (1 / beta) log(N y_i), which tends to the soft maximum
    of ``x0``. Values are kept scaled by exp(-beta max x0). With
    ``transmit_scale=A`` nodes transmit A log(1 + Y / A) instead of Y,
    which slows consensus as beta grows.

    Link noise is drawn in units of the largest transmitted value, so a
    message carries the same signal-to-noise ratio as a max-consensus
    message over a unit measurement range.
    """
    if beta_design <= 0:
        raise DomainError(f"Soft-max design parameter must be positive, got {beta_design}.")
    if transmit_scale is not None and transmit_scale <= 0:
        raise DomainError(f"Transmit scale must be positive, got {transmit_scale}.")
    x0 = _check_run(g, x0, steps)
    fingerprint = config_fingerprint(g, model, p, rng, sma_beta=beta_design, transmit_scale=transmit_scale)

    n = g.n_nodes
    shift = beta_design * float(x0.max())
    y = np.exp(beta_design * x0 - shift)
    noise_scale = np.exp(-shift)
    weights = metropolis_weights(g)
    tiny = np.finfo(float).tiny

    def transmit(values: np.ndarray) -> np.ndarray:
        if transmit_scale is None:
            return values
        log_ratio = np.log(np.maximum(values, tiny)) + shift - np.log(transmit_scale)
        return transmit_scale * noise_scale * np.logaddexp(0.0, log_ratio)

    def reconstruct(values: np.ndarray) -> np.ndarray:
        return (shift + np.log(np.maximum(n * values, tiny))) / beta_design

    reference = float(transmit(np.ones(1))[0])
    states = np.empty((steps + 1, n))
    states[0] = reconstruct(y)
    clipped_steps = 0
    for t in range(steps):
        active = sample_realization(g, p, rng).adjacency
        noise = model.sample(rng, (n, n)) * reference
        sent = transmit(y)
        y = y + (weights * active * (sent[None, :] + noise - sent[:, None])).sum(axis=1)
        clipped_steps += bool((y <= 0).any())
        states[t + 1] = reconstruct(y)
    if clipped_steps:
        logger.warning(
            "Soft-max beta=%g: states left the positive range in %d of %d iterations; noise dominates the transmissions",
            beta_design,
            clipped_steps,
            steps,
        )
    return Trajectory(states=states, config_fingerprint=fingerprint)


def settling_iteration(series: Sequence[float], tolerance: float = 0.05) -> int:
    """First index after which ``series`` stays within ``tolerance`` (relative) of its plateau.

    The plateau is the mean of the final tenth of the series.
    """
    values = np.asarray(series, dtype=float)
    tail = max(1, int(np.ceil(PLATEAU_FRACTION * values.size)))
    plateau = values[-tail:].mean()
    outside = np.flatnonzero(np.abs(values - plateau) > tolerance * abs(plateau))
    return 0 if outside.size == 0 else int(outside[-1]) + 1


def trajectory_statistics(trajectory: Trajectory) -> np.ndarray:
    """Rows of (t, mean, min, max, std) across nodes."""
    s = trajectory.states
    t = np.arange(s.shape[0], dtype=float)
    return np.column_stack([t, s.mean(axis=1), s.min(axis=1), s.max(axis=1), s.std(axis=1)])
