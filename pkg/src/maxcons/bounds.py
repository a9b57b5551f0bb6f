"""Analytical bounds on the growth rate of noisy max consensus.

Upper bounds come from a union bound over max-plus paths combined with
large-deviation estimates of the path sums; lower bounds follow a greedy
path that always takes the largest incoming value. With erasures the
fixed-graph formulas hold with the effective spectral radius
``K = rho * (1 - p)``.
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.optimize import brentq, minimize_scalar
from scipy.special import entr

from .errors import ConvergenceError, DomainError
from .graph import Graph, spectral_radius
from .models import BoundsReport, NoiseFamily
from .noise import NoiseModel

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-9
BETA_TOL = 1e-10
X_TOL = 1e-9
ROOT_TOL = 1e-12
MAX_DOUBLINGS = 64


class UpperBound(NamedTuple):
    value: float
    beta_star: float


class BetaOptimum(NamedTuple):
    value: float
    beta: float


def binary_entropy(beta: float) -> float:
    """H(beta) in nats, with H(0) = H(1) = 0."""
    return float(entr(beta) + entr(1.0 - beta))


def _effective_rho(rho: float, p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise DomainError(f"Erasure probability must lie in [0, 1), got {p}.")
    k = rho * (1.0 - p)
    if k <= 0:
        raise DomainError(f"Effective spectral radius rho(1-p) must be positive, got {k}.")
    return k


def ldp_objective(model: NoiseModel, x: float, beta: float, k: float) -> float:
    """f(x, beta) = H(beta) + beta log K - beta I(x / beta)."""
    return binary_entropy(beta) + beta * math.log(k) - beta * model.rate_function(x / beta).value


def sup_over_beta(model: NoiseModel, x: float, k: float) -> BetaOptimum:
    """Maximise the concave objective over beta in (0, 1].

    The interior search runs on [1e-9, 1 - 1e-9]; both ends are also
    evaluated, the lower one standing in for the beta -> 0 limit.
    """
    result = minimize_scalar(
        lambda b: -ldp_objective(model, x, b, k),
        bounds=(BETA_FLOOR, 1.0 - BETA_FLOOR),
        method="bounded",
        options={"xatol": BETA_TOL},
    )
    best = BetaOptimum(-float(result.fun), float(result.x))
    for beta in (BETA_FLOOR, 1.0):
        value = ldp_objective(model, x, beta, k)
        if value > best.value:
            best = BetaOptimum(value, beta)
    return best


def _bracket_sign_change(fn, start: float) -> tuple[float, float]:
    """Double ``hi`` from ``start`` until ``fn(hi) < 0``; ``fn(0) > 0`` is assumed."""
    lo, hi = 0.0, start
    for _ in range(MAX_DOUBLINGS):
        if fn(hi) < 0:
            return lo, hi
        lo, hi = hi, 2.0 * hi
    raise ConvergenceError(f"No sign change found up to x={hi:g}.")


def upper_bound_ldp(model: NoiseModel, rho: float, p: float = 0.0) -> UpperBound:
    """Smallest x >= 0 with sup_beta f(x, beta) < 0.

    The supremum is decreasing in x and equals log(1 + K) > 0 at x = 0, so
    the threshold is a root found by bracketing and Brent's method. On a
    tie the upper endpoint is returned.
    """
    k = _effective_rho(rho, p)

    def sup_value(x: float) -> float:
        return sup_over_beta(model, x, k).value

    lo, hi = _bracket_sign_change(sup_value, model.sigma)
    x = brentq(sup_value, lo, hi, xtol=X_TOL)
    if sup_value(x) >= 0:
        x += X_TOL
    beta_star = sup_over_beta(model, x, k).beta
    logger.debug("LDP bound %s K=%.4f: x=%.8f beta*=%.6f", model.describe(), k, x, beta_star)
    return UpperBound(x, beta_star)


def _gaussian_stationarity(beta: float, log_rho: float) -> float:
    # zero exactly when rho = sqrt(beta / (1 - beta)) * exp(-H(beta) / (2 beta))
    return 0.5 * math.log(beta / (1.0 - beta)) - binary_entropy(beta) / (2.0 * beta) - log_rho


def gaussian_closed_optimum(rho_eff: float, sigma: float = 1.0) -> UpperBound:
    """sup_beta sigma * sqrt(2 beta (H(beta) + beta log rho)) and its maximiser.

    The objective has a single interior critical point, located by solving
    the first-order condition directly.
    """
    if rho_eff <= 0:
        raise DomainError(f"Effective spectral radius must be positive, got {rho_eff}.")
    log_rho = math.log(rho_eff)
    edge = 1e-15
    beta = brentq(_gaussian_stationarity, edge, 1.0 - edge, args=(log_rho,), xtol=1e-16, maxiter=500)
    inner = beta * (binary_entropy(beta) + beta * log_rho)
    return UpperBound(sigma * math.sqrt(2.0 * max(inner, 0.0)), beta)


def upper_bound_gaussian_closed(rho_eff: float, sigma: float = 1.0) -> float:
    """Closed-form upper bound for Gaussian noise; scales linearly in sigma."""
    return gaussian_closed_optimum(rho_eff, sigma).value


def upper_bound_alternative(model: NoiseModel, rho: float) -> float:
    """Root of I(x) = log(rho + 1): looser, but needs a single root search."""
    if rho < 0:
        raise DomainError(f"Spectral radius must be non-negative, got {rho}.")
    if rho == 0:
        return 0.0
    target = math.log1p(rho)

    def gap(x: float) -> float:
        return target - model.rate_function(x).value

    lo, hi = _bracket_sign_change(gap, model.sigma)
    return float(brentq(gap, lo, hi, xtol=ROOT_TOL))


def upper_bound_mgf_direct(model: NoiseModel, k: float) -> float:
    """inf_gamma log(1 + K M(gamma)) / gamma.

    The inner supremum over beta is attained at beta = KM / (1 + KM), where
    H(beta) + beta log(KM) collapses to log(1 + KM); no rate function is
    needed.
    """
    if k <= 0:
        raise DomainError(f"Effective spectral radius must be positive, got {k}.")
    log_k = math.log(k)
    ceiling = model.gamma_ceiling()

    def h(gamma: float) -> float:
        return float(np.logaddexp(0.0, log_k + model.log_mgf(gamma))) / gamma

    gamma = min(1.0 / model.sigma, ceiling / 2.0)
    while 2.0 * gamma < ceiling and h(2.0 * gamma) < h(gamma):
        gamma *= 2.0
    upper = min(2.0 * gamma, ceiling)

    result = minimize_scalar(
        h, bounds=(BETA_FLOOR * gamma, upper), method="bounded", options={"xatol": BETA_TOL}
    )
    return min(float(result.fun), h(upper))


def empirical_correction(n_nodes: int) -> float:
    """phi = 1 - 1 / (2 sqrt(N)); empirical, with no guarantee attached."""
    if n_nodes < 1:
        raise DomainError(f"Node count must be at least 1, got {n_nodes}.")
    return 1.0 - 1.0 / (2.0 * math.sqrt(n_nodes))


def log_violation(estimate: float, bound: float, label: str = "growth rate") -> bool:
    """Log, never raise, when a Monte Carlo estimate exceeds the corrected bound."""
    if estimate > bound:
        logger.warning(
            "Monte Carlo %s %.6f exceeds the corrected upper bound %.6f", label, estimate, bound
        )
        return True
    return False


# Lower bounds


def lower_bound_regular(model: NoiseModel, d: int) -> float:
    """m_+(d) for a d-regular graph."""
    if d < 1:
        raise DomainError(f"Degree must be at least 1, got {d}.")
    return model.m_plus(d)


def lower_bound_quantile(model: NoiseModel, d: int) -> float:
    """F^{-1}(d / (d + 1)) for a d-regular graph."""
    return model.lower_quantile_bound(d)


def _expected_m_plus(model: NoiseModel, d: int, p: float) -> float:
    if p == 0.0:
        return model.m_plus(d)
    ks = np.arange(d + 1)
    weights = stats.binom.pmf(ks, d, 1.0 - p)
    return float(sum(w * model.m_plus(int(k)) for w, k in zip(weights, ks)))


def lower_bound_irregular(model: NoiseModel, g: Graph, p: float = 0.0) -> float:
    """sum_i (d_i / 2E) E[m_+(Z_i)] with Z_i ~ Binomial(d_i, 1 - p)."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"Erasure probability must lie in [0, 1), got {p}.")
    total = sum(g.degrees)
    if total == 0:
        return 0.0
    per_degree = {d: _expected_m_plus(model, d, p) for d in set(g.degrees)}
    return sum(d / total * per_degree[d] for d in g.degrees)


def greedy_transition_matrix(model: NoiseModel, g: Graph) -> np.ndarray:
    """P = diag(1 - kappa) D^-1 A + diag(kappa) for the greedy path on a fixed graph.

    From node i the path stays put when every incoming noise draw is
    negative (probability kappa_i) and otherwise moves to a uniformly
    chosen neighbour.
    """
    degrees = np.asarray(g.degrees, dtype=float)
    if (degrees == 0).any():
        raise DomainError("Greedy chain needs every node to have a neighbour.")
    kappa = np.array([model.kappa(int(d)) for d in g.degrees])
    move = (1.0 - kappa)[:, None] * g.adjacency / degrees[:, None]
    return move + np.diag(kappa)


def greedy_stationary_distribution(model: NoiseModel, g: Graph) -> np.ndarray:
    """Exact stationary law, pi_i proportional to d_i / (1 - kappa_i) (detailed balance)."""
    degrees = np.asarray(g.degrees, dtype=float)
    kappa = np.array([model.kappa(int(d)) for d in g.degrees])
    weights = degrees / (1.0 - kappa)
    return weights / weights.sum()


def lower_bound_greedy_exact(model: NoiseModel, g: Graph) -> float:
    """Greedy-path lower bound with the exact stationary law."""
    pi = greedy_stationary_distribution(model, g)
    return float(sum(w * model.m_plus(d) for w, d in zip(pi, g.degrees)))


def stationary_gap(model: NoiseModel, g: Graph) -> float:
    """Total variation distance between the exact stationary law and d_i / 2E."""
    degrees = np.asarray(g.degrees, dtype=float)
    gap = 0.5 * float(np.abs(greedy_stationary_distribution(model, g) - degrees / degrees.sum()).sum())
    logger.info("Greedy chain stationary gap on %d nodes: %.3e", g.n_nodes, gap)
    return gap


def simulate_greedy_path(
    model: NoiseModel,
    g: Graph,
    p: float,
    steps: int,
    rng: np.random.Generator,
    start: int = 0,
) -> float:
    """Average per-step gain of one greedy path of ``steps`` iterations."""
    if steps < 1:
        raise DomainError(f"Greedy path needs at least one step, got {steps}.")
    if not 0.0 <= p < 1.0:
        raise DomainError(f"Erasure probability must lie in [0, 1), got {p}.")
    node, total = start, 0.0
    for _ in range(steps):
        nbrs = np.asarray(g.neighbors(node))
        if p > 0.0 and nbrs.size:
            nbrs = nbrs[rng.random(nbrs.size) >= p]
        if nbrs.size == 0:
            continue
        draws = model.sample(rng, nbrs.size)
        best = int(np.argmax(draws))
        if draws[best] > 0.0:
            total += float(draws[best])
            node = int(nbrs[best])
    return total / steps


def compute_bounds_report(model: NoiseModel, g: Graph, p: float = 0.0) -> BoundsReport:
    """Every bound for one (graph, noise, p) configuration."""
    rho = spectral_radius(g)
    phi = empirical_correction(g.n_nodes)
    base = dict(n_nodes=g.n_nodes, rho=rho, p=p, family=model.family, variance=model.variance, phi=phi)

    if model.is_degenerate or g.edge_count == 0:
        # no noise or no links: states never grow
        return BoundsReport(
            **base,
            upper_ldp=0.0,
            beta_star=1.0,
            upper_gaussian_closed=0.0 if model.family is NoiseFamily.GAUSSIAN else None,
            upper_alternative=0.0,
            upper_mgf_direct=0.0,
            upper_empirical=0.0,
            lower=0.0,
            lower_quantile=0.0 if g.is_regular and p == 0.0 else None,
        )

    k = _effective_rho(rho, p)
    upper = upper_bound_ldp(model, rho, p)
    closed = (
        upper_bound_gaussian_closed(k, model.sigma) if model.family is NoiseFamily.GAUSSIAN else None
    )
    report = BoundsReport(
        **base,
        upper_ldp=upper.value,
        beta_star=upper.beta_star,
        upper_gaussian_closed=closed,
        upper_alternative=upper_bound_alternative(model, k),
        upper_mgf_direct=upper_bound_mgf_direct(model, k),
        upper_empirical=phi * upper.value,
        lower=lower_bound_irregular(model, g, p),
        lower_quantile=lower_bound_quantile(model, g.degrees[0]) if g.is_regular and p == 0.0 else None,
    )
    logger.info(
        "Bounds for %s on N=%d rho=%.4f p=%g: lower=%.4f upper=%.4f",
        model.describe(), g.n_nodes, rho, p, report.lower, report.upper_ldp,
    )
    return report
