"""Fast invariant suite behind ``maxcons selfcheck``."""

from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from . import bounds
from .graph import Graph, adjacency_power_entry, build_graph, count_self_loop_paths, load_bundled_graph, sample_realization, spectral_radius
from .maxplus import build_noise_matrix, mp_product, path_max_table
from .models import CheckResult, SelfcheckReport
from .noise import GaussianNoise, LaplaceNoise, NoiseModel, UniformNoise

logger = logging.getLogger(__name__)

SEED = 20240607
ORACLE_INSTANCES = 20


def _small_graphs() -> dict[str, Graph]:
    return {
        "path4": build_graph(4, [(0, 1), (1, 2), (2, 3)]),
        "triangle": build_graph(3, [(0, 1), (1, 2), (0, 2)]),
        "star5": build_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)]),
        "cycle5": build_graph(5, [(i, (i + 1) % 5) for i in range(5)]),
        "bowtie": build_graph(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]),
    }


def _check(name: str, fn: Callable[[], str | None]) -> CheckResult:
    """Run one invariant; ``fn`` returns a failure detail or None."""
    try:
        detail = fn()
    except Exception as exc:  # any exception is a failed invariant
        logger.debug("Check %s raised", name, exc_info=True)
        return CheckResult(name=name, passed=False, detail=f"{type(exc).__name__}: {exc}")
    return CheckResult(name=name, passed=detail is None, detail=detail or "")


def _oracle_equivalence(g: Graph, rng: np.random.Generator) -> str | None:
    model = GaussianNoise()
    for _ in range(ORACLE_INSTANCES):
        t = int(rng.integers(1, 5))
        mats = [build_noise_matrix(sample_realization(g, 0.25, rng), model, rng) for _ in range(t)]
        product = mp_product(mats).entries
        for j in range(g.n_nodes):
            if not np.array_equal(path_max_table(g, mats, j), product[:, j]):
                return f"path oracle disagrees with the max-plus product at column {j}, t={t}"
    return None


def _walk_bound(g: Graph) -> str | None:
    rho = spectral_radius(g)
    for t in range(9):
        for i in range(g.n_nodes):
            for j in range(g.n_nodes):
                if adjacency_power_entry(g, t, i, j) > rho**t + 1e-6:
                    return f"[A^{t}]_({i},{j}) exceeds rho^t"
    return None


def _self_loop_identity(g: Graph) -> str | None:
    a_plus_i = np.array((g.adjacency + np.eye(g.n_nodes, dtype=np.int64)).tolist(), dtype=object)
    for t in range(6):
        power = np.linalg.matrix_power(a_plus_i, t)
        for i in range(g.n_nodes):
            for j in range(g.n_nodes):
                total = sum(count_self_loop_paths(g, t, l, i, j) for l in range(t + 1))
                if total != power[i, j]:
                    return f"self-loop path counts do not sum to (A+I)^{t} at ({i},{j})"
    return None


def _spectral_oracle(g: Graph) -> str | None:
    expected = float(np.linalg.eigvalsh(g.adjacency.astype(float)).max())
    got = spectral_radius(g)
    if abs(got - expected) > 1e-6:
        return f"power iteration {got:.9f} vs eigensolver {expected:.9f}"
    return None


def _moments(model: NoiseModel) -> str | None:
    upper = model.integration_upper()
    mean, _ = quad(lambda x: x * model.pdf(x), -upper, upper, points=[0.0], limit=200)
    second, _ = quad(lambda x: x * x * model.pdf(x), -upper, upper, points=[0.0], limit=200)
    if abs(mean) > 1e-8:
        return f"mean {mean:.3e} is not zero"
    if abs(second - model.variance) > 1e-6:
        return f"law variance {second:.8f} does not match declared {model.variance}"
    return None


def _mgf_quadrature(model: NoiseModel) -> str | None:
    lo, hi = model.mgf_domain
    gamma = 0.25 * min(hi, 2.0)
    upper = model.integration_upper()
    numeric, _ = quad(lambda x: math.exp(gamma * x) * model.pdf(x), -upper, upper, points=[0.0], limit=200)
    closed = model.mgf(gamma)
    if abs(numeric - closed) > 1e-6 * closed:
        return f"M({gamma}) closed form {closed:.10f} vs quadrature {numeric:.10f}"
    return None


def _order_statistics(model: NoiseModel) -> str | None:
    if model.m_plus(0) != 0.0:
        return "m_plus(0) is not zero"
    values = [model.m_plus(d) for d in range(1, 6)]
    if any(b <= a for a, b in zip(values, values[1:])):
        return f"m_plus is not increasing in d: {values}"
    if abs(model.kappa(3) - 0.125) > 1e-12:
        return f"kappa(3) = {model.kappa(3)} for zero-median noise"
    return None


def _bound_ordering(model: NoiseModel, g: Graph) -> str | None:
    report = bounds.compute_bounds_report(model, g, 0.0)
    if not 0.0 <= report.lower <= report.upper_ldp:
        return f"lower {report.lower:.6f} not within [0, upper_ldp={report.upper_ldp:.6f}]"
    if report.upper_alternative < report.upper_ldp - 1e-6:
        return f"alternative {report.upper_alternative:.6f} below upper_ldp {report.upper_ldp:.6f}"
    if abs(report.upper_mgf_direct - report.upper_ldp) > 2e-3:
        return f"MGF-direct {report.upper_mgf_direct:.6f} vs upper_ldp {report.upper_ldp:.6f}"
    if report.upper_gaussian_closed is not None and abs(report.upper_gaussian_closed - report.upper_ldp) > 1e-3:
        return f"Gaussian closed form {report.upper_gaussian_closed:.6f} vs upper_ldp {report.upper_ldp:.6f}"
    return None


def _phi() -> str | None:
    if abs(bounds.empirical_correction(75) - (1 - 1 / (2 * math.sqrt(75)))) > 1e-15:
        return "phi(75) formula mismatch"
    if bounds.empirical_correction(1) != 0.5:
        return "phi(1) is not 0.5"
    return None


def selfcheck(noise_models: Sequence[NoiseModel] | None = None) -> SelfcheckReport:
    """Run every invariant; ``noise_models`` defaults to the three unit-variance families."""
    models = list(noise_models) if noise_models is not None else [GaussianNoise(), LaplaceNoise(), UniformNoise()]
    graphs = _small_graphs()
    rng = np.random.default_rng(SEED)
    checks: list[CheckResult] = []

    for name, g in graphs.items():
        checks.append(_check(f"oracle-equivalence[{name}]", lambda g=g: _oracle_equivalence(g, rng)))
        checks.append(_check(f"walk-count-bound[{name}]", lambda g=g: _walk_bound(g)))
        checks.append(_check(f"self-loop-identity[{name}]", lambda g=g: _self_loop_identity(g)))
        checks.append(_check(f"spectral-radius[{name}]", lambda g=g: _spectral_oracle(g)))

    petersen = load_bundled_graph("petersen")
    for model in models:
        label = model.family.value
        checks.append(_check(f"noise-moments[{label}]", lambda m=model: _moments(m)))
        checks.append(_check(f"mgf-quadrature[{label}]", lambda m=model: _mgf_quadrature(m)))
        checks.append(_check(f"order-statistics[{label}]", lambda m=model: _order_statistics(m)))
        checks.append(_check(f"bound-ordering[{label}]", lambda m=model: _bound_ordering(m, petersen)))
    checks.append(_check("empirical-correction", _phi))

    report = SelfcheckReport(checks=checks)
    logger.info("Selfcheck: %d/%d checks passed", sum(c.passed for c in checks), len(checks))
    return report
