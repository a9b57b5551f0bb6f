"""Zero-mean link-noise laws and the analytic quantities the bounds need.

Every family is parameterised by its variance so that models of equal
variance can be compared directly. A family supplies its scipy law, a
sampler, a closed-form log-MGF and the MGF domain; everything else
(rate function, order-statistic expectations, kappa) is derived here.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import ClassVar

import numpy as np
from scipy import stats
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .errors import DomainError, UnsupportedModelError
from .models import NoiseFamily, RateFunctionValue

logger = logging.getLogger(__name__)

GAMMA_CAP = 1e6
GAMMA_TOL = 1e-10
DOMAIN_MARGIN = 1e-9
TAIL_MASS = 1e-12
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class NoiseModel(ABC):
    """A zero-mean, symmetric noise law with variance ``variance``."""

    variance: float = 1.0
    family: ClassVar[NoiseFamily]

    def __post_init__(self):
        if not math.isfinite(self.variance) or self.variance < 0:
            raise DomainError(f"Noise variance must be finite and non-negative, got {self.variance}.")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def is_degenerate(self) -> bool:
        """True for the zero-variance (noise-free) law."""
        return self.variance == 0.0

    @property
    @abstractmethod
    def mgf_domain(self) -> tuple[float, float]:
        """Open interval of gamma on which the MGF is finite."""

    @abstractmethod
    def _log_mgf(self, gamma: float) -> float: ...

    @abstractmethod
    def _draw(self, rng: np.random.Generator, size) -> np.ndarray: ...

    @abstractmethod
    def _law(self) -> stats.rv_continuous: ...

    @cached_property
    def _frozen(self):
        self._require_nondegenerate("a probability law")
        return self._law()

    def _require_nondegenerate(self, what: str) -> None:
        if self.is_degenerate:
            raise UnsupportedModelError(f"Zero-variance noise has no {what}.")

    def describe(self) -> str:
        return f"{self.family.value}(variance={self.variance:g})"

    # Sampling and distribution functions

    def sample(self, rng: np.random.Generator, count: int | tuple[int, ...]) -> np.ndarray:
        """I.i.d. draws; ``count`` may be an int or an array shape."""
        shape = (count,) if isinstance(count, (int, np.integer)) else tuple(count)
        if any(n < 0 for n in shape):
            raise DomainError(f"Sample count must be non-negative, got {count}.")
        if self.is_degenerate:
            return np.zeros(shape)
        return self._draw(rng, shape)

    def pdf(self, x):
        return self._frozen.pdf(x)

    def cdf(self, x):
        return self._frozen.cdf(x)

    def quantile(self, q: float) -> float:
        """Inverse cdf at level ``q`` in (0, 1)."""
        if not 0.0 < q < 1.0:
            raise DomainError(f"Quantile level must lie in (0, 1), got {q}.")
        return float(self._frozen.ppf(q))

    def integration_upper(self) -> float:
        """Upper truncation point for quadrature over the positive half-line."""
        return float(self._frozen.isf(TAIL_MASS))

    # Moment generating function

    def log_mgf(self, gamma: float) -> float:
        lo, hi = self.mgf_domain
        if not lo < gamma < hi:
            raise DomainError(f"gamma={gamma} is outside the MGF domain ({lo}, {hi}).")
        return self._log_mgf(gamma)

    def mgf(self, gamma: float) -> float:
        return math.exp(self.log_mgf(gamma))

    def gamma_ceiling(self) -> float:
        """Largest gamma searched when maximising over the MGF domain."""
        lo, hi = self.mgf_domain
        if math.isinf(hi):
            return GAMMA_CAP
        return min(hi - DOMAIN_MARGIN * (hi - lo), GAMMA_CAP)

    # Large-deviation rate function

    def rate_function(self, x: float) -> RateFunctionValue:
        """I(x) = sup_{gamma > 0} (x gamma - log M(gamma)) for x >= 0."""
        return self.numeric_rate_function(x)

    def numeric_rate_function(self, x: float) -> RateFunctionValue:
        """Legendre transform by bounded scalar maximisation over gamma."""
        self._require_nondegenerate("rate function")
        if x < 0:
            raise DomainError(f"Rate function is evaluated for x >= 0, got {x}.")
        if x == 0:
            return RateFunctionValue(x=0.0, value=0.0, maximizer_gamma=0.0)

        ceiling = self.gamma_ceiling()

        def objective(gamma: float) -> float:
            return x * gamma - self._log_mgf(gamma)

        # concave objective: double the bracket until it turns down
        upper = min(1.0 / self.sigma, ceiling)
        while upper < ceiling and objective(min(2.0 * upper, ceiling)) > objective(upper):
            upper = min(2.0 * upper, ceiling)
        upper = min(2.0 * upper, ceiling)

        result = minimize_scalar(
            lambda g: -objective(g),
            bounds=(0.0, upper),
            method="bounded",
            options={"xatol": GAMMA_TOL},
        )
        gamma, value = float(result.x), -float(result.fun)
        edge = objective(upper)
        if edge > value:
            gamma, value = upper, edge
        return RateFunctionValue(x=x, value=max(value, 0.0), maximizer_gamma=gamma)

    # Order statistics

    @lru_cache(maxsize=None)
    def m_plus(self, d: int) -> float:
        """E[max(0, V_1, ..., V_d)] = d * int_0^inf x F^{d-1}(x) f(x) dx."""
        if d < 0:
            raise DomainError(f"m_plus needs d >= 0, got {d}.")
        if d == 0 or self.is_degenerate:
            return 0.0

        def integrand(x: float) -> float:
            return d * x * self.cdf(x) ** (d - 1) * self.pdf(x)

        value, _ = quad(integrand, 0.0, self.integration_upper(), epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        return float(value)

    def kappa(self, d: int) -> float:
        """Probability that all ``d`` neighbour-edge draws are negative, F(0)^d."""
        if d < 1:
            raise DomainError(f"kappa needs d >= 1, got {d}.")
        return float(self.cdf(0.0)) ** d

    def lower_quantile_bound(self, d: int) -> float:
        """F^{-1}(d / (d + 1)), the order-statistics lower bound for zero-median noise."""
        if d < 1:
            raise DomainError(f"Quantile lower bound needs d >= 1, got {d}.")
        return self.quantile(d / (d + 1.0))


@dataclass(frozen=True)
class GaussianNoise(NoiseModel):
    family: ClassVar[NoiseFamily] = NoiseFamily.GAUSSIAN

    @property
    def mgf_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def _log_mgf(self, gamma: float) -> float:
        return 0.5 * self.variance * gamma * gamma

    def _draw(self, rng, size):
        return rng.normal(0.0, self.sigma, size)

    def _law(self):
        return stats.norm(loc=0.0, scale=self.sigma)

    def rate_function(self, x: float) -> RateFunctionValue:
        self._require_nondegenerate("rate function")
        if x < 0:
            raise DomainError(f"Rate function is evaluated for x >= 0, got {x}.")
        return RateFunctionValue(
            x=x, value=x * x / (2.0 * self.variance), maximizer_gamma=x / self.variance
        )


@dataclass(frozen=True)
class LaplaceNoise(NoiseModel):
    family: ClassVar[NoiseFamily] = NoiseFamily.LAPLACE

    @property
    def scale(self) -> float:
        """Laplace scale b with 2 b^2 = variance."""
        return math.sqrt(self.variance / 2.0)

    @property
    def mgf_domain(self) -> tuple[float, float]:
        if self.is_degenerate:
            return (-math.inf, math.inf)
        return (-1.0 / self.scale, 1.0 / self.scale)

    def _log_mgf(self, gamma: float) -> float:
        return -math.log1p(-((self.scale * gamma) ** 2))

    def _draw(self, rng, size):
        return rng.laplace(0.0, self.scale, size)

    def _law(self):
        return stats.laplace(loc=0.0, scale=self.scale)

    def rate_function(self, x: float) -> RateFunctionValue:
        self._require_nondegenerate("rate function")
        if x < 0:
            raise DomainError(f"Rate function is evaluated for x >= 0, got {x}.")
        if x == 0:
            return RateFunctionValue(x=0.0, value=0.0, maximizer_gamma=0.0)
        b = self.scale
        gamma = (math.hypot(b, x) - b) / (b * x)
        value = x * gamma + math.log1p(-((b * gamma) ** 2))
        return RateFunctionValue(x=x, value=max(value, 0.0), maximizer_gamma=gamma)


@dataclass(frozen=True)
class UniformNoise(NoiseModel):
    family: ClassVar[NoiseFamily] = NoiseFamily.UNIFORM

    @property
    def half_width(self) -> float:
        """Support is [-a, a] with a^2 / 3 = variance."""
        return math.sqrt(3.0 * self.variance)

    @property
    def mgf_domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def _log_mgf(self, gamma: float) -> float:
        # log(sinh(y) / y), stable for both tiny and huge y
        y = self.half_width * abs(gamma)
        if y < 1e-4:
            return y * y / 6.0 - y**4 / 180.0
        return y + math.log1p(-math.exp(-2.0 * y)) - math.log(2.0 * y)

    def _draw(self, rng, size):
        a = self.half_width
        return rng.uniform(-a, a, size)

    def _law(self):
        a = self.half_width
        return stats.uniform(loc=-a, scale=2.0 * a)

    def integration_upper(self) -> float:
        return self.half_width


NOISE_FAMILIES: dict[NoiseFamily, type[NoiseModel]] = {
    NoiseFamily.GAUSSIAN: GaussianNoise,
    NoiseFamily.LAPLACE: LaplaceNoise,
    NoiseFamily.UNIFORM: UniformNoise,
}


def make_noise(family: NoiseFamily | str, variance: float = 1.0) -> NoiseModel:
    """Build a noise model from its family name and variance."""
    try:
        cls = NOISE_FAMILIES[NoiseFamily(family)]
    except ValueError:
        raise DomainError(f"Unknown noise family {family!r}; expected one of {[f.value for f in NoiseFamily]}.")
    return cls(variance=variance)


def sample(model: NoiseModel, rng: np.random.Generator, count: int) -> np.ndarray:
    return model.sample(rng, count)


def mgf(model: NoiseModel, gamma: float) -> float:
    return model.mgf(gamma)


def rate_function(model: NoiseModel, x: float) -> RateFunctionValue:
    return model.rate_function(x)


def m_plus(model: NoiseModel, d: int) -> float:
    return model.m_plus(d)


def quantile(model: NoiseModel, q: float) -> float:
    return model.quantile(q)


def kappa(model: NoiseModel, d: int) -> float:
    return model.kappa(d)
