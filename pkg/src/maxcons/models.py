"""Data models for analysis results and reports."""

from enum import Enum

from pydantic import BaseModel, Field


class NoiseFamily(str, Enum):
    """Supported zero-mean noise laws."""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"


class RateFunctionValue(BaseModel):
    """Value of the large-deviation rate function at one argument."""

    x: float
    value: float = Field(ge=0.0)
    maximizer_gamma: float


class BoundsReport(BaseModel):
    """Every bound on the noise-induced growth rate for one (graph, noise, p)."""

    n_nodes: int
    rho: float
    p: float
    family: NoiseFamily
    variance: float
    upper_ldp: float
    beta_star: float
    upper_gaussian_closed: float | None = None
    upper_alternative: float
    upper_mgf_direct: float
    phi: float
    upper_empirical: float
    lower: float
    lower_quantile: float | None = None  # regular graphs only

    @property
    def rho_eff(self) -> float:
        """Effective spectral radius K = rho(1 - p)."""
        return self.rho * (1.0 - self.p)


class GrowthEstimate(BaseModel):
    """Per-node growth-rate estimate from one zero-initialised run."""

    lambda_hat_per_node: list[float]
    t_max: int
    mean: float
    stderr: float  # across nodes


class GrowthSummary(BaseModel):
    """Growth-rate estimates aggregated over independent trials."""

    per_node_mean: list[float]
    per_node_variance: list[float]
    t_max: int
    trials: int
    mean: float
    stderr: float  # of the network-mean estimate across trials


class ConsensusResult(BaseModel):
    """Outcome of the two-run robust max consensus algorithm."""

    final_estimates: list[float]
    lambda_hat: list[float]
    true_max: float
    bias: float
    iteration_count: int
    variance_across_trials: float | None = None
    trials: int = 1


class CheckResult(BaseModel):
    """One selfcheck invariant."""

    name: str
    passed: bool
    detail: str = ""


class SelfcheckReport(BaseModel):
    """Outcome of the fast invariant suite."""

    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        """Render one PASS/FAIL line per check."""
        out = []
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            suffix = f": {check.detail}" if check.detail and not check.passed else ""
            out.append(f"{status} {check.name}{suffix}")
        return out
