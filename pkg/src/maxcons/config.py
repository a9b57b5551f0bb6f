"""Experiment configuration: JSON file, CLI overrides and environment."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, ValidationError, model_validator

from .errors import ConfigError
from .graph import Graph, benchmark_graph, erdos_renyi_graph, read_graph
from .models import NoiseFamily
from .noise import NoiseModel, make_noise

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "MAXCONS_SEED"
SEED_LIMIT = 2**64


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FileGraphSource(_Strict):
    """Edge-list file in the ``N E`` / ``i j`` format."""

    kind: Literal["file"] = "file"
    path: Path
    one_indexed: bool = False

    def build(self) -> Graph:
        return read_graph(self.path, one_indexed=self.one_indexed)


class GeneratedGraphSource(_Strict):
    """Random topology built from a seed."""

    kind: Literal["geometric", "erdos_renyi"] = "geometric"
    n_nodes: int = Field(default=75, ge=2)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    radius: float | None = Field(default=None, gt=0)
    target_rho: float | None = Field(default=None, gt=0)
    edge_probability: float | None = Field(default=None, gt=0, le=1)

    @model_validator(mode="after")
    def _check_kind_fields(self):
        if self.kind == "erdos_renyi" and self.edge_probability is None:
            raise ValueError("erdos_renyi graphs need edge_probability")
        if self.kind == "geometric" and self.edge_probability is not None:
            raise ValueError("edge_probability only applies to erdos_renyi graphs")
        return self

    def build(self) -> Graph:
        if self.kind == "erdos_renyi":
            return erdos_renyi_graph(self.n_nodes, self.edge_probability, seed=self.seed)
        return benchmark_graph(self.n_nodes, seed=self.seed, radius=self.radius, target_rho=self.target_rho)


def _graph_source_tag(value) -> str | None:
    """'file' when a path is given, otherwise a generator; an explicit kind wins."""
    if isinstance(value, BaseModel):
        return "file" if isinstance(value, FileGraphSource) else "generated"
    if not isinstance(value, dict):
        return None
    kind = value.get("kind")
    if kind == "file" or (kind is None and "path" in value):
        return "file"
    return "generated"


GraphSource = Annotated[
    Union[Annotated[FileGraphSource, Tag("file")], Annotated[GeneratedGraphSource, Tag("generated")]],
    Discriminator(_graph_source_tag),
]


class NoiseConfig(_Strict):
    family: NoiseFamily = NoiseFamily.GAUSSIAN
    variance: float = Field(default=1.0, ge=0)

    def build(self) -> NoiseModel:
        return make_noise(self.family, self.variance)


class ExperimentConfig(_Strict):
    """Everything a run needs; serialised verbatim into output metadata."""

    graph: GraphSource = Field(default_factory=GeneratedGraphSource)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    p: float = Field(default=0.0, ge=0, lt=1)
    t_max: int = Field(default=400, ge=1)
    t2: int | None = Field(default=None, ge=1)
    trials: int = Field(default=500, ge=1)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    output_dir: Path = Path("out")
    threads: int = Field(default=1, ge=1)
    initial_range: tuple[float, float] | None = None
    horizon: int | None = Field(default=None, ge=1)
    sma_betas: list[float] = Field(default_factory=lambda: [6.0, 10.0], min_length=1)
    sma_transmit_scale: float | None = Field(default=100.0, gt=0)
    sma_horizon: int = Field(default=300, ge=1)
    sma_initial_range: tuple[float, float] = (0.0, 1.0)

    @model_validator(mode="after")
    def _check_ranges(self):
        for name in ("initial_range", "sma_initial_range"):
            bounds = getattr(self, name)
            if bounds is not None and not bounds[0] < bounds[1]:
                raise ValueError(f"{name} must be an increasing pair, got {bounds}")
        if any(b <= 0 for b in self.sma_betas):
            raise ValueError("sma_betas must be positive")
        return self


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        location = ".".join(str(v) for v in err["loc"]) or "<root>"
        parts.append(f"{location}: {err['msg']}")
    return "; ".join(parts)


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {_describe(exc)}")


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Configuration file {path} does not exist.")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Configuration file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration file {path} must contain a JSON object.")
    logger.debug("Loaded configuration from %s", path)
    return config_from_dict(data)


def resolve_seed(cli_seed: int | None, cfg: ExperimentConfig | None, explicit_in_file: bool = False) -> int:
    """CLI flag, then config file, then MAXCONS_SEED, then the default 0."""
    if cli_seed is not None:
        candidate, source = cli_seed, "--seed"
    elif cfg is not None and explicit_in_file:
        candidate, source = cfg.seed, "config"
    elif os.environ.get(SEED_ENV_VAR):
        raw = os.environ[SEED_ENV_VAR]
        try:
            candidate = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not an integer.")
        source = SEED_ENV_VAR
    else:
        candidate, source = (cfg.seed if cfg is not None else 0), "default"
    if not 0 <= candidate < SEED_LIMIT:
        raise ConfigError(f"Seed from {source} must lie in [0, 2**64), got {candidate}.")
    return candidate


def apply_overrides(
    cfg: ExperimentConfig,
    seed: int | None = None,
    output_dir: str | Path | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Fold CLI flags and the seed environment variable into ``cfg``."""
    updates: dict = {"seed": resolve_seed(seed, cfg, explicit_in_file="seed" in cfg.model_fields_set)}
    if output_dir is not None:
        updates["output_dir"] = Path(output_dir)
    if threads is not None:
        updates["threads"] = threads
    return config_from_dict({**cfg.model_dump(), **updates})
