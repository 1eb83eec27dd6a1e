# config/experiment.py
import logging
import os
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import settings
from core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

ModelName = Literal["gaussian_image", "binomial_logit"]
SamplerName = Literal["single_site", "chromatic", "chromatic_parallel", "block"]

# keys written to metadata.txt that are results, not inputs
_RESULT_PREFIX = "result."


class ExperimentConfig(BaseModel):
    """Every input of a ``run``; round-trips through the run's metadata file."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    model: ModelName = "gaussian_image"
    sampler: SamplerName = "chromatic"
    p: int = Field(50, ge=2)
    graph: Optional[str] = None
    neighborhood: Literal["rook4", "king8"] = "king8"
    observed: Optional[str] = None
    votes: Optional[str] = None
    noise_sd: float = Field(1.0, ge=0.0)
    iterations: int = Field(10000, ge=1)
    burnin: int = Field(8000, ge=0)
    thin: int = Field(1, ge=1)
    field_thin: int = Field(settings.DEFAULT_FIELD_THIN, ge=1)
    seed: int = settings.DEFAULT_SEED
    alpha: float = Field(settings.DEFAULT_ALPHA, gt=0.0)
    rho: float = settings.DEFAULT_RHO
    workers: int = Field(settings.DEFAULT_WORKERS, ge=1)
    ordering: Literal["natural", "rcm"] = settings.DEFAULT_ORDERING
    color_order: str = "natural"
    chains: int = Field(1, ge=1)
    # synthetic precinct data when no votes file is given
    sites: int = Field(100, ge=3)
    mean_trials: float = Field(200.0, gt=0.0)
    true_beta0: float = 0.5
    true_tau2: float = Field(1.0, gt=0.0)
    missing_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    out: str = settings.DEFAULT_OUTPUT_DIR

    @field_validator("color_order")
    @classmethod
    def _check_color_order(cls, value: str) -> str:
        if value in ("natural", "degree-desc"):
            return value
        if value.startswith("random:") and value.split(":", 1)[1].lstrip("-").isdigit():
            return value
        raise ValueError("expected natural, degree-desc or random:<seed>")

    @model_validator(mode="after")
    def _check_schedule(self) -> "ExperimentConfig":
        if self.burnin >= self.iterations:
            raise ValueError(f"burnin ({self.burnin}) must be smaller than iterations ({self.iterations})")
        if self.model == "gaussian_image" and self.votes is not None:
            raise ValueError("--votes only applies to the binomial_logit model")
        if self.model == "binomial_logit" and self.observed is not None:
            raise ValueError("--observed only applies to the gaussian_image model")
        return self

    @classmethod
    def build(cls, **values: Any) -> "ExperimentConfig":
        """Validate, raising InvalidArgumentError with pydantic's messages."""
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
            raise InvalidArgumentError(f"Invalid experiment configuration: {problems}")

    @property
    def run_dir(self) -> str:
        return os.path.join(self.out, f"{self.model}_{self.sampler}")

    def to_metadata(self, results: Optional[Dict[str, Any]] = None) -> str:
        """key=value text: the configuration, then ``result.*`` entries."""
        lines = [f"{key}={'' if value is None else value}" for key, value in self.model_dump().items()]
        for key, value in (results or {}).items():
            lines.append(f"{_RESULT_PREFIX}{key}={value}")
        return "\n".join(lines) + "\n"

    def write_metadata(self, path: str, results: Optional[Dict[str, Any]] = None) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_metadata(results))
        return path

    @classmethod
    def from_metadata(cls, path: str) -> "ExperimentConfig":
        """Rebuild the configuration of an earlier run from its metadata file."""
        values: Dict[str, Any] = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidArgumentError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                if key.startswith(_RESULT_PREFIX):
                    continue
                if key not in cls.model_fields:
                    logger.warning(f"{path}:{lineno}: ignoring unknown key {key!r}")
                    continue
                values[key] = value if value != "" else None
        return cls.build(**values)
