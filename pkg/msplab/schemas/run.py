from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, Tuple

from msplab.schemas.evo import InitMode, Metric


class RunConfig(BaseModel):
    """Everything a pipeline command needs; loadable from --config JSON."""

    model_config_path: Optional[str] = None
    model_path: Optional[str] = None
    corpus: Optional[str] = None
    splits: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    calib_size: int = Field(default=128, ge=1)
    target: Optional[str] = None
    metric: Metric = Metric.WANDA

    # EvoConfig fields
    population_size: int = Field(default=20, ge=4)
    generations: int = Field(default=20, ge=1)
    mutation_rate: float = Field(default=0.5, ge=0, le=1)
    seed: int = 0
    init_mode: InitMode = InitMode.SENSITIVITY
    max_retries: int = Field(default=1000, ge=1)

    out: Optional[str] = None
    out_dir: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)

    model_config = {"protected_namespaces": ()}

    @field_validator("splits")
    @classmethod
    def _positive_splits(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(f <= 0 for f in value):
            raise ValueError("split fractions must be positive")
        if sum(value) > 1 + 1e-12:
            raise ValueError("split fractions must sum to at most 1")
        return value

    @model_validator(mode="after")
    def _target_parses(self) -> "RunConfig":
        from msplab.cli.corpus import parse_target
        from msplab.core.errors import UsageError

        if self.target is None:
            return self
        try:
            parse_target(self.target)
        except UsageError as e:
            raise ValueError(e.detail) from e
        return self
