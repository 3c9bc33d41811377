from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Any, Dict, List, Optional, Tuple


class InitMode(str, Enum):
    SENSITIVITY = "sensitivity"
    RANDOM = "random"
    REPAIR = "repair"


class Metric(str, Enum):
    MAGNITUDE = "magnitude"
    WANDA = "wanda"


class SparsityIndividual(BaseModel):
    """Genotype: pruned-per-group count n_l for every prunable layer.

    Constraints are not enforced at construction; validate_individual reports them.
    """

    model_config = ConfigDict(frozen=True)

    genes: Tuple[int, ...]
    group_size: int = Field(..., ge=1)  # M
    target_n: int = Field(..., ge=0)  # N

    @property
    def num_layers(self) -> int:
        return len(self.genes)

    @property
    def target_sum(self) -> int:
        return self.target_n * len(self.genes)

    @property
    def key(self) -> Tuple[int, ...]:
        return self.genes

    def with_genes(self, genes: List[int]) -> "SparsityIndividual":
        return SparsityIndividual(
            genes=tuple(int(g) for g in genes), group_size=self.group_size, target_n=self.target_n
        )

    @classmethod
    def uniform(cls, num_layers: int, target_n: int, group_size: int) -> "SparsityIndividual":
        return cls(genes=(target_n,) * num_layers, group_size=group_size, target_n=target_n)


class IndividualReport(BaseModel):
    valid: bool
    message: str = "ok"

    def __bool__(self) -> bool:
        return self.valid


class EvoConfig(BaseModel):
    population_size: int = Field(default=20, ge=4)
    generations: int = Field(default=20, ge=1)
    mutation_rate: float = Field(default=0.5, ge=0, le=1)
    seed: int = 0
    init_mode: InitMode = InitMode.SENSITIVITY
    metric: Metric = Metric.WANDA
    max_retries: int = Field(default=1000, ge=1)
    init_max_retries: int = Field(default=5_000_000, ge=1)
    target_n: int = Field(default=2, ge=0)  # N
    group_size: int = Field(default=4, ge=2)  # M

    @model_validator(mode="after")
    def _population_divisible(self) -> "EvoConfig":
        if self.population_size % 4 != 0:
            raise ValueError("population_size must be divisible by 4")
        if self.target_n > self.group_size:
            raise ValueError("target N must not exceed M")
        return self


class FitnessRecord(BaseModel):
    individual: SparsityIndividual
    ppl: float = Field(..., gt=0)


class GenerationRecord(BaseModel):
    gen: int
    best_ppl: float
    mean_ppl: float
    best_individual: List[int]


class SearchTrace(BaseModel):
    """Per-generation history plus the all-time best of one search run."""

    generations: List[GenerationRecord]
    individual: List[int]
    ppl: float
    cache_hits: int = 0

    def to_records(self) -> List[Dict[str, Any]]:
        records: List[Dict[str, Any]] = [g.model_dump() for g in self.generations]
        records.append(
            {"final": True, "individual": self.individual, "ppl": self.ppl, "cache_hits": self.cache_hits}
        )
        return records

    @classmethod
    def from_records(cls, records: List[Dict[str, Any]]) -> "SearchTrace":
        final: Optional[Dict[str, Any]] = None
        generations = []
        for record in records:
            if record.get("final"):
                final = record
            else:
                generations.append(GenerationRecord.model_validate(record))
        if final is None:
            raise ValueError("search trace has no final record")
        return cls(
            generations=generations,
            individual=final["individual"],
            ppl=final["ppl"],
            cache_hits=final.get("cache_hits", 0),
        )

    @property
    def best_curve(self) -> List[float]:
        return [g.best_ppl for g in self.generations]


class OracleResult(BaseModel):
    individual: List[int]
    ppl: float
    feasible_count: int
