from pydantic import BaseModel, Field
from typing import List, Optional


class CorrelationPoint(BaseModel):
    correlation: float = Field(..., ge=-1, le=1)
    ppl: float
    individual_id: str
    run_id: str = ""


class RunSummary(BaseModel):
    run_id: str
    group: str
    best_ppl: float
    final_mean_ppl: float
    gen0_best_ppl: float
    plateau_generation: int
    generations: int
    best_individual: List[int]
    best_correlation: Optional[float] = None


class GroupSummary(BaseModel):
    key: str
    runs: int
    median_best_ppl: float
    median_mean_ppl: float
    median_gen0_best_ppl: float
    median_plateau_generation: float


class AblationSummary(BaseModel):
    plateau_tolerance: float
    runs: List[RunSummary]
    groups: List[GroupSummary]
