from pydantic import BaseModel
from typing import List, Optional


class MaskCheckReport(BaseModel):
    """Outcome of verify_maskset; locates the first violating group."""

    valid: bool
    message: str = "ok"
    layer: Optional[str] = None
    row: Optional[int] = None
    group: Optional[int] = None
    keeps: Optional[int] = None
    expected: Optional[int] = None

    def __bool__(self) -> bool:
        return self.valid


class LayerSparsity(BaseModel):
    name: str
    n: int
    zero_fraction: float


class SparsityReport(BaseModel):
    group_size: int
    layers: List[LayerSparsity]

    @property
    def overall_zero_fraction(self) -> float:
        if not self.layers:
            return 0.0
        return sum(layer.zero_fraction for layer in self.layers) / len(self.layers)
