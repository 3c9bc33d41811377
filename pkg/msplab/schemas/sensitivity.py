from enum import Enum
from pydantic import BaseModel, Field, model_validator
from typing import List


class Estimator(str, Enum):
    FIM = "fim"
    FD_HESSIAN = "fd_hessian"


class LayerTrace(BaseModel):
    name: str
    trace: float
    param_count: int = Field(..., ge=0)


class LayerSensitivityReport(BaseModel):
    """Per-layer Hessian-trace estimates in prunable-layer order."""

    calib_size: int = Field(..., ge=1)
    layers: List[LayerTrace]
    estimator: Estimator = Estimator.FIM

    @model_validator(mode="after")
    def _fim_non_negative(self) -> "LayerSensitivityReport":
        # Second differences may dip below zero; sums of squares may not.
        if self.estimator == Estimator.FIM and any(layer.trace < 0 for layer in self.layers):
            raise ValueError("FIM traces must be non-negative")
        return self

    @property
    def traces(self) -> List[float]:
        return [layer.trace for layer in self.layers]

    @property
    def names(self) -> List[str]:
        return [layer.name for layer in self.layers]

    @property
    def total_trace(self) -> float:
        return float(sum(self.traces))

    def ranking(self) -> List[str]:
        """Layer names, most sensitive first."""
        order = sorted(range(len(self.layers)), key=lambda i: (-self.layers[i].trace, i))
        return [self.layers[i].name for i in order]

    def to_file(self) -> dict:
        return {
            "calib_size": self.calib_size,
            "layers": [layer.model_dump() for layer in self.layers],
        }


class LandscapePoint(BaseModel):
    epsilon: float
    delta_loss: float


class LandscapeCurve(BaseModel):
    layer_name: str
    num_directions: int = Field(..., ge=1)
    points: List[LandscapePoint]

    @model_validator(mode="after")
    def _has_origin(self) -> "LandscapeCurve":
        if not any(p.epsilon == 0.0 and p.delta_loss == 0.0 for p in self.points):
            raise ValueError("landscape curve must contain epsilon=0 with delta_loss=0")
        return self

    def curvature(self, epsilon: float) -> float:
        """delta_loss / (eps^2 / 2) at the given epsilon: a trace estimate."""
        for point in self.points:
            if point.epsilon == epsilon and epsilon != 0.0:
                return point.delta_loss / (0.5 * epsilon * epsilon)
        raise KeyError(f"No non-zero epsilon {epsilon} on curve for {self.layer_name}")
