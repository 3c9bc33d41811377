from msplab.models.params import TensorSet, ModelParams, GradientSet
from msplab.models.batch import TokenWindowBatch, CalibrationSet, as_tokens
from msplab.models.masks import NmMaskSet

__all__ = [
    "TensorSet",
    "ModelParams",
    "GradientSet",
    "TokenWindowBatch",
    "CalibrationSet",
    "as_tokens",
    "NmMaskSet",
]
