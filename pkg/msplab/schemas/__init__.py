from msplab.schemas.model import ModelConfig, TrainHyper, VOCAB_SIZE
from msplab.schemas.sensitivity import (
    Estimator,
    LayerTrace,
    LayerSensitivityReport,
    LandscapePoint,
    LandscapeCurve,
)
from msplab.schemas.masks import MaskCheckReport, LayerSparsity, SparsityReport
from msplab.schemas.evo import (
    InitMode,
    Metric,
    SparsityIndividual,
    IndividualReport,
    EvoConfig,
    FitnessRecord,
    GenerationRecord,
    SearchTrace,
    OracleResult,
)
from msplab.schemas.analysis import (
    CorrelationPoint,
    RunSummary,
    GroupSummary,
    AblationSummary,
)
from msplab.schemas.run import RunConfig

__all__ = [
    "ModelConfig",
    "TrainHyper",
    "VOCAB_SIZE",
    "Estimator",
    "LayerTrace",
    "LayerSensitivityReport",
    "LandscapePoint",
    "LandscapeCurve",
    "MaskCheckReport",
    "LayerSparsity",
    "SparsityReport",
    "InitMode",
    "Metric",
    "SparsityIndividual",
    "IndividualReport",
    "EvoConfig",
    "FitnessRecord",
    "GenerationRecord",
    "SearchTrace",
    "OracleResult",
    "CorrelationPoint",
    "RunSummary",
    "GroupSummary",
    "AblationSummary",
    "RunConfig",
]
