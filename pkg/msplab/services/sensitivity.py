"""
Layer sensitivity.

The Hessian trace of each prunable layer is approximated by the trace of the
empirical Fisher information: H_ii ~ (1/N) sum_n (dL_n/dtheta_i)^2, squaring
per-sample gradients before averaging. A central second-difference estimate of
the Hessian diagonal and random-direction loss landscapes serve as independent
checks.
"""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from msplab.core.errors import InputError
from msplab.models import CalibrationSet, ModelParams
from msplab.schemas.sensitivity import (
    Estimator,
    LandscapeCurve,
    LandscapePoint,
    LayerSensitivityReport,
    LayerTrace,
)
from msplab.services.language_model import calibration_loss, layer_signals, run_forward

logger = logging.getLogger(__name__)

ScalarLoss = Callable[[np.ndarray], float]

DEFAULT_FD_STEP = 1e-3


def fisher_diagonal(per_sample_grads: np.ndarray) -> np.ndarray:
    """Empirical Fisher diagonal from a (N, ...) stack of per-sample gradients."""
    grads = np.asarray(per_sample_grads, dtype=np.float64)
    if grads.ndim == 0 or grads.shape[0] == 0:
        raise InputError("need at least one per-sample gradient")
    return np.mean(grads * grads, axis=0)


def _per_sample_signals(params: ModelParams, calib: CalibrationSet):
    calib.require()
    batch = calib.as_batch()
    forward = run_forward(params, batch)
    signals, _ = layer_signals(params, forward, batch.targets, 1.0)
    return signals


def fim_diagonal(params: ModelParams, calib: CalibrationSet) -> List[np.ndarray]:
    """Per-parameter Fisher diagonal of every prunable matrix.

    A linear layer's per-sample gradient is the outer product delta_n x_n^T, so
    its elementwise square is delta_n^2 (x_n^2)^T and the sample mean is a matmul.
    """
    signals = _per_sample_signals(params, calib)
    count = len(calib)
    return [((delta * delta).T @ (inputs * inputs)) / count for delta, inputs in signals]


def whole_model_fim_trace(params: ModelParams, calib: CalibrationSet) -> float:
    return float(sum(np.sum(diag) for diag in fim_diagonal(params, calib)))


def fim_layer_traces(params: ModelParams, calib: CalibrationSet) -> LayerSensitivityReport:
    """FIM trace of every prunable layer, in prunable-layer order."""
    signals = _per_sample_signals(params, calib)
    count = len(calib)
    entries = []
    for name, W, (delta, inputs) in zip(params.config.layer_names, params.prunable(), signals):
        # ||delta_n x_n^T||_F^2 = ||delta_n||^2 ||x_n||^2
        per_sample = np.sum(delta * delta, axis=1) * np.sum(inputs * inputs, axis=1)
        entries.append(LayerTrace(name=name, trace=float(np.sum(per_sample) / count), param_count=W.size))
    report = LayerSensitivityReport(calib_size=count, layers=entries, estimator=Estimator.FIM)
    logger.info(f"FIM traces over {count} samples; most sensitive: {report.ranking()[:3]}")
    return report


def hessian_diagonal_fd(loss_fn: ScalarLoss, theta: np.ndarray, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central second differences (f(t+h) - 2f(t) + f(t-h)) / h^2 with h = step * max(1, |t_i|)."""
    if not step > 0:
        raise InputError(f"finite-difference step must be positive, got {step}")
    point = np.array(theta, dtype=np.float64, copy=True)
    flat = point.reshape(-1)
    base = loss_fn(point)
    diagonal = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        original = flat[i]
        h = step * max(1.0, abs(original))
        flat[i] = original + h
        upper = loss_fn(point)
        flat[i] = original - h
        lower = loss_fn(point)
        flat[i] = original
        diagonal[i] = (upper - 2.0 * base + lower) / (h * h)
    return diagonal.reshape(point.shape)


def _layer_loss(params: ModelParams, calib: CalibrationSet, layer: int) -> ScalarLoss:
    prunable = params.prunable()

    def loss(weights: np.ndarray) -> float:
        matrices = list(prunable)
        matrices[layer] = weights
        return calibration_loss(params.with_prunable(matrices), calib)

    return loss


def hessian_diag_fd(
    params: ModelParams, calib: CalibrationSet, step: float = DEFAULT_FD_STEP
) -> LayerSensitivityReport:
    """Finite-difference Hessian-diagonal trace per prunable layer. Small models only."""
    if not step > 0:
        raise InputError(f"finite-difference step must be positive, got {step}")
    calib.require()
    entries = []
    for index, (name, W) in enumerate(zip(params.config.layer_names, params.prunable())):
        diagonal = hessian_diagonal_fd(_layer_loss(params, calib, index), W, step)
        entries.append(LayerTrace(name=name, trace=float(np.sum(diagonal)), param_count=W.size))
        logger.debug(f"FD Hessian trace {name}: {entries[-1].trace:.6g}")
    return LayerSensitivityReport(calib_size=len(calib), layers=entries, estimator=Estimator.FD_HESSIAN)


def rademacher(seed: int, layer: int, eps_index: int, direction: int, shape: Sequence[int]) -> np.ndarray:
    """The +-1 direction for substream (layer, eps_index, direction); order-independent."""
    sequence = np.random.SeedSequence([seed % 2**63, layer, eps_index, direction])
    rng = np.random.default_rng(sequence)
    return rng.integers(0, 2, size=tuple(shape)).astype(np.float64) * 2.0 - 1.0


def directional_loss_change(
    loss_fn: ScalarLoss,
    theta: np.ndarray,
    epsilons: Sequence[float],
    num_directions: int,
    direction_fn: Callable[[int, int], np.ndarray],
) -> List[float]:
    """Mean over directions of loss(theta + eps d) - loss(theta), per epsilon; exactly 0 at eps = 0."""
    if num_directions < 1:
        raise InputError("need at least one direction")
    point = np.asarray(theta, dtype=np.float64)
    base = loss_fn(point)
    changes = []
    for e_index, eps in enumerate(epsilons):
        if eps == 0.0:
            changes.append(0.0)
            continue
        deltas = [loss_fn(point + eps * direction_fn(e_index, r)) - base for r in range(num_directions)]
        changes.append(float(np.mean(deltas)))
    return changes


def loss_landscape(
    params: ModelParams,
    calib: CalibrationSet,
    layer: int,
    epsilons: Sequence[float],
    num_directions: int,
    seed: int = 0,
) -> LandscapeCurve:
    """Loss increase along random Rademacher directions of one layer's weights."""
    prunable = params.prunable()
    if not 0 <= layer < len(prunable):
        raise InputError(f"layer index {layer} out of range [0, {len(prunable) - 1}]")
    if num_directions < 1:
        raise InputError("num_directions must be >= 1")
    calib.require()

    grid = [float(e) for e in epsilons]
    W = prunable[layer]
    changes = directional_loss_change(
        _layer_loss(params, calib, layer),
        W,
        grid,
        num_directions,
        lambda e_index, r: rademacher(seed, layer, e_index, r, W.shape),
    )
    points = [LandscapePoint(epsilon=e, delta_loss=c) for e, c in zip(grid, changes)]
    if 0.0 not in grid:
        points.insert(0, LandscapePoint(epsilon=0.0, delta_loss=0.0))
    return LandscapeCurve(
        layer_name=params.config.layer_names[layer],
        num_directions=num_directions,
        points=points,
    )


def landscape_curvatures(
    params: ModelParams,
    calib: CalibrationSet,
    epsilon: float,
    num_directions: int,
    seed: int = 0,
    layers: Optional[Sequence[int]] = None,
) -> List[float]:
    """Per-layer delta_loss / (eps^2 / 2); E[d^T H d] = Tr(H) for Rademacher d."""
    indices = range(len(params.prunable())) if layers is None else layers
    return [
        loss_landscape(params, calib, layer, [epsilon], num_directions, seed).curvature(epsilon)
        for layer in indices
    ]
