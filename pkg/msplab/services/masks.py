"""
N:M mask construction under pluggable importance metrics.

Convention: n of every M consecutive weights along a row are PRUNED.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from msplab.core.errors import InputError
from msplab.core.storage import write_json
from msplab.models import CalibrationSet, ModelParams, NmMaskSet
from msplab.schemas.evo import Metric, SparsityIndividual
from msplab.schemas.masks import LayerSparsity, MaskCheckReport, SparsityReport
from msplab.services.language_model import apply_masks, perplexity, run_forward

logger = logging.getLogger(__name__)

ScoreSet = List[np.ndarray]
ActivationNorms = List[np.ndarray]


def feature_norms(inputs: np.ndarray) -> np.ndarray:
    """l2 norm of every input feature (column) over all rows."""
    return np.sqrt(np.sum(np.asarray(inputs, dtype=np.float64) ** 2, axis=0))


def collect_activation_norms(params: ModelParams, calib: CalibrationSet) -> ActivationNorms:
    """||X_j||_2 over the calibration windows for every prunable layer's input features."""
    calib.require()
    forward = run_forward(params, calib.as_batch())
    return [feature_norms(inputs) for inputs in forward.layer_inputs]


def magnitude_scores(params: ModelParams) -> ScoreSet:
    return [np.abs(W) for W in params.prunable()]


def wanda_scores(params: ModelParams, norms: ActivationNorms) -> ScoreSet:
    """|W_ij| * ||X_j||_2."""
    prunable = params.prunable()
    if len(norms) != len(prunable):
        raise InputError(f"got norms for {len(norms)} layers, model has {len(prunable)}")
    scores = []
    for name, W, norm in zip(params.config.layer_names, prunable, norms):
        norm = np.asarray(norm, dtype=np.float64)
        if norm.shape != (W.shape[1],):
            raise InputError(f"{name}: norm length {norm.shape} != input dimension {W.shape[1]}")
        scores.append(np.abs(W) * norm[None, :])
    return scores


def compute_scores(params: ModelParams, metric: Metric, calib: Optional[CalibrationSet] = None) -> ScoreSet:
    """Scores from the dense model under the named metric."""
    if metric == Metric.MAGNITUDE:
        return magnitude_scores(params)
    if calib is None:
        raise InputError("wanda scores need a calibration set")
    return wanda_scores(params, collect_activation_norms(params, calib))


def build_nm_mask(scores: np.ndarray, n: int, group_size: int) -> np.ndarray:
    """Keep-matrix pruning the n lowest scores of every row-wise group of M columns.

    Ties prune the lowest column index first (stable sort).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise InputError("scores must be a matrix")
    rows, cols = scores.shape
    if group_size < 1 or cols % group_size != 0:
        raise InputError(f"{cols} columns not divisible by M={group_size}")
    if not 0 <= n <= group_size:
        raise InputError(f"n={n} outside [0, {group_size}]")

    groups = scores.reshape(rows, cols // group_size, group_size)
    order = np.argsort(groups, axis=2, kind="stable")
    keep = np.ones_like(groups, dtype=bool)
    np.put_along_axis(keep, order[:, :, :n], False, axis=2)
    return keep.reshape(rows, cols)


def build_maskset(scores: ScoreSet, individual: SparsityIndividual, layer_names: Optional[List[str]] = None) -> NmMaskSet:
    """One N:M mask per layer, with that layer's gene as n."""
    if len(scores) != individual.num_layers:
        raise InputError(f"individual has {individual.num_layers} genes, score set has {len(scores)} layers")
    names = layer_names or [f"layer.{i}" for i in range(len(scores))]
    keep = tuple(build_nm_mask(s, n, individual.group_size) for s, n in zip(scores, individual.genes))
    return NmMaskSet(keep=keep, n=tuple(individual.genes), group_size=individual.group_size, layer_names=tuple(names))


def verify_maskset(masks: NmMaskSet, individual: SparsityIndividual) -> MaskCheckReport:
    """Exhaustive check that every group keeps exactly M - n_l entries."""
    M = masks.group_size
    if len(masks.keep) != individual.num_layers:
        return MaskCheckReport(valid=False, message=f"{len(masks.keep)} masks for {individual.num_layers} genes")
    for index, (keep, n) in enumerate(zip(masks.keep, individual.genes)):
        name = masks.layer_names[index] if index < len(masks.layer_names) else f"layer.{index}"
        rows, cols = keep.shape
        if cols % M != 0:
            return MaskCheckReport(valid=False, message=f"{name}: {cols} columns not divisible by M={M}", layer=name)
        counts = keep.reshape(rows, cols // M, M).sum(axis=2)
        expected = M - n
        bad = np.argwhere(counts != expected)
        if bad.size:
            row, group = (int(v) for v in bad[0])
            return MaskCheckReport(
                valid=False,
                message=f"{name} row {row} group {group} keeps {int(counts[row, group])}, expected {expected}",
                layer=name,
                row=row,
                group=group,
                keeps=int(counts[row, group]),
                expected=expected,
            )
    return MaskCheckReport(valid=True)


def sparsity_report(params: ModelParams, masks: NmMaskSet) -> SparsityReport:
    """Achieved zero fraction of every prunable layer after masking."""
    masked = apply_masks(params, masks)
    return SparsityReport(
        group_size=masks.group_size,
        layers=[
            LayerSparsity(name=name, n=n, zero_fraction=float(np.mean(W == 0.0)))
            for name, n, W in zip(params.config.layer_names, masks.n, masked.prunable())
        ],
    )


def baseline_uniform_perplexity(
    params: ModelParams, scores: ScoreSet, tokens, target_n: int, group_size: int
) -> float:
    """Perplexity of plain uniform N:M pruning under the given scores."""
    individual = SparsityIndividual.uniform(len(scores), target_n, group_size)
    masks = build_maskset(scores, individual, params.config.layer_names)
    return perplexity(params, tokens, masks)


def export_masks(masks: NmMaskSet, path: Union[str, Path]) -> Path:
    target = write_json(path, masks.to_json())
    logger.info(f"Masks written to {target}")
    return target
