"""
Post-hoc analytics over search traces: trace/sparsity correlation, plateau
detection and grouped ablation summaries, plus CSV export for plotting.
"""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from msplab.core.errors import InputError, UndefinedCorrelationError
from msplab.core.storage import atomic_write_text, write_json
from msplab.schemas.analysis import AblationSummary, CorrelationPoint, GroupSummary, RunSummary
from msplab.schemas.evo import SearchTrace, SparsityIndividual
from msplab.schemas.sensitivity import LayerSensitivityReport

logger = logging.getLogger(__name__)

PLATEAU_TOLERANCE = 1e-3


def _pair(x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("correlation inputs must be equal-length vectors")
    if a.shape[0] < 2:
        raise InputError("correlation needs at least two points")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise UndefinedCorrelationError("correlation undefined for constant input")
    return a, b


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation, clipped to [-1, 1]."""
    a, b = _pair(x, y)
    r = float(stats.pearsonr(a, b)[0])
    return min(1.0, max(-1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation, for rank-only claims."""
    a, b = _pair(x, y)
    return float(stats.spearmanr(a, b)[0])


def trace_sparsity_correlation(
    ind: SparsityIndividual, report: LayerSensitivityReport, method: str = "pearson"
) -> float:
    """Correlation across layers of (trace_l, n_l / M); negative when sensitive layers are pruned less."""
    if ind.num_layers != len(report.layers):
        raise InputError(f"individual has {ind.num_layers} genes, report has {len(report.layers)} layers")
    sparsity = [g / ind.group_size for g in ind.genes]
    if method == "spearman":
        return spearman(report.traces, sparsity)
    return pearson(report.traces, sparsity)


def plateau_generation(best_curve: Sequence[float], tolerance: float = PLATEAU_TOLERANCE) -> int:
    """First generation whose best ppl is within `tolerance` (relative) of the final best."""
    if not best_curve:
        raise InputError("empty best-ppl curve")
    final = best_curve[-1]
    for gen, value in enumerate(best_curve):
        if abs(value - final) <= tolerance * abs(final):
            return gen
    return len(best_curve) - 1


def _individual(genes: Sequence[int], group_size: int) -> SparsityIndividual:
    return SparsityIndividual(
        genes=tuple(genes), group_size=group_size, target_n=sum(genes) // max(1, len(genes))
    )


def correlation_points(
    run_id: str, trace: SearchTrace, sensitivity: LayerSensitivityReport, group_size: int
) -> List[CorrelationPoint]:
    """One point per distinct per-generation best individual; uniform individuals are skipped."""
    points: List[CorrelationPoint] = []
    seen = set()
    for record in trace.generations:
        genes = tuple(record.best_individual)
        if genes in seen:
            continue
        seen.add(genes)
        ind = _individual(genes, group_size)
        try:
            corr = trace_sparsity_correlation(ind, sensitivity)
        except UndefinedCorrelationError:
            logger.debug(f"{run_id} gen {record.gen}: constant genes, no correlation point")
            continue
        points.append(
            CorrelationPoint(
                correlation=corr, ppl=record.best_ppl, individual_id=f"{run_id}:g{record.gen}", run_id=run_id
            )
        )
    return points


def summarize_search(
    traces: Sequence[Tuple[str, SearchTrace]],
    sensitivity: Optional[LayerSensitivityReport],
    group_size: Optional[int],
    groups: Optional[Dict[str, str]] = None,
    tolerance: float = PLATEAU_TOLERANCE,
) -> Tuple[AblationSummary, List[CorrelationPoint]]:
    """Per-run and per-group summaries plus correlation points.

    `traces` pairs a run id with its trace; `groups` maps run id -> grouping key
    (init mode, mutation rate, population size, ...); ungrouped runs share "all".
    """
    if not traces:
        raise InputError("no search traces to summarise")
    if sensitivity is not None and group_size is None:
        raise InputError("group size is needed to correlate sparsity with sensitivity")
    groups = groups or {}
    runs: List[RunSummary] = []
    points: List[CorrelationPoint] = []
    for run_id, trace in traces:
        if not trace.generations:
            raise InputError(f"run {run_id} has no generations")
        best_corr = None
        if sensitivity is not None and group_size is not None:
            run_points = correlation_points(run_id, trace, sensitivity, group_size)
            points.extend(run_points)
            try:
                best_corr = trace_sparsity_correlation(
                    _individual(trace.individual, group_size), sensitivity
                )
            except UndefinedCorrelationError:
                best_corr = None
        runs.append(
            RunSummary(
                run_id=run_id,
                group=groups.get(run_id, "all"),
                best_ppl=trace.ppl,
                final_mean_ppl=trace.generations[-1].mean_ppl,
                gen0_best_ppl=trace.generations[0].best_ppl,
                plateau_generation=plateau_generation(trace.best_curve, tolerance),
                generations=len(trace.generations),
                best_individual=trace.individual,
                best_correlation=best_corr,
            )
        )

    grouped: Dict[str, List[RunSummary]] = {}
    for run in runs:
        grouped.setdefault(run.group, []).append(run)
    summaries = [
        GroupSummary(
            key=key,
            runs=len(members),
            median_best_ppl=float(np.median([r.best_ppl for r in members])),
            median_mean_ppl=float(np.median([r.final_mean_ppl for r in members])),
            median_gen0_best_ppl=float(np.median([r.gen0_best_ppl for r in members])),
            median_plateau_generation=float(np.median([r.plateau_generation for r in members])),
        )
        for key, members in sorted(grouped.items())
    ]
    return AblationSummary(plateau_tolerance=tolerance, runs=runs, groups=summaries), points


def curves_csv(traces: Sequence[Tuple[str, SearchTrace]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["gen", "best_ppl", "mean_ppl", "run_id"])
    for run_id, trace in traces:
        for record in trace.generations:
            writer.writerow([record.gen, repr(record.best_ppl), repr(record.mean_ppl), run_id])
    return buffer.getvalue()


def correlations_csv(points: Sequence[CorrelationPoint]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["corr", "ppl", "run_id"])
    for point in points:
        writer.writerow([repr(point.correlation), repr(point.ppl), point.run_id])
    return buffer.getvalue()


def write_summary(
    out_dir: Union[str, Path],
    summary: AblationSummary,
    points: Sequence[CorrelationPoint],
    traces: Sequence[Tuple[str, SearchTrace]],
) -> Path:
    """report.json, curves.csv and correlations.csv under out_dir."""
    directory = Path(out_dir)
    write_json(directory / "report.json", {
        "summary": summary.model_dump(),
        "correlations": [p.model_dump() for p in points],
    })
    atomic_write_text(directory / "curves.csv", curves_csv(traces))
    atomic_write_text(directory / "correlations.csv", correlations_csv(points))
    logger.info(f"Analysis written to {directory}")
    return directory
