import csv

import numpy as np
import pytest

from msplab.core.errors import InputError, UndefinedCorrelationError
from msplab.schemas.evo import GenerationRecord, SearchTrace, SparsityIndividual
from msplab.schemas.sensitivity import LayerSensitivityReport, LayerTrace
from msplab.services.analysis import (
    correlation_points,
    curves_csv,
    pearson,
    plateau_generation,
    spearman,
    summarize_search,
    trace_sparsity_correlation,
    write_summary,
)


def report(traces):
    return LayerSensitivityReport(
        calib_size=8,
        layers=[LayerTrace(name=f"layer.{i}", trace=t, param_count=16) for i, t in enumerate(traces)],
    )


def trace(best_curve, individuals, mean_offset=1.0):
    generations = [
        GenerationRecord(gen=g, best_ppl=b, mean_ppl=b + mean_offset, best_individual=list(genes))
        for g, (b, genes) in enumerate(zip(best_curve, individuals))
    ]
    return SearchTrace(generations=generations, individual=list(individuals[-1]), ppl=best_curve[-1], cache_hits=3)


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_anti(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_half(self):
        assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)

    def test_affine_invariance(self):
        rng = np.random.default_rng(0)
        x, y = rng.random(10), rng.random(10)
        assert pearson(x, 3.5 * y + 2.0) == pytest.approx(pearson(x, y), abs=1e-12)

    def test_matches_corrcoef(self):
        rng = np.random.default_rng(4)
        x, y = rng.random(12), rng.random(12)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)

    def test_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            assert -1.0 <= pearson(rng.random(5), rng.random(5)) <= 1.0

    def test_constant_input(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            pearson([1, 2], [1, 2, 3])


def test_spearman_is_rank_based():
    assert spearman([1, 2, 3, 4], [1, 8, 27, 64]) == pytest.approx(1.0)


class TestTraceSparsityCorrelation:
    def test_perfect_alignment(self):
        ind = SparsityIndividual(genes=(0, 3, 3), group_size=4, target_n=2)
        assert trace_sparsity_correlation(ind, report([10.0, 1.0, 1.0])) == pytest.approx(-1.0)

    def test_misalignment_is_positive(self):
        ind = SparsityIndividual(genes=(0, 3, 3), group_size=4, target_n=2)
        assert trace_sparsity_correlation(ind, report([1.0, 1.0, 10.0])) > 0

    def test_uniform_individual_is_undefined(self):
        ind = SparsityIndividual.uniform(3, 2, 4)
        with pytest.raises(UndefinedCorrelationError):
            trace_sparsity_correlation(ind, report([10.0, 1.0, 1.0]))

    def test_layer_permutation_invariance(self):
        genes, traces = (0, 1, 3, 4), [7.0, 5.0, 2.0, 1.0]
        order = [2, 0, 3, 1]
        base = trace_sparsity_correlation(SparsityIndividual(genes=genes, group_size=4, target_n=2), report(traces))
        permuted = trace_sparsity_correlation(
            SparsityIndividual(genes=tuple(genes[i] for i in order), group_size=4, target_n=2),
            report([traces[i] for i in order]),
        )
        assert permuted == pytest.approx(base, abs=1e-12)

    def test_spearman_option(self):
        ind = SparsityIndividual(genes=(0, 1, 3, 4), group_size=4, target_n=2)
        assert trace_sparsity_correlation(ind, report([9.0, 5.0, 2.0, 1.0]), method="spearman") == pytest.approx(-1.0)

    def test_layer_count_mismatch(self):
        with pytest.raises(InputError):
            trace_sparsity_correlation(SparsityIndividual.uniform(2, 2, 4), report([1.0, 2.0, 3.0]))


class TestPlateau:
    def test_first_generation_within_tolerance(self):
        assert plateau_generation([10.0, 8.0, 7.0, 7.0, 7.0]) == 2

    def test_tolerance_is_relative(self):
        assert plateau_generation([10.0, 7.005, 7.0], tolerance=1e-3) == 1

    def test_bounded_by_generations(self):
        assert plateau_generation([5.0, 4.0, 3.0]) <= 2

    def test_empty(self):
        with pytest.raises(InputError):
            plateau_generation([])


class TestSummarizeSearch:
    def _traces(self):
        a = trace([10.0, 8.0, 8.0], [(1, 3, 2, 2), (0, 2, 3, 3), (0, 2, 3, 3)])
        b = trace([12.0, 9.0, 7.0], [(2, 2, 2, 2), (3, 1, 2, 2), (0, 3, 2, 3)])
        return [("run-a", a), ("run-b", b)]

    def test_runs_and_groups(self):
        sensitivity = report([9.0, 4.0, 1.0, 1.5])
        summary, points = summarize_search(self._traces(), sensitivity, 4, {"run-a": "sensitivity", "run-b": "random"})
        assert [r.run_id for r in summary.runs] == ["run-a", "run-b"]
        assert [g.key for g in summary.groups] == ["random", "sensitivity"]
        run_a = summary.runs[0]
        assert (run_a.best_ppl, run_a.gen0_best_ppl, run_a.plateau_generation) == (8.0, 10.0, 1)
        assert run_a.best_correlation is not None
        assert {p.run_id for p in points} == {"run-a", "run-b"}
        # the uniform generation-0 best of run-b has no defined correlation
        assert all(p.individual_id != "run-b:g0" for p in points)
        assert all(-1.0 <= p.correlation <= 1.0 for p in points)

    def test_identical_inputs_identical_summaries(self):
        sensitivity = report([9.0, 4.0, 1.0, 1.5])
        assert summarize_search(self._traces(), sensitivity, 4) == summarize_search(self._traces(), sensitivity, 4)

    def test_without_sensitivity(self):
        summary, points = summarize_search(self._traces(), None, 4)
        assert points == []
        assert summary.groups[0].key == "all"
        assert summary.groups[0].median_best_ppl == pytest.approx(7.5)

    def test_group_size_only_needed_for_correlations(self):
        summary, _ = summarize_search(self._traces(), None, None)
        assert summary.groups[0].median_plateau_generation == pytest.approx(1.5)
        with pytest.raises(InputError):
            summarize_search(self._traces(), report([9.0, 4.0, 1.0, 1.5]), None)

    def test_empty(self):
        with pytest.raises(InputError):
            summarize_search([], None, 4)

    def test_correlation_points_deduplicate(self):
        _, a = self._traces()[0]
        points = correlation_points("run-a", a, report([9.0, 4.0, 1.0, 1.5]), 4)
        assert [p.individual_id for p in points] == ["run-a:g0", "run-a:g1"]


def test_curves_csv_header_and_rows():
    text = curves_csv([("r", trace([3.0, 2.0], [(1, 3), (2, 2)]))])
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == ["gen", "best_ppl", "mean_ppl", "run_id"]
    assert rows[1] == ["0", "3.0", "4.0", "r"]


def test_write_summary_files(tmp_path):
    traces = [("r", trace([3.0, 2.0], [(1, 3), (0, 4)]))]
    summary, points = summarize_search(traces, report([5.0, 1.0]), 4)
    out = write_summary(tmp_path / "analysis", summary, points, traces)
    assert sorted(p.name for p in out.iterdir()) == ["correlations.csv", "curves.csv", "report.json"]
    assert (out / "correlations.csv").read_text().splitlines()[0] == "corr,ppl,run_id"
