import math

import numpy as np
import pytest

from msplab.core.cache import CacheService
from msplab.core.errors import InputError, OracleCapError, SearchSetupError
from msplab.schemas.evo import EvoConfig, FitnessRecord, InitMode, Metric, SearchTrace, SparsityIndividual
from msplab.services.evolution import (
    FitnessEvaluator,
    count_feasible,
    crossover,
    evaluate_fitness,
    exhaustive_oracle,
    iter_feasible,
    mutate,
    random_init_population,
    repair_init_population,
    run_search,
    select_parents,
    sensitivity_init_population,
    validate_individual,
)
from msplab.services.analysis import plateau_generation
from msplab.services.language_model import perplexity
from msplab.services.masks import baseline_uniform_perplexity, compute_scores, magnitude_scores

SEARCHED_HALF_M4 = [
    2, 1, 2, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    2, 2, 2, 2, 3, 2, 3, 2, 2, 2, 2, 2, 3, 2, 2, 2, 3, 2, 2, 2,
]
SEARCHED_THREE_QUARTER_M4 = [
    2, 2, 2, 1, 1, 1, 2, 2, 4, 4, 4, 3, 4, 2, 4, 2, 4, 3, 2, 2,
    4, 2, 4, 2, 4, 3, 3, 4, 4, 4, 4, 4, 3, 4, 4, 3, 4, 3, 3, 3,
]


def ind(genes, n, m=4):
    return SparsityIndividual(genes=tuple(genes), group_size=m, target_n=n)


@pytest.fixture
def fitness_tokens(corpus):
    return corpus[8000:8600]


class TestValidateIndividual:
    def test_searched_half_sparsity(self):
        assert sum(SEARCHED_HALF_M4) == 80
        assert validate_individual(ind(SEARCHED_HALF_M4, 2))

    def test_searched_three_quarter_sparsity(self):
        assert sum(SEARCHED_THREE_QUARTER_M4) == 120
        assert validate_individual(ind(SEARCHED_THREE_QUARTER_M4, 3))

    def test_worked_example(self):
        assert validate_individual(ind([2, 3, 4, 3, 3], 3))

    def test_sum_violation(self):
        report = validate_individual(ind([4, 4], 3))
        assert not report
        assert "sum 8" in report.message

    def test_gene_out_of_range(self):
        assert not validate_individual(ind([5, 1], 3))


class TestInitialisation:
    @pytest.mark.parametrize("n", [0, 4])
    def test_single_feasible_point(self, n):
        population = random_init_population(6, n, 4, 8, seed=0)
        assert all(p.genes == (n,) * 6 for p in population)

    def test_random_init_valid(self):
        population = random_init_population(12, 3, 4, 20, seed=1)
        assert len(population) == 20
        assert all(validate_individual(p) for p in population)

    def test_random_init_deterministic(self):
        assert random_init_population(12, 2, 4, 8, seed=5) == random_init_population(12, 2, 4, 8, seed=5)

    def test_random_init_gives_up(self):
        with pytest.raises(SearchSetupError, match="repair"):
            random_init_population(200, 1, 4, 4, seed=0, max_retries=10)

    def test_repair_init_valid_for_long_genomes(self):
        population = repair_init_population(200, 1, 4, 8, seed=0)
        assert all(validate_individual(p) for p in population)

    def test_sensitivity_worked_example_reachable(self):
        population = sensitivity_init_population(5, 3, 4, 200, seed=0)
        assert (2, 3, 4, 3, 3) in {p.genes for p in population}

    def test_sensitivity_front_below_deeper(self):
        L, N = 12, 2
        front = L // 5
        for p in sensitivity_init_population(L, N, 4, 1000, seed=3):
            assert validate_individual(p)
            assert all(g in (N - 1, N) for g in p.genes[:front])
            if sum(N - g for g in p.genes[:front]) > 0:
                assert np.mean(p.genes[:front]) <= N < max(p.genes[front:])

    def test_sensitivity_falls_back_at_extremes(self):
        population = sensitivity_init_population(5, 4, 4, 4, seed=0)
        assert all(p.genes == (4,) * 5 for p in population)

    def test_invalid_target(self):
        with pytest.raises(InputError):
            random_init_population(4, 5, 4, 4)


class TestCrossover:
    def test_identical_parents(self):
        p = ind([1, 3, 2, 2], 2)
        assert crossover(p, p, np.random.default_rng(0)) == (p, p)

    def test_repair_example(self):
        c1, c2 = crossover(ind([4, 0, 2, 2], 2), ind([0, 4, 2, 2], 2), np.random.default_rng(0), cut=1)
        for child in (c1, c2):
            assert sum(child.genes) == 8
            assert all(0 <= g <= 4 for g in child.genes)

    def test_cut_out_of_range(self):
        p = ind([2, 2, 2], 2)
        with pytest.raises(InputError):
            crossover(p, p, np.random.default_rng(0), cut=3)

    def test_children_always_valid(self):
        rng = np.random.default_rng(1)
        parents = random_init_population(8, 2, 4, 40, rng=rng)
        for _ in range(10_000):
            a, b = (parents[int(i)] for i in rng.integers(0, len(parents), size=2))
            for child in crossover(a, b, rng):
                assert validate_individual(child)


class TestMutate:
    def test_zero_rate(self):
        p = ind([1, 3, 2, 2], 2)
        assert mutate(p, 0.0, np.random.default_rng(0)) is p

    def test_pair_sum_enumeration(self):
        rng = np.random.default_rng(0)
        outcomes = {mutate(ind([2, 2], 2), 1.0, rng).genes for _ in range(500)}
        assert outcomes <= {(0, 4), (1, 3), (2, 2), (3, 1), (4, 0)}
        assert len(outcomes) > 1

    def test_mutations_always_valid(self):
        rng = np.random.default_rng(2)
        population = random_init_population(10, 2, 4, 50, rng=rng)
        for step in range(10_000):
            child = mutate(population[step % 50], 0.5, rng)
            assert validate_individual(child)


def test_mixed_operations_preserve_constraint():
    rng = np.random.default_rng(9)
    L, N, M = 12, 3, 4
    population = sensitivity_init_population(L, N, M, 20, rng=rng) + random_init_population(L, N, M, 20, rng=rng)
    for _ in range(10_000):
        op = rng.integers(3)
        i, j = (int(v) for v in rng.integers(0, len(population), size=2))
        if op == 0:
            population[i], population[j] = crossover(population[i], population[j], rng)
        elif op == 1:
            population[i] = mutate(population[i], 0.5, rng)
        else:
            population[i] = repair_init_population(L, N, M, 1, rng=rng)[0]
    assert all(validate_individual(p) for p in population)


class TestSelectParents:
    def _records(self, ppls):
        return [FitnessRecord(individual=ind([k, 4 - k], 2), ppl=p) for k, p in enumerate(ppls)]

    def test_top_half(self):
        parents = select_parents(self._records([9.0, 7.0, 8.0, 10.0]))
        assert [p.ppl for p in parents] == [7.0, 8.0]

    def test_ties_by_gene_order(self):
        parents = select_parents(self._records([5.0, 5.0, 5.0, 5.0]))
        assert [p.individual.genes for p in parents] == [(0, 4), (1, 3)]

    def test_empty(self):
        with pytest.raises(InputError):
            select_parents([])


class TestFitness:
    def test_zero_individual_is_dense(self, trained_params, fitness_tokens, fitness_cache):
        scores = magnitude_scores(trained_params)
        record = evaluate_fitness(ind([0] * 4, 0), trained_params, scores, fitness_tokens, fitness_cache)
        assert record.ppl == perplexity(trained_params, fitness_tokens)

    def test_fully_pruned_is_uniform(self, trained_params, fitness_tokens, fitness_cache):
        scores = magnitude_scores(trained_params)
        record = evaluate_fitness(ind([4] * 4, 4), trained_params, scores, fitness_tokens, fitness_cache)
        assert record.ppl == pytest.approx(256.0, rel=1e-9)

    def test_cache_hit_on_repeat(self, trained_params, fitness_tokens):
        evaluator = FitnessEvaluator(trained_params, magnitude_scores(trained_params), fitness_tokens)
        first = evaluator.evaluate(ind([1, 3, 2, 2], 2))
        second = evaluator.evaluate(ind([1, 3, 2, 2], 2))
        assert first == second
        assert (evaluator.evaluations, evaluator.cache_hits) == (1, 1)

    def test_evaluate_many_deduplicates(self, trained_params, fitness_tokens):
        evaluator = FitnessEvaluator(trained_params, magnitude_scores(trained_params), fitness_tokens, threads=4)
        population = [ind([1, 3, 2, 2], 2), ind([2, 2, 2, 2], 2), ind([1, 3, 2, 2], 2)]
        records = evaluator.evaluate_many(population)
        assert [r.individual for r in records] == population
        assert evaluator.evaluations == 2
        assert evaluator.cache_hits == 1

    @pytest.mark.parametrize("metric", list(Metric))
    def test_uniform_equals_baseline_bitwise(self, trained_params, calib, fitness_tokens, metric):
        scores = compute_scores(trained_params, metric, calib)
        evaluator = FitnessEvaluator(trained_params, scores, fitness_tokens)
        fitness = evaluator.evaluate(SparsityIndividual.uniform(4, 2, 4)).ppl
        assert fitness == baseline_uniform_perplexity(trained_params, scores, fitness_tokens, 2, 4)


class TestRunSearch:
    def _config(self, **overrides):
        fields = dict(population_size=8, generations=5, seed=1, init_mode=InitMode.RANDOM, target_n=2, group_size=4)
        fields.update(overrides)
        return EvoConfig(**fields)

    def test_trace_shape_and_monotone_best(self, trained_params, fitness_tokens):
        trace = run_search(trained_params, magnitude_scores(trained_params), fitness_tokens, self._config())
        assert [g.gen for g in trace.generations] == list(range(5))
        curve = trace.best_curve
        assert all(b <= a for a, b in zip(curve, curve[1:]))
        assert trace.ppl == min(curve)
        assert validate_individual(ind(trace.individual, 2))

    def test_deterministic(self, trained_params, fitness_tokens):
        scores = magnitude_scores(trained_params)
        first = run_search(trained_params, scores, fitness_tokens, self._config(seed=4))
        second = run_search(trained_params, scores, fitness_tokens, self._config(seed=4))
        assert first.to_records() == second.to_records()

    def test_threads_do_not_change_trace(self, trained_params, fitness_tokens):
        scores = magnitude_scores(trained_params)
        serial = run_search(trained_params, scores, fitness_tokens, self._config(), threads=1)
        parallel = run_search(trained_params, scores, fitness_tokens, self._config(), threads=4)
        assert serial.to_records() == parallel.to_records()

    def test_trace_records_round_trip(self, trained_params, fitness_tokens):
        trace = run_search(trained_params, magnitude_scores(trained_params), fitness_tokens, self._config(generations=2))
        records = trace.to_records()
        assert records[-1]["final"] is True
        assert set(records[0]) == {"gen", "best_ppl", "mean_ppl", "best_individual"}
        assert SearchTrace.from_records(records) == trace

    def test_population_must_be_divisible_by_four(self):
        with pytest.raises(ValueError):
            EvoConfig(population_size=10)

    @pytest.mark.slow
    def test_reaches_exhaustive_optimum(self, trained_params, calib, fitness_tokens):
        scores = compute_scores(trained_params, Metric.WANDA, calib)
        oracle = exhaustive_oracle(trained_params, scores, fitness_tokens, 4, 2, 4)
        hits = 0
        for seed in range(5):
            trace = run_search(
                trained_params, scores, fitness_tokens, self._config(population_size=20, generations=30, seed=seed)
            )
            assert trace.ppl >= oracle.ppl
            assert trace.ppl <= 1.05 * oracle.ppl
            hits += trace.ppl == oracle.ppl
        assert hits >= 3


class TestOracle:
    def test_feasible_count_matches_inclusion_exclusion(self):
        # compositions of 8 into 4 parts in [0, 4]
        expected = sum((-1) ** j * math.comb(4, j) * math.comb(8 - 5 * j + 3, 3) for j in range(2))
        assert expected == 85
        assert count_feasible(4, 8, 4) == 85
        assert len(list(iter_feasible(4, 8, 4))) == 85

    def test_single_layer(self):
        assert list(iter_feasible(1, 3, 4)) == [(3,)]
        assert count_feasible(1, 3, 4) == 1

    def test_enumeration_is_lexicographic_and_valid(self):
        vectors = list(iter_feasible(3, 6, 4))
        assert vectors == sorted(vectors)
        assert all(sum(v) == 6 and max(v) <= 4 for v in vectors)

    def test_oracle_beats_uniform(self, trained_params, fitness_tokens):
        scores = magnitude_scores(trained_params)
        result = exhaustive_oracle(trained_params, scores, fitness_tokens, 4, 2, 4)
        assert result.feasible_count == 85
        assert result.ppl <= baseline_uniform_perplexity(trained_params, scores, fitness_tokens, 2, 4)

    def test_cap(self, trained_params, fitness_tokens):
        with pytest.raises(OracleCapError) as excinfo:
            exhaustive_oracle(trained_params, magnitude_scores(trained_params), fitness_tokens, 4, 2, 4, cap=10)
        assert excinfo.value.count == 85

    def test_shares_cache_with_evaluator(self, trained_params, fitness_tokens):
        evaluator = FitnessEvaluator(trained_params, magnitude_scores(trained_params), fitness_tokens, cache=CacheService())
        exhaustive_oracle(trained_params, evaluator.scores, fitness_tokens, 4, 2, 4, evaluator=evaluator)
        assert len(evaluator.cache) == 85


class TestSearchDirections:
    """Searches on a converged k=8 model; fitness on the bytes after the training region."""

    @staticmethod
    def _search(params, scores, tokens, evaluator, **overrides):
        fields = dict(target_n=3, group_size=4, population_size=20, generations=20)
        fields.update(overrides)
        return run_search(params, scores, tokens, EvoConfig(**fields), evaluator=evaluator)

    @pytest.mark.slow
    @pytest.mark.parametrize("metric", list(Metric))
    def test_search_beats_uniform_three_quarter(self, converged_model, held_out_calib, corpus, metric):
        params = converged_model(0)
        scores = compute_scores(params, metric, held_out_calib)
        tokens = corpus[8000:9000]
        evaluator = FitnessEvaluator(params, scores, tokens)
        uniform = evaluator.evaluate(SparsityIndividual.uniform(4, 3, 4))
        wins = 0
        for seed in range(5):
            trace = self._search(params, scores, tokens, evaluator, seed=seed, metric=metric)
            assert trace.ppl <= uniform.ppl
            wins += trace.ppl < uniform.ppl
        assert wins >= 4

    @pytest.mark.slow
    def test_sensitivity_init_no_worse_than_random_init(self, converged_model, held_out_calib, corpus):
        params = converged_model(0, blocks=10)
        scores = compute_scores(params, Metric.WANDA, held_out_calib)
        tokens = corpus[8000:9000]
        evaluator = FitnessEvaluator(params, scores, tokens)
        medians = {}
        for mode in (InitMode.SENSITIVITY, InitMode.RANDOM):
            traces = [self._search(params, scores, tokens, evaluator, seed=seed, init_mode=mode) for seed in range(5)]
            medians[mode] = (
                np.median([t.generations[0].best_ppl for t in traces]),
                np.median([plateau_generation(t.best_curve) for t in traces]),
            )
        assert medians[InitMode.SENSITIVITY][0] <= medians[InitMode.RANDOM][0]
        assert medians[InitMode.SENSITIVITY][1] <= medians[InitMode.RANDOM][1]
