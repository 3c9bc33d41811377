"""
Pruning-oriented evolutionary search over per-layer N:M levels.

Every individual satisfies sum(n_l) == N * L and 0 <= n_l <= M; initialisation,
crossover and mutation all preserve that constraint. Fitness is the perplexity
of the masked model (lower is better), memoised by gene vector.

Random draws come from one numpy Generator consumed in a fixed order:
initialisation, then per generation a parent shuffle followed by, for each
pair, the crossover cut, the repair steps, and the two mutations.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from msplab.core.cache import CacheService
from msplab.core.config import settings
from msplab.core.errors import InputError, OracleCapError, SearchSetupError
from msplab.models import ModelParams
from msplab.models.batch import TokenSource
from msplab.schemas.evo import (
    EvoConfig,
    FitnessRecord,
    GenerationRecord,
    IndividualReport,
    InitMode,
    OracleResult,
    SearchTrace,
    SparsityIndividual,
)
from msplab.services.language_model import perplexity
from msplab.services.masks import ScoreSet, build_maskset

logger = logging.getLogger(__name__)

FitnessCache = CacheService[FitnessRecord]

_CHUNK = 4096


def validate_individual(ind: SparsityIndividual) -> IndividualReport:
    """Check 0 <= n_l <= M for every layer and sum(n_l) == N * L."""
    M, N, L = ind.group_size, ind.target_n, ind.num_layers
    if L == 0:
        return IndividualReport(valid=False, message="individual has no genes")
    if not 0 <= N <= M:
        return IndividualReport(valid=False, message=f"target N={N} outside [0, M={M}]")
    for layer, gene in enumerate(ind.genes):
        if not 0 <= gene <= M:
            return IndividualReport(valid=False, message=f"gene {layer} = {gene} outside [0, {M}]")
    total = sum(ind.genes)
    if total != N * L:
        return IndividualReport(valid=False, message=f"gene sum {total} != N*L = {N * L}")
    return IndividualReport(valid=True)


def _rng(seed: int, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(seed)


def _check_target(L: int, N: int, M: int, P: int) -> None:
    if L < 1:
        raise InputError("need at least one layer")
    if not 0 <= N <= M:
        raise InputError(f"target N={N} outside [0, M={M}]")
    if P < 1:
        raise InputError("population size must be positive")


def _individual(genes: Sequence[int], N: int, M: int) -> SparsityIndividual:
    return SparsityIndividual(genes=tuple(int(g) for g in genes), group_size=M, target_n=N)


def random_init_population(
    L: int,
    N: int,
    M: int,
    P: int,
    seed: int = 0,
    max_retries: int = 5_000_000,
    rng: Optional[np.random.Generator] = None,
) -> List[SparsityIndividual]:
    """Rejection sampling: genes uniform on [0, M] until the sum is exactly N * L."""
    _check_target(L, N, M, P)
    if N in (0, M):
        return [_individual([N] * L, N, M) for _ in range(P)]
    rng = _rng(seed, rng)
    target = N * L
    population = []
    for _ in range(P):
        draws = 0
        found: Optional[np.ndarray] = None
        while found is None:
            if draws >= max_retries:
                raise SearchSetupError(
                    f"random init drew {draws} candidates without hitting sum {target}; "
                    f"use a smaller L or init_mode=repair"
                )
            chunk = min(_CHUNK, max_retries - draws)
            candidates = rng.integers(0, M + 1, size=(chunk, L))
            hits = np.flatnonzero(candidates.sum(axis=1) == target)
            draws += chunk
            if hits.size:
                found = candidates[hits[0]]
        population.append(_individual(found, N, M))
    return population


def repair_genes(genes: List[int], target: int, M: int, rng: np.random.Generator) -> int:
    """Move a random gene one unit toward the target sum until it is met; returns step count.

    Terminates: while the sum is off target at least one gene can move.
    """
    total = sum(genes)
    steps = 0
    L = len(genes)
    while total != target:
        index = int(rng.integers(L))
        if total < target and genes[index] < M:
            genes[index] += 1
            total += 1
            steps += 1
        elif total > target and genes[index] >= 1:
            genes[index] -= 1
            total -= 1
            steps += 1
    return steps


def repair_init_population(
    L: int, N: int, M: int, P: int, seed: int = 0, rng: Optional[np.random.Generator] = None
) -> List[SparsityIndividual]:
    """Uniform random genes pushed onto the constraint by the crossover repair loop."""
    _check_target(L, N, M, P)
    rng = _rng(seed, rng)
    population = []
    for _ in range(P):
        genes = [int(g) for g in rng.integers(0, M + 1, size=L)]
        repair_genes(genes, N * L, M, rng)
        population.append(_individual(genes, N, M))
    return population


def sensitivity_init_population(
    L: int,
    N: int,
    M: int,
    P: int,
    seed: int = 0,
    max_retries: int = 5_000_000,
    rng: Optional[np.random.Generator] = None,
) -> List[SparsityIndividual]:
    """Front floor(L/5) layers get N - delta (delta in {0,1}); deeper layers absorb the
    removed units as N + delta' with delta' in {0..M-N}, so the sum stays N * L.
    """
    _check_target(L, N, M, P)
    if N == 0 or N == M:
        logger.warning(
            f"sensitivity init impossible at N={N}, M={M} (no front reduction or no headroom); "
            f"falling back to random init"
        )
        return random_init_population(L, N, M, P, seed, max_retries, rng)

    rng = _rng(seed, rng)
    front = L // 5
    deeper = L - front
    headroom = M - N
    population = []
    for _ in range(P):
        for _attempt in range(max_retries):
            delta_front = rng.integers(0, 2, size=front)
            removed = int(delta_front.sum())
            if removed <= deeper * headroom:
                break
        else:
            raise SearchSetupError("sensitivity init could not balance front and deeper layers")

        delta_deeper = np.zeros(deeper, dtype=np.int64)
        for _unit in range(removed):
            open_layers = np.flatnonzero(delta_deeper < headroom)
            delta_deeper[open_layers[int(rng.integers(open_layers.size))]] += 1

        genes = [N - int(d) for d in delta_front] + [N + int(d) for d in delta_deeper]
        population.append(_individual(genes, N, M))
    return population


def initialize_population(cfg: EvoConfig, L: int, rng: np.random.Generator) -> List[SparsityIndividual]:
    N, M, P = cfg.target_n, cfg.group_size, cfg.population_size
    if cfg.init_mode == InitMode.SENSITIVITY:
        return sensitivity_init_population(L, N, M, P, cfg.seed, cfg.init_max_retries, rng)
    if cfg.init_mode == InitMode.REPAIR:
        return repair_init_population(L, N, M, P, cfg.seed, rng)
    return random_init_population(L, N, M, P, cfg.seed, cfg.init_max_retries, rng)


def crossover(
    p1: SparsityIndividual,
    p2: SparsityIndividual,
    rng: np.random.Generator,
    cut: Optional[int] = None,
) -> Tuple[SparsityIndividual, SparsityIndividual]:
    """Single-point crossover followed by the sum repair loop on each child."""
    if (p1.num_layers, p1.group_size, p1.target_n) != (p2.num_layers, p2.group_size, p2.target_n):
        raise InputError("parents differ in layer count or target")
    L = p1.num_layers
    if L < 2:
        return p1, p2
    if cut is None:
        cut = int(rng.integers(1, L))
    elif not 1 <= cut <= L - 1:
        raise InputError(f"cut point {cut} outside [1, {L - 1}]")

    children = []
    for head, tail in ((p1, p2), (p2, p1)):
        genes = list(head.genes[:cut]) + list(tail.genes[cut:])
        steps = repair_genes(genes, p1.target_sum, p1.group_size, rng)
        if steps:
            logger.debug(f"crossover at {cut}: repaired child in {steps} steps")
        children.append(p1.with_genes(genes))
    return children[0], children[1]


def mutate(
    ind: SparsityIndividual,
    mutation_rate: float,
    rng: np.random.Generator,
    max_retries: int = 1000,
) -> SparsityIndividual:
    """With probability mutation_rate, redraw two distinct genes keeping their pair sum."""
    if rng.random() >= mutation_rate or ind.num_layers < 2:
        return ind
    first, second = (int(i) for i in rng.choice(ind.num_layers, size=2, replace=False))
    pair_sum = ind.genes[first] + ind.genes[second]
    for _ in range(max_retries):
        a, b = (int(v) for v in rng.integers(0, ind.group_size + 1, size=2))
        if a + b == pair_sum:
            genes = list(ind.genes)
            genes[first], genes[second] = a, b
            return ind.with_genes(genes)
    logger.warning(f"mutation gave up after {max_retries} draws; individual kept unchanged")
    return ind


def evaluate_fitness(
    ind: SparsityIndividual,
    params: ModelParams,
    scores: ScoreSet,
    eval_tokens: TokenSource,
    cache: FitnessCache,
) -> FitnessRecord:
    """Perplexity of the model masked by (scores, ind); identical genotypes are computed once."""
    cached = cache.get(ind.key)
    if cached is not None:
        return cached
    masks = build_maskset(scores, ind, params.config.layer_names)
    record = FitnessRecord(individual=ind, ppl=perplexity(params, eval_tokens, masks))
    cache.set(ind.key, record)
    return record


class FitnessEvaluator:
    """Evaluates populations against one model, score set and token stream."""

    def __init__(
        self,
        params: ModelParams,
        scores: ScoreSet,
        eval_tokens: TokenSource,
        cache: Optional[FitnessCache] = None,
        threads: Optional[int] = None,
    ):
        self.params = params
        self.scores = scores
        self.eval_tokens = eval_tokens
        self.cache: FitnessCache = cache if cache is not None else CacheService()
        self.threads = threads or settings.MSP_THREADS

    @property
    def cache_hits(self) -> int:
        return self.cache.hits

    @property
    def evaluations(self) -> int:
        """Number of genotypes actually evaluated (forward passes over the token stream)."""
        return self.cache.misses

    def evaluate(self, ind: SparsityIndividual) -> FitnessRecord:
        return evaluate_fitness(ind, self.params, self.scores, self.eval_tokens, self.cache)

    def evaluate_many(self, individuals: Sequence[SparsityIndividual]) -> List[FitnessRecord]:
        """Evaluate distinct uncached genotypes (concurrently), serve the rest from the cache."""
        pending: Dict[Tuple[int, ...], SparsityIndividual] = {}
        for ind in individuals:
            if ind.key not in pending and ind.key not in self.cache:
                pending[ind.key] = ind

        if len(pending) > 1 and (self.threads is None or self.threads > 1):
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                fresh = dict(zip(pending, pool.map(self.evaluate, pending.values())))
        else:
            fresh = {key: self.evaluate(ind) for key, ind in pending.items()}

        records = []
        for ind in individuals:
            record = fresh.pop(ind.key, None)
            records.append(record if record is not None else self.evaluate(ind))
        return records


def _rank_key(record: FitnessRecord) -> Tuple[float, Tuple[int, ...]]:
    return record.ppl, record.individual.genes


def select_parents(records: Sequence[FitnessRecord]) -> List[FitnessRecord]:
    """The best half by perplexity; ties go to the lexicographically smaller gene vector."""
    if not records:
        raise InputError("cannot select parents from an empty population")
    return sorted(records, key=_rank_key)[: len(records) // 2]


def breed(
    parents: Sequence[FitnessRecord], rng: np.random.Generator, cfg: EvoConfig
) -> List[SparsityIndividual]:
    """Shuffle parents, pair consecutively, two mutated crossover children per pair."""
    shuffled = [parents[int(i)].individual for i in rng.permutation(len(parents))]
    children: List[SparsityIndividual] = []
    for a, b in zip(shuffled[0::2], shuffled[1::2]):
        for child in crossover(a, b, rng):
            children.append(mutate(child, cfg.mutation_rate, rng, cfg.max_retries))
    return children


def run_search(
    params: ModelParams,
    scores: ScoreSet,
    eval_tokens: TokenSource,
    cfg: EvoConfig,
    threads: Optional[int] = None,
    evaluator: Optional[FitnessEvaluator] = None,
) -> SearchTrace:
    """Generational elitist search: parents survive, children fill the other half."""
    L = len(scores)
    rng = np.random.default_rng(cfg.seed)
    evaluator = evaluator or FitnessEvaluator(params, scores, eval_tokens, threads=threads)
    population = initialize_population(cfg, L, rng)

    generations: List[GenerationRecord] = []
    best: Optional[FitnessRecord] = None
    for gen in range(cfg.generations):
        records = evaluator.evaluate_many(population)
        leader = min(records, key=_rank_key)
        if best is None or _rank_key(leader) < _rank_key(best):
            best = leader
        mean_ppl = math.fsum(r.ppl for r in records) / len(records)
        generations.append(
            GenerationRecord(
                gen=gen, best_ppl=leader.ppl, mean_ppl=mean_ppl, best_individual=list(leader.individual.genes)
            )
        )
        logger.info(
            f"generation {gen + 1}/{cfg.generations}: best ppl {leader.ppl:.4f}, mean ppl {mean_ppl:.4f}, "
            f"evaluated {evaluator.evaluations}, cache hits {evaluator.cache_hits}"
        )
        if gen == cfg.generations - 1:
            break
        parents = select_parents(records)
        population = [p.individual for p in parents] + breed(parents, rng, cfg)

    assert best is not None
    return SearchTrace(
        generations=generations,
        individual=list(best.individual.genes),
        ppl=best.ppl,
        cache_hits=evaluator.cache_hits,
    )


def count_feasible(L: int, total: int, M: int) -> int:
    """Number of gene vectors of length L in [0, M] summing to total."""
    if total < 0:
        return 0
    ways = [1] + [0] * total
    for _ in range(L):
        nxt = [0] * (total + 1)
        for s, count in enumerate(ways):
            if count:
                for g in range(min(M, total - s) + 1):
                    nxt[s + g] += count
        ways = nxt
    return ways[total]


def iter_feasible(L: int, total: int, M: int) -> Iterator[Tuple[int, ...]]:
    """All feasible gene vectors in lexicographic order."""

    def extend(prefix: Tuple[int, ...], remaining: int, left: int) -> Iterator[Tuple[int, ...]]:
        if left == 0:
            if remaining == 0:
                yield prefix
            return
        low = max(0, remaining - M * (left - 1))
        for gene in range(low, min(M, remaining) + 1):
            yield from extend(prefix + (gene,), remaining - gene, left - 1)

    yield from extend((), total, L)


def exhaustive_oracle(
    params: ModelParams,
    scores: ScoreSet,
    eval_tokens: TokenSource,
    L: int,
    N: int,
    M: int,
    cap: Optional[int] = None,
    threads: Optional[int] = None,
    evaluator: Optional[FitnessEvaluator] = None,
) -> OracleResult:
    """Global optimum by enumerating every feasible individual (small L only)."""
    _check_target(L, N, M, 1)
    cap = settings.MSP_ORACLE_CAP if cap is None else cap
    count = count_feasible(L, N * L, M)
    if count > cap:
        raise OracleCapError(count, cap)

    evaluator = evaluator or FitnessEvaluator(params, scores, eval_tokens, threads=threads)
    best: Optional[FitnessRecord] = None
    seen = 0
    batch: List[SparsityIndividual] = []
    for genes in iter_feasible(L, N * L, M):
        batch.append(_individual(genes, N, M))
        if len(batch) == _CHUNK:
            best, seen = _fold_best(evaluator.evaluate_many(batch), best, seen)
            batch = []
    if batch:
        best, seen = _fold_best(evaluator.evaluate_many(batch), best, seen)

    assert best is not None and seen == count
    logger.info(f"oracle: {count} feasible individuals, best ppl {best.ppl:.4f} at {list(best.individual.genes)}")
    return OracleResult(individual=list(best.individual.genes), ppl=best.ppl, feasible_count=count)


def _fold_best(
    records: List[FitnessRecord], best: Optional[FitnessRecord], seen: int
) -> Tuple[Optional[FitnessRecord], int]:
    for record in records:
        if best is None or _rank_key(record) < _rank_key(best):
            best = record
    return best, seen + len(records)
