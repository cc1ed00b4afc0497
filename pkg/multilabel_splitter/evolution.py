"""
Single-objective evolutionary splitter.

Individuals are assignments (one fold index per example). Each generation creates
offspring by one-point crossover and by mutation of parents picked by linear ranking,
repairs them to the exact fold sizes (and, optionally, to full label coverage),
scores them with LD' or LPD and keeps the best ``pop_size`` of parents plus
offspring. The search stops after ``stale_generations_max`` generations without
improvement of the best fitness.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Generic, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import numpy.typing as npt
from scipy import sparse

from multilabel_splitter import config
from multilabel_splitter.baselines import random_split
from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import ConfigError
from multilabel_splitter.folds import Assignment, FoldSpec, derive_seed, fold_indicator
from multilabel_splitter.split_metrics import (
    FITNESS_LD_PRIME,
    FITNESS_LPD,
    SplitEvaluator,
)

logger = logging.getLogger(__name__)

SEED_MASK = config.SEED_LIMIT - 1
# SeedSequence keys of the independent random streams of one run
INIT_STREAM = 0
GENERATION_STREAM = 1

Score = TypeVar("Score")

GenerationCallback = Callable[[int, List[Assignment], List[float]], None]


@dataclass(frozen=True)
class EAParams:
    pop_size: int = config.DEFAULT_POP_SIZE
    crossover_offspring: int = config.DEFAULT_CROSSOVER_OFFSPRING
    mutation_offspring: int = config.DEFAULT_MUTATION_OFFSPRING
    stale_generations_max: int = config.DEFAULT_STALE_GENERATIONS
    mutation_rate: float = config.DEFAULT_MUTATION_RATE
    runs: int = config.DEFAULT_RUNS
    fitness: str = FITNESS_LD_PRIME
    constrained: bool = False
    seed: int = config.DEFAULT_SEED
    improvement_epsilon: float = config.DEFAULT_IMPROVEMENT_EPSILON
    max_generations: Optional[int] = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.pop_size < 1:
            raise ConfigError(f"pop_size must be positive, got {self.pop_size}")
        if self.crossover_offspring < 0 or self.mutation_offspring < 0:
            raise ConfigError("offspring counts cannot be negative")
        if self.crossover_offspring + self.mutation_offspring < 1:
            raise ConfigError("at least one offspring per generation is required")
        if not 0 < self.mutation_rate <= 1:
            raise ConfigError(f"mutation_rate must lie in (0, 1], got {self.mutation_rate}")
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        if self.fitness not in (FITNESS_LD_PRIME, FITNESS_LPD):
            raise ConfigError(f"fitness must be LD_PRIME or LPD, got {self.fitness}")
        if self.stale_generations_max < 1:
            raise ConfigError("stale_generations_max must be positive")
        if not 0 <= self.seed < config.SEED_LIMIT:
            raise ConfigError(f"seed must lie in [0, 2**64), got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")


@dataclass
class EAResult:
    best_assignment: Assignment
    best_fitness: float
    generations: int
    run_index: int
    history: List[float] = field(default_factory=list)
    coverage_failures: int = 0


class PopulationEvaluator(Generic[Score]):
    """
    Maps a fitness function over individuals, on a thread pool when threads > 1.

    Results come back in input order, so parallel and sequential evaluation are
    identical.
    """

    def __init__(self, fitness: Callable[[Assignment], Score], threads: int = 1):
        self.fitness = fitness
        self.executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def __call__(self, individuals: Sequence[Assignment]) -> List[Score]:
        if self.executor is None or len(individuals) < 2:
            return [self.fitness(a) for a in individuals]
        return list(self.executor.map(self.fitness, individuals))

    def __enter__(self) -> "PopulationEvaluator[Score]":
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)


def init_population(
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    params: EAParams,
    seed: Optional[int] = None,
) -> List[Assignment]:
    """
    Random size-feasible individuals, label-coverage repaired when constrained.

    Individual i is drawn from its own stream derived from the seed, so the
    population does not depend on evaluation order.
    """
    seed = params.seed if seed is None else seed
    population = []
    for i in range(params.pop_size):
        individual = random_split(dataset, spec, derive_seed(seed, INIT_STREAM, i))
        if params.constrained:
            rng = np.random.default_rng(derive_seed(seed, INIT_STREAM, i, 1))
            individual, _ = repair_constraint_with_status(individual, dataset, spec, rng)
        population.append(individual)
    return population


def crossover_one_point(p1: Assignment, p2: Assignment, cut: int) -> Assignment:
    """Genes before ``cut`` from p1, the rest from p2. The child is not repaired."""
    if len(p1) != len(p2):
        raise ValueError(f"parents differ in length: {len(p1)} vs {len(p2)}")
    if not 0 < cut < len(p1):
        raise ValueError(f"cut {cut} outside (0, {len(p1)})")
    return np.concatenate([p1[:cut], p2[cut:]]).astype(np.int64)


def mutation_count(rate: float, m: int) -> int:
    """max(1, rate * m rounded half up)."""
    return max(1, int(np.floor(rate * m + 0.5)))


def mutate(
    assignment: Assignment, rate: float, k: int, rng: np.random.Generator
) -> Assignment:
    """
    Move ``mutation_count(rate, m)`` distinct genes to a different, uniformly chosen
    fold. The result is not repaired.
    """
    if k < 2:
        raise ValueError(f"mutation needs at least two folds, got k={k}")
    if not 0 < rate <= 1:
        raise ValueError(f"mutation rate must lie in (0, 1], got {rate}")
    child = np.array(assignment, dtype=np.int64, copy=True)
    positions = rng.choice(len(child), size=mutation_count(rate, len(child)), replace=False)
    child[positions] = (child[positions] + rng.integers(1, k, size=len(positions))) % k
    return child


def repair_sizes(
    assignment: Assignment, spec: FoldSpec, rng: np.random.Generator
) -> Assignment:
    """
    Move randomly chosen genes out of over-full folds into under-full ones until
    every fold holds exactly its target.
    """
    child = np.array(assignment, dtype=np.int64, copy=True)
    targets = np.asarray(spec.targets, dtype=np.int64)
    excess = np.bincount(child, minlength=spec.k) - targets
    if not excess.any():
        return child

    moved = [
        rng.choice(np.flatnonzero(child == j), size=int(excess[j]), replace=False)
        for j in np.flatnonzero(excess > 0)
    ]
    slots = np.repeat(np.arange(spec.k), np.maximum(-excess, 0))
    rng.shuffle(slots)
    child[np.concatenate(moved)] = slots
    return child


def repair_constraint(
    assignment: Assignment,
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    rng: np.random.Generator,
) -> Assignment:
    """
    Swap examples between folds until every label with presence >= k appears in
    every fold, where possible. Swaps keep the fold sizes.
    """
    repaired, _ = repair_constraint_with_status(assignment, dataset, spec, rng)
    return repaired


def repair_constraint_with_status(
    assignment: Assignment,
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    rng: np.random.Generator,
) -> Tuple[Assignment, bool]:
    """
    ``repair_constraint`` that also reports whether full coverage was reached.

    Each uncovered (fold, label) cell is fixed by swapping an example carrying the
    label, taken from a fold holding at least two of them, with an example of the
    deficient fold. Only swaps that uncover no other required cell are allowed, so
    the number of uncovered cells strictly decreases. At most 10 * q * k swap
    attempts are made.
    """
    k = spec.k
    child = np.array(assignment, dtype=np.int64, copy=True)
    required = dataset.presence_counts >= k
    if not required.any():
        return child, True

    presence = dataset.presence
    by_label = presence.tocsc()
    tally = np.asarray((fold_indicator(child, k) @ presence).todense(), dtype=np.int64)
    budget = 10 * dataset.q * k
    unrepairable: set[Tuple[int, int]] = set()

    for _ in range(budget):
        missing = [
            (int(f), int(label))
            for label, f in zip(*np.nonzero((tally == 0).T & required[:, None]))
            if (int(f), int(label)) not in unrepairable
        ]
        if not missing:
            return child, not unrepairable
        fold, label = missing[0]

        swap = _find_coverage_swap(child, tally, fold, label, presence, by_label, required, rng)
        if swap is None:
            unrepairable.add((fold, label))
            continue

        donor, receiver = swap
        source = child[donor]
        donor_row = presence[donor].toarray().ravel()
        receiver_row = presence[receiver].toarray().ravel()
        child[donor], child[receiver] = fold, source
        tally[source] += receiver_row - donor_row
        tally[fold] += donor_row - receiver_row
    else:
        missing_any = bool(((tally == 0) & required[None, :]).any())
        if missing_any:
            logger.warning(
                f"label coverage repair stopped after {budget} attempts with "
                f"{int(((tally == 0) & required[None, :]).sum())} uncovered fold-label pairs"
            )
        return child, not missing_any


def _find_coverage_swap(
    child: Assignment,
    tally: npt.NDArray[np.int64],
    fold: int,
    label: int,
    presence: sparse.csr_matrix,
    by_label: sparse.csc_matrix,
    required: npt.NDArray[np.bool_],
    rng: np.random.Generator,
) -> Optional[Tuple[int, int]]:
    carriers = by_label.indices[by_label.indptr[label] : by_label.indptr[label + 1]]
    donors = carriers[(child[carriers] != fold) & (tally[child[carriers], label] >= 2)]
    if len(donors) == 0:
        return None

    receivers = np.flatnonzero(child == fold)
    receiver_rows = presence[receivers].toarray()
    keep_in_fold = required & (tally[fold] > 0)

    for donor in rng.permutation(donors):
        source = child[donor]
        donor_row = presence[donor].toarray().ravel()
        fold_after = tally[fold] - receiver_rows + donor_row
        source_after = tally[source] + receiver_rows - donor_row
        keep_in_source = required & (tally[source] > 0)
        valid = (fold_after[:, keep_in_fold] > 0).all(axis=1) & (
            source_after[:, keep_in_source] > 0
        ).all(axis=1)
        if valid.any():
            return int(donor), int(rng.choice(receivers[valid]))
    return None


def linear_ranking_probabilities(n: int) -> npt.NDArray[np.float64]:
    """Selection probability proportional to n - rank, rank 0 being the best."""
    weights = np.arange(n, 0, -1, dtype=np.float64)
    return weights / weights.sum()


def make_offspring(
    ranked: Sequence[Assignment],
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    params: EAParams,
    rng: np.random.Generator,
) -> Tuple[List[Assignment], int]:
    """
    Crossover and mutation children of a population sorted best first.

    Every child is repaired to the exact fold sizes, then to label coverage when
    constrained. Returns the children and the number of coverage repairs that
    failed.
    """
    probabilities = linear_ranking_probabilities(len(ranked))
    m = dataset.m
    children: List[Assignment] = []
    failures = 0

    def select() -> Assignment:
        return ranked[int(rng.choice(len(ranked), p=probabilities))]

    def repair(child: Assignment) -> Assignment:
        nonlocal failures
        child = repair_sizes(child, spec, rng)
        if params.constrained:
            child, covered = repair_constraint_with_status(child, dataset, spec, rng)
            failures += not covered
        return child

    for _ in range(params.crossover_offspring):
        p1, p2 = select(), select()
        cut = int(rng.integers(1, m)) if m > 1 else 0
        child = crossover_one_point(p1, p2, cut) if m > 1 else p1.copy()
        children.append(repair(child))
    for _ in range(params.mutation_offspring):
        children.append(repair(mutate(select(), params.mutation_rate, spec.k, rng)))
    return children, failures


def evolve(
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    params: EAParams,
    run_seed: Optional[int] = None,
    run_index: int = 0,
    callback: Optional[GenerationCallback] = None,
) -> EAResult:
    """
    Run the evolutionary search once.

    Args:
        dataset: Data set to split
        spec: Fold specification
        params: Search parameters
        run_seed: Seed of this run, defaults to params.seed
        run_index: Index reported in the result
        callback: Called as callback(generation, population, fitness) after the
            initial population and after every generation

    Returns:
        The best individual ever seen and the per-generation best fitness
    """
    spec.check_dataset(dataset)
    if spec.k < 2:
        raise ConfigError(f"evolutionary splitting needs k >= 2, got {spec.k}")
    seed = params.seed if run_seed is None else run_seed
    evaluator = SplitEvaluator(dataset, spec)
    fitness_of = evaluator.metric(params.fitness)
    rng = np.random.default_rng(derive_seed(seed, GENERATION_STREAM))

    with PopulationEvaluator(fitness_of, params.threads) as evaluate:
        population = init_population(dataset, spec, params, seed)
        fitness = evaluate(population)
        order = np.argsort(fitness, kind="stable")
        population = [population[i] for i in order]
        fitness = [fitness[i] for i in order]
        if callback is not None:
            callback(0, population, fitness)

        history = [fitness[0]]
        best_fitness = fitness[0]
        failures = 0
        stale = 0
        generation = 0
        while stale < params.stale_generations_max:
            if params.max_generations is not None and generation >= params.max_generations:
                break
            generation += 1

            offspring, failed = make_offspring(population, dataset, spec, params, rng)
            failures += failed
            merged = population + offspring
            merged_fitness = fitness + evaluate(offspring)
            order = np.argsort(merged_fitness, kind="stable")[: params.pop_size]
            population = [merged[i] for i in order]
            fitness = [merged_fitness[i] for i in order]

            if fitness[0] < best_fitness - params.improvement_epsilon:
                stale = 0
            else:
                stale += 1
            best_fitness = min(best_fitness, fitness[0])
            history.append(fitness[0])
            logger.debug(f"generation {generation}: best {params.fitness}={fitness[0]:.6g}")
            if callback is not None:
                callback(generation, population, fitness)

    logger.info(
        f"run {run_index}: {params.fitness}={fitness[0]:.6g} after {generation} generations"
    )
    return EAResult(
        best_assignment=population[0],
        best_fitness=fitness[0],
        generations=generation,
        run_index=run_index,
        history=history,
        coverage_failures=failures,
    )


def run_best_of(
    dataset: MultiLabelDataset, spec: FoldSpec, params: EAParams
) -> EAResult:
    """
    Run ``params.runs`` independent searches seeded master_seed + run_index and
    keep the lowest fitness, ties going to the earlier run.
    """
    best: Optional[EAResult] = None
    for run_index in range(params.runs):
        result = evolve(
            dataset,
            spec,
            params,
            run_seed=(params.seed + run_index) & SEED_MASK,
            run_index=run_index,
        )
        if best is None or result.best_fitness < best.best_fitness:
            best = result
    assert best is not None
    return best
