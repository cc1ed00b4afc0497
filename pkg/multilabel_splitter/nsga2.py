"""
Multi-objective splitter minimising (LD', LPD) with NSGA-II.

Offspring are produced with the same ranked selection, crossover, mutation and
repairs as the single-objective search; survival ranks parents plus offspring by
non-domination front, then by crowding distance. The split returned to the user is
the knee of the final front: the solution closest to the origin.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import ConfigError, EmptyFrontError
from multilabel_splitter.evolution import (
    GENERATION_STREAM,
    SEED_MASK,
    EAParams,
    PopulationEvaluator,
    init_population,
    make_offspring,
)
from multilabel_splitter.folds import Assignment, FoldSpec, derive_seed
from multilabel_splitter.split_metrics import SplitEvaluator

logger = logging.getLogger(__name__)


class ObjectivePair(NamedTuple):
    ld_prime: float
    lpd: float

    @property
    def distance(self) -> float:
        return math.sqrt(self.ld_prime**2 + self.lpd**2)


@dataclass
class ParetoFront:
    """Non-dominated solutions with their crowding distances."""

    solutions: List[Tuple[Assignment, ObjectivePair]]
    crowding: List[float]
    generations: int = 0
    run_index: int = 0
    # knee distance to the origin after every generation
    history: List[float] = field(default_factory=list)
    coverage_failures: int = 0

    @property
    def objectives(self) -> List[ObjectivePair]:
        return [pair for _, pair in self.solutions]

    def to_json(self) -> str:
        points = [{"ld_prime": p.ld_prime, "lpd": p.lpd} for p in self.objectives]
        return json.dumps(points, indent=2) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json())


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a is no worse than b everywhere and strictly better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated_sort(points: Sequence[Sequence[float]]) -> List[List[int]]:
    """
    Fast non-dominated sorting.

    Returns:
        Fronts as ascending index lists; front 0 is the non-dominated set
    """
    n = len(points)
    if n == 0:
        return []
    values = np.asarray(points, dtype=np.float64)
    no_worse = (values[:, None, :] <= values[None, :, :]).all(axis=2)
    better = (values[:, None, :] < values[None, :, :]).any(axis=2)
    # dominance[p, q]: p dominates q
    dominance = no_worse & better

    dominated_by = dominance.sum(axis=0)
    assigned = np.zeros(n, dtype=bool)
    fronts: List[List[int]] = []
    while not assigned.all():
        current = np.flatnonzero((dominated_by == 0) & ~assigned)
        fronts.append([int(i) for i in current])
        assigned[current] = True
        dominated_by = dominated_by - dominance[current].sum(axis=0)
    return fronts


def crowding_distance(front: Sequence[Sequence[float]]) -> List[float]:
    """
    Crowding distance of each member of one front.

    Boundary solutions of every objective get infinity; an objective with no spread
    adds nothing to interior members.
    """
    n = len(front)
    if n <= 2:
        return [math.inf] * n
    values = np.asarray(front, dtype=np.float64)
    distance = np.zeros(n)
    for objective in range(values.shape[1]):
        order = np.argsort(values[:, objective], kind="stable")
        column = values[order, objective]
        distance[order[0]] = distance[order[-1]] = math.inf
        spread = column[-1] - column[0]
        if spread == 0:
            continue
        distance[order[1:-1]] += (column[2:] - column[:-2]) / spread
    return [float(d) for d in distance]


def knee_index(objectives: Sequence[ObjectivePair]) -> int:
    """Index of the pair closest to the origin; ties by lower LD', then position."""
    if not objectives:
        raise EmptyFrontError("cannot select a knee from an empty front")
    return min(
        range(len(objectives)),
        key=lambda i: (objectives[i].distance, objectives[i].ld_prime, i),
    )


def select_knee(front: ParetoFront) -> Tuple[Assignment, ObjectivePair]:
    """Solution of the front with the smallest Euclidean distance to the origin."""
    return front.solutions[knee_index(front.objectives)]


def _survivors(objectives: List[ObjectivePair], size: int) -> Tuple[List[int], List[int]]:
    """
    Indices kept by front rank then crowding distance, with the knee of the first
    front always kept, in ranked order; and the front rank of each kept index.
    """
    fronts = non_dominated_sort(objectives)
    knee = fronts[0][knee_index([objectives[i] for i in fronts[0]])]
    kept: List[int] = []
    ranks: List[int] = []
    for rank, front in enumerate(fronts):
        crowding = crowding_distance([objectives[i] for i in front])
        by_crowding = sorted(
            range(len(front)),
            key=lambda j: (front[j] != knee, -crowding[j], front[j]),
        )
        for j in by_crowding[: size - len(kept)]:
            kept.append(front[j])
            ranks.append(rank)
        if len(kept) >= size:
            break
    return kept, ranks


def nsga2_evolve(
    dataset: MultiLabelDataset,
    spec: FoldSpec,
    params: EAParams,
    run_seed: Optional[int] = None,
    run_index: int = 0,
) -> ParetoFront:
    """
    Run NSGA-II once and return the first front of the final population.

    Stops when the knee objective pair has not moved by more than
    ``params.improvement_epsilon`` in either component for
    ``params.stale_generations_max`` generations. ``params.fitness`` is ignored.
    """
    spec.check_dataset(dataset)
    if spec.k < 2:
        raise ConfigError(f"evolutionary splitting needs k >= 2, got {spec.k}")
    seed = params.seed if run_seed is None else run_seed
    evaluator = SplitEvaluator(dataset, spec)

    def pair_of(assignment: Assignment) -> ObjectivePair:
        return ObjectivePair(evaluator.ld_prime(assignment), evaluator.lpd(assignment))

    rng = np.random.default_rng(derive_seed(seed, GENERATION_STREAM))
    with PopulationEvaluator(pair_of, params.threads) as evaluate:
        population = init_population(dataset, spec, params, seed)
        objectives = evaluate(population)
        order, _ = _survivors(objectives, params.pop_size)
        population = [population[i] for i in order]
        objectives = [objectives[i] for i in order]

        knee = objectives[knee_index(objectives)]
        history = [knee.distance]
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
            merged_objectives = objectives + evaluate(offspring)
            order, _ = _survivors(merged_objectives, params.pop_size)
            population = [merged[i] for i in order]
            objectives = [merged_objectives[i] for i in order]

            new_knee = objectives[knee_index(objectives)]
            moved = max(
                abs(new_knee.ld_prime - knee.ld_prime), abs(new_knee.lpd - knee.lpd)
            )
            stale = 0 if moved > params.improvement_epsilon else stale + 1
            knee = new_knee
            history.append(knee.distance)
            logger.debug(
                f"generation {generation}: knee LD'={knee.ld_prime:.6g} LPD={knee.lpd:.6g}"
            )

    first_front = non_dominated_sort(objectives)[0]
    front_objectives = [objectives[i] for i in first_front]
    logger.info(
        f"run {run_index}: {len(first_front)} solutions in the first front, knee "
        f"LD'={knee.ld_prime:.6g} LPD={knee.lpd:.6g} after {generation} generations"
    )
    return ParetoFront(
        solutions=[(population[i], objectives[i]) for i in first_front],
        crowding=crowding_distance(front_objectives),
        generations=generation,
        run_index=run_index,
        history=history,
        coverage_failures=failures,
    )


def run_nsga2_best_of(
    dataset: MultiLabelDataset, spec: FoldSpec, params: EAParams
) -> ParetoFront:
    """``params.runs`` independent runs; keeps the front with the closest knee."""
    best: Optional[ParetoFront] = None
    best_distance = math.inf
    for run_index in range(params.runs):
        front = nsga2_evolve(
            dataset,
            spec,
            params,
            run_seed=(params.seed + run_index) & SEED_MASK,
            run_index=run_index,
        )
        distance = select_knee(front)[1].distance
        if best is None or distance < best_distance:
            best, best_distance = front, distance
    assert best is not None
    return best
