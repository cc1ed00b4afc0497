"""
Exhaustive search over every size-feasible assignment of a tiny data set.

Used as ground truth for the evolutionary splitters and by ``split --oracle``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from multilabel_splitter.config import ORACLE_LIMIT
from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import OracleSizeError
from multilabel_splitter.evolution import PopulationEvaluator
from multilabel_splitter.folds import Assignment, FoldSpec
from multilabel_splitter.nsga2 import ObjectivePair, non_dominated_sort
from multilabel_splitter.split_metrics import SplitEvaluator

logger = logging.getLogger(__name__)

# Assignments scored per evaluator call
BATCH_SIZE = 4096
# Values this close to the optimum count as optimal
TIE_TOLERANCE = 1e-12


@dataclass
class OracleResult:
    optimum_value: float
    optimizers: List[Assignment]
    enumerated: int
    # every distinct (LD', LPD) pair, sorted
    pareto_pairs: List[ObjectivePair] = field(default_factory=list)

    def non_dominated_pairs(self) -> List[ObjectivePair]:
        """The true Pareto front among all enumerated objective pairs."""
        if not self.pareto_pairs:
            return []
        return [self.pareto_pairs[i] for i in non_dominated_sort(self.pareto_pairs)[0]]


def multinomial(targets: Sequence[int]) -> int:
    """m! / (c_1! ... c_k!)"""
    total = 0
    count = 1
    for c in targets:
        total += c
        count *= math.comb(total, c)
    return count


def enumerate_assignments(spec: FoldSpec) -> Iterator[Assignment]:
    """Every assignment with exactly c_j examples in fold j, in lexicographic order."""
    m, k = spec.m, spec.k
    remaining = list(spec.targets)
    current = np.zeros(m, dtype=np.int64)

    def extend(position: int) -> Iterator[Assignment]:
        if position == m:
            yield current.copy()
            return
        for fold in range(k):
            if remaining[fold] == 0:
                continue
            remaining[fold] -= 1
            current[position] = fold
            yield from extend(position + 1)
            remaining[fold] += 1

    yield from extend(0)


def _batches(assignments: Iterator[Assignment]) -> Iterator[List[Assignment]]:
    batch: List[Assignment] = []
    for assignment in assignments:
        batch.append(assignment)
        if len(batch) == BATCH_SIZE:
            yield batch
            batch = []
    if batch:
        yield batch


def exhaustive_optimal(
    dataset: MultiLabelDataset, spec: FoldSpec, metric: str, threads: int = 1
) -> OracleResult:
    """
    Minimise ``metric`` (LD, LD_PRIME or LPD) over all size-feasible assignments.

    Raises:
        OracleSizeError: If there are more than ORACLE_LIMIT assignments
    """
    spec.check_dataset(dataset)
    size = multinomial(spec.targets)
    if size > ORACLE_LIMIT:
        raise OracleSizeError(
            f"{size} size-feasible assignments exceed the oracle limit of {ORACLE_LIMIT}"
        )
    evaluator = SplitEvaluator(dataset, spec)
    metric_of = evaluator.metric(metric)

    def score(assignment: Assignment) -> Tuple[float, ObjectivePair]:
        pair = ObjectivePair(evaluator.ld_prime(assignment), evaluator.lpd(assignment))
        return metric_of(assignment), pair

    optimum = math.inf
    optimizers: List[Assignment] = []
    pairs: set[ObjectivePair] = set()
    enumerated = 0
    with PopulationEvaluator(score, threads) as evaluate:
        for batch in _batches(enumerate_assignments(spec)):
            for assignment, (value, pair) in zip(batch, evaluate(batch)):
                enumerated += 1
                pairs.add(pair)
                if value < optimum - TIE_TOLERANCE:
                    optimum, optimizers = value, [assignment]
                elif value <= optimum + TIE_TOLERANCE:
                    optimum = min(optimum, value)
                    optimizers.append(assignment)

    logger.info(f"oracle: {metric}={optimum:.6g} over {enumerated} assignments")
    return OracleResult(
        optimum_value=optimum,
        optimizers=optimizers,
        enumerated=enumerated,
        pareto_pairs=sorted(pairs),
    )
