"""
Quality measures of a fold assignment.

- LD: mean deviation of per-fold positive/negative example ratios from the data set
  ratio, over labels present in the data set.
- LD': the same over multiplicity-weighted label occurrences.
- LPD: LD over co-occurring label pairs.
- ED: mean deviation of fold sizes from their targets.
- FZ / FLZ: folds lacking some present label, and (fold, label) pairs with no
  positive example.

Every ratio denominator is clamped to a minimum of 1. A label (or pair) that is
positive in every example of the data set has no negatives anywhere, every fold is
then all-positive as well, and its deviation is 0.
"""

from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import numpy.typing as npt
from scipy import sparse

from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import AssignmentError
from multilabel_splitter.folds import (
    Assignment,
    FoldSpec,
    fold_indicator,
    fold_sizes,
    validate_assignment,
)

FloatArray = npt.NDArray[np.float64]

FITNESS_LD = "LD"
FITNESS_LD_PRIME = "LD_PRIME"
FITNESS_LPD = "LPD"
METRICS = (FITNESS_LD, FITNESS_LD_PRIME, FITNESS_LPD)


@dataclass(frozen=True)
class SplitReport:
    ld: float
    ld_prime: float
    lpd: float
    ed: float
    fz: int
    flz: int
    fold_sizes: List[int]
    constrained_feasible: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _ratio(positives: FloatArray, totals: FloatArray) -> FloatArray:
    return positives / np.maximum(totals - positives, 1.0)


def _distribution_deviation(
    fold_positives: FloatArray,
    fold_totals: FloatArray,
    positives: FloatArray,
    total: float,
    included: npt.NDArray[np.bool_],
) -> float:
    """
    Mean over included columns of the mean over folds of |fold ratio - data set ratio|.

    Args:
        fold_positives: k x n positive tallies per fold and column
        fold_totals: k x n (or k x 1) fold totals the positives are drawn from
        positives: n data set tallies
        total: Data set total
        included: Columns that take part in the average
    """
    if not included.any():
        return 0.0
    deviation = np.abs(_ratio(fold_positives, fold_totals) - _ratio(positives, total))
    deviation[:, positives >= total] = 0.0
    return float(deviation.mean(axis=0)[included].mean())


class SplitEvaluator:
    """
    Scores assignments of one data set against one fold specification.

    Data set level tallies are computed once; each call only forms the per-fold
    tallies of the given assignment through a sparse fold indicator product.
    """

    def __init__(self, dataset: MultiLabelDataset, spec: FoldSpec):
        self.dataset = dataset
        self.spec = spec
        self.k = spec.k
        self.targets = np.asarray(spec.targets, dtype=np.int64)

        self.presence_counts = dataset.presence_counts.astype(np.float64)
        self.present_labels = dataset.presence_counts > 0
        self.occurrence_counts = dataset.occurrence_counts.astype(np.float64)
        self.total_occurrences = float(self.occurrence_counts.sum())
        self.pair_counts = np.asarray(
            dataset.pair_presence.sum(axis=0), dtype=np.float64
        ).ravel()
        self.needs_coverage = dataset.presence_counts >= self.k

    def _tally(self, assignment: Assignment, matrix: sparse.csr_matrix) -> FloatArray:
        indicator = fold_indicator(assignment, self.k)
        return np.asarray((indicator @ matrix).todense(), dtype=np.float64)

    def fold_presence(self, assignment: Assignment) -> FloatArray:
        """k x q number of examples with each label per fold."""
        return self._tally(assignment, self.dataset.presence)

    def fold_sizes(self, assignment: Assignment) -> npt.NDArray[np.int64]:
        return fold_sizes(assignment, self.k)

    def ld(self, assignment: Assignment) -> float:
        sizes = self.fold_sizes(assignment).astype(np.float64)[:, None]
        return _distribution_deviation(
            self.fold_presence(assignment),
            sizes,
            self.presence_counts,
            float(self.dataset.m),
            self.present_labels,
        )

    def ld_prime(self, assignment: Assignment) -> float:
        fold_occurrences = self._tally(assignment, self.dataset.counts)
        fold_totals = fold_occurrences.sum(axis=1, keepdims=True)
        return _distribution_deviation(
            fold_occurrences,
            fold_totals,
            self.occurrence_counts,
            self.total_occurrences,
            self.present_labels,
        )

    def lpd(self, assignment: Assignment) -> float:
        if len(self.pair_counts) == 0:
            return 0.0
        sizes = self.fold_sizes(assignment).astype(np.float64)[:, None]
        return _distribution_deviation(
            self._tally(assignment, self.dataset.pair_presence),
            sizes,
            self.pair_counts,
            float(self.dataset.m),
            np.ones(len(self.pair_counts), dtype=bool),
        )

    def ed(self, assignment: Assignment) -> float:
        return float(np.abs(self.fold_sizes(assignment) - self.targets).mean())

    def zero_counts(self, assignment: Assignment) -> Tuple[int, int]:
        uncovered = self.fold_presence(assignment)[:, self.present_labels] == 0
        return int(uncovered.any(axis=1).sum()), int(uncovered.sum())

    def coverage_deficits(self, assignment: Assignment) -> int:
        """Number of (fold, label) pairs lacking a label with presence >= k."""
        uncovered = self.fold_presence(assignment)[:, self.needs_coverage] == 0
        return int(uncovered.sum())

    def metric(self, name: str) -> Callable[[Assignment], float]:
        """Look up a minimised measure by name (LD, LD_PRIME or LPD)."""
        metrics: Dict[str, Callable[[Assignment], float]] = {
            FITNESS_LD: self.ld,
            FITNESS_LD_PRIME: self.ld_prime,
            FITNESS_LPD: self.lpd,
        }
        try:
            return metrics[name]
        except KeyError:
            raise ValueError(f"unknown metric '{name}', expected one of {METRICS}") from None

    def report(self, assignment: Assignment) -> SplitReport:
        fz, flz = self.zero_counts(assignment)
        return SplitReport(
            ld=self.ld(assignment),
            ld_prime=self.ld_prime(assignment),
            lpd=self.lpd(assignment),
            ed=self.ed(assignment),
            fz=fz,
            flz=flz,
            fold_sizes=[int(s) for s in self.fold_sizes(assignment)],
            constrained_feasible=self.coverage_deficits(assignment) == 0,
        )


def _feasible_evaluator(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> Tuple[SplitEvaluator, Assignment]:
    assignment = validate_assignment(assignment, dataset.m, spec.k)
    sizes = fold_sizes(assignment, spec.k)
    if not np.array_equal(sizes, np.asarray(spec.targets)):
        raise AssignmentError(
            f"fold sizes {sizes.tolist()} differ from targets {list(spec.targets)}"
        )
    return SplitEvaluator(dataset, spec), assignment


def label_distribution(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> float:
    """LD of a size-feasible assignment."""
    evaluator, assignment = _feasible_evaluator(dataset, assignment, spec)
    return evaluator.ld(assignment)


def modified_label_distribution(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> float:
    """LD' (multiplicity-weighted) of a size-feasible assignment."""
    evaluator, assignment = _feasible_evaluator(dataset, assignment, spec)
    return evaluator.ld_prime(assignment)


def label_pair_distribution(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> float:
    """LPD of a size-feasible assignment; 0 when no label pair co-occurs."""
    evaluator, assignment = _feasible_evaluator(dataset, assignment, spec)
    return evaluator.lpd(assignment)


def examples_distribution(assignment: Assignment, spec: FoldSpec) -> float:
    """ED; accepts size-infeasible assignments since it is what detects them."""
    assignment = np.asarray(assignment, dtype=np.int64)
    sizes = fold_sizes(assignment, spec.k)
    return float(np.abs(sizes - np.asarray(spec.targets)).mean())


def zero_counts(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> Tuple[int, int]:
    """(FZ, FLZ) counted over labels present in the data set."""
    assignment = validate_assignment(assignment, dataset.m, spec.k)
    return SplitEvaluator(dataset, spec).zero_counts(assignment)


def evaluate_split(
    dataset: MultiLabelDataset, assignment: Assignment, spec: FoldSpec
) -> SplitReport:
    """All measures of an assignment, size-feasible or not."""
    assignment = validate_assignment(assignment, dataset.m, spec.k)
    return SplitEvaluator(dataset, spec).report(assignment)
