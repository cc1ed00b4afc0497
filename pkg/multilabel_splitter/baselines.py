"""
Reference splitters: size-exact random split, Iterative Stratification (IS) and
Second-Order Iterative Stratification (SOIS).

IS walks the labels from the scarcest one up and gives each of the label's
unassigned examples to the fold whose remaining desired count for that label is
largest. SOIS does the same over co-occurring label pairs first, then over single
labels, then fills the folds with whatever is left.
"""

import logging

import numpy as np
import numpy.typing as npt
from scipy import sparse

from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.folds import Assignment, FoldSpec

logger = logging.getLogger(__name__)

UNASSIGNED = -1


def random_split(dataset: MultiLabelDataset, spec: FoldSpec, seed: int) -> Assignment:
    """
    Shuffle the examples and fill the folds to their targets in order.

    Every size-feasible assignment is equally likely.
    """
    spec.check_dataset(dataset)
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.m)
    assignment = np.empty(dataset.m, dtype=np.int64)
    bounds = np.concatenate([[0], np.cumsum(spec.targets)])
    for j in range(spec.k):
        assignment[order[bounds[j] : bounds[j + 1]]] = j
    return assignment


class _GreedyStratifier:
    """Shared state of the IS / SOIS greedy loops."""

    def __init__(self, dataset: MultiLabelDataset, spec: FoldSpec, seed: int):
        spec.check_dataset(dataset)
        self.rng = np.random.default_rng(seed)
        self.proportions = np.asarray(spec.proportions, dtype=np.float64)
        self.size_quota = np.asarray(spec.targets, dtype=np.float64)
        self.assignment = np.full(dataset.m, UNASSIGNED, dtype=np.int64)

        self.presence = dataset.presence
        self.label_quota = np.outer(self.proportions, dataset.presence_counts)

    def choose_fold(
        self, quota: npt.NDArray[np.float64], restrict_to_open: bool = False
    ) -> int:
        """
        Fold with the largest remaining quota, then the largest remaining size quota,
        then a seeded uniform choice.
        """
        candidates = np.arange(len(quota))
        if restrict_to_open and (self.size_quota > 0).any():
            candidates = candidates[self.size_quota > 0]
        best = candidates[quota[candidates] == quota[candidates].max()]
        if len(best) > 1:
            sizes = self.size_quota[best]
            best = best[sizes == sizes.max()]
        if len(best) > 1:
            return int(self.rng.choice(best))
        return int(best[0])

    def assign(self, example: int, fold: int) -> None:
        self.assignment[example] = fold
        self.size_quota[fold] -= 1
        labels = self.presence.indices[
            self.presence.indptr[example] : self.presence.indptr[example + 1]
        ]
        self.label_quota[fold, labels] -= 1

    def distribute(
        self,
        membership: sparse.csr_matrix,
        quota: npt.NDArray[np.float64],
        decrement_quota: bool = False,
        restrict_to_open: bool = False,
    ) -> None:
        """
        Greedy pass over the columns of ``membership`` (labels or pairs).

        Repeatedly takes the column with the fewest unassigned examples and places
        each of them by ``choose_fold`` on that column's quota.
        """
        by_column = membership.tocsc()
        by_column.sort_indices()
        unassigned = self.assignment == UNASSIGNED
        remaining = np.asarray(membership[unassigned].sum(axis=0), dtype=np.int64).ravel()
        exhausted = np.iinfo(np.int64).max

        while (remaining > 0).any():
            column = int(np.argmin(np.where(remaining > 0, remaining, exhausted)))
            members = by_column.indices[
                by_column.indptr[column] : by_column.indptr[column + 1]
            ]
            for example in members:
                if self.assignment[example] != UNASSIGNED:
                    continue
                fold = self.choose_fold(quota[:, column], restrict_to_open)
                self.assign(int(example), fold)
                columns = membership.indices[
                    membership.indptr[example] : membership.indptr[example + 1]
                ]
                if decrement_quota:
                    quota[fold, columns] -= 1
                remaining[columns] -= 1

    def distribute_leftovers(self) -> None:
        """Examples without any label go to the folds with most room left."""
        for example in np.flatnonzero(self.assignment == UNASSIGNED):
            self.assign(int(example), self.choose_fold(self.size_quota))

    def log_size_deviation(self, method: str) -> None:
        overfull = int((self.size_quota < 0).sum())
        if overfull:
            logger.info(f"{method}: {overfull} folds exceed their target size")


def iterative_stratification(
    dataset: MultiLabelDataset, spec: FoldSpec, seed: int
) -> Assignment:
    """
    Iterative Stratification over single labels.

    Fold sizes are a soft goal: ties favour folds with more room, but a fold can end
    up above its target when the label quotas demand it.
    """
    state = _GreedyStratifier(dataset, spec, seed)
    state.distribute(dataset.presence, state.label_quota)
    state.distribute_leftovers()
    state.log_size_deviation("iterative stratification")
    return state.assignment


def second_order_iterative_stratification(
    dataset: MultiLabelDataset, spec: FoldSpec, seed: int
) -> Assignment:
    """
    Iterative Stratification over co-occurring label pairs, then single labels.

    The single-label and leftover passes only use folds that still have room, so the
    targets are met exactly whenever the pair pass did not overfill a fold.
    """
    state = _GreedyStratifier(dataset, spec, seed)
    pairs = dataset.pair_presence
    if pairs.shape[1]:
        pair_counts = np.asarray(pairs.sum(axis=0), dtype=np.float64).ravel()
        pair_quota = np.outer(state.proportions, pair_counts)
        state.distribute(pairs, pair_quota, decrement_quota=True)
    state.distribute(dataset.presence, state.label_quota, restrict_to_open=True)
    state.distribute_leftovers()
    state.log_size_deviation("second-order iterative stratification")
    return state.assignment
