"""
Fold specifications, assignments and their CSV representation.

An assignment is an int64 vector holding the fold index of every example. A fold
specification fixes k, the desired proportions r_j and the exact target sizes c_j.
"""

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import sparse

from multilabel_splitter.config import PROPORTION_TOLERANCE
from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import AssignmentError, ConfigError, InputError

Assignment = npt.NDArray[np.int64]


@dataclass(frozen=True)
class FoldSpec:
    """Number of folds, desired proportions and exact target sizes."""

    proportions: Tuple[float, ...]
    targets: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.proportions) != len(self.targets) or not self.targets:
            raise ConfigError("proportions and targets must have the same, non-zero length")
        if any(c < 1 for c in self.targets):
            raise ConfigError(f"every fold needs at least one example, got {self.targets}")
        if abs(sum(self.proportions) - 1.0) > PROPORTION_TOLERANCE:
            raise ConfigError(f"proportions sum to {sum(self.proportions)}, expected 1")

    @property
    def k(self) -> int:
        return len(self.targets)

    @property
    def m(self) -> int:
        return sum(self.targets)

    @classmethod
    def from_proportions(cls, proportions: Sequence[float], m: int) -> "FoldSpec":
        """
        Derive exact targets from proportions by largest-remainder rounding.

        Ties in the fractional parts go to the lower fold index.
        """
        if any(r < 0 for r in proportions):
            raise ConfigError(f"negative proportion in {list(proportions)}")
        if abs(sum(proportions) - 1.0) > PROPORTION_TOLERANCE:
            raise ConfigError(f"proportions sum to {sum(proportions)}, expected 1")

        quotas = [r * m for r in proportions]
        targets = [math.floor(x) for x in quotas]
        by_remainder = sorted(
            range(len(quotas)), key=lambda j: (-(quotas[j] - targets[j]), j)
        )
        shortfall = m - sum(targets)
        for step in range(abs(shortfall)):
            j = by_remainder[step % len(by_remainder)]
            targets[j] += 1 if shortfall > 0 else -1
        return cls(tuple(float(r) for r in proportions), tuple(targets))

    @classmethod
    def from_targets(cls, targets: Sequence[int]) -> "FoldSpec":
        """Use explicit target sizes; proportions become c_j / m."""
        total = sum(targets)
        if total <= 0:
            raise ConfigError(f"targets must sum to a positive number, got {list(targets)}")
        return cls(tuple(c / total for c in targets), tuple(int(c) for c in targets))

    @classmethod
    def uniform(cls, k: int, m: int) -> "FoldSpec":
        if k < 1:
            raise ConfigError(f"k must be positive, got {k}")
        return cls.from_proportions([1.0 / k] * k, m)

    def check_dataset(self, dataset: MultiLabelDataset) -> None:
        """Raise ConfigError if the targets do not add up to the data set size."""
        if self.m != dataset.m:
            raise ConfigError(
                f"fold targets sum to {self.m} but the data set has {dataset.m} examples"
            )


def fold_sizes(assignment: Assignment, k: int) -> npt.NDArray[np.int64]:
    return np.bincount(assignment, minlength=k).astype(np.int64)


def is_size_feasible(assignment: Assignment, spec: FoldSpec) -> bool:
    return bool(np.array_equal(fold_sizes(assignment, spec.k), np.asarray(spec.targets)))


def validate_assignment(assignment: Assignment, m: int, k: int) -> Assignment:
    """
    Check length and fold range of an assignment.

    Raises:
        AssignmentError: On length or index mismatch
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.ndim != 1 or len(assignment) != m:
        raise AssignmentError(f"assignment has {assignment.size} entries, expected {m}")
    if len(assignment) and (assignment.min() < 0 or assignment.max() >= k):
        raise AssignmentError(
            f"fold indices must lie in [0, {k}), found {assignment.min()}..{assignment.max()}"
        )
    return assignment


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 64-bit seed for a sub-stream identified by ``keys``."""
    state = np.random.SeedSequence([master_seed, *keys]).generate_state(2, np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def assignment_to_csv(assignment: Assignment) -> str:
    """Render an assignment as ``example_index,fold`` CSV with LF line endings."""
    frame = pd.DataFrame(
        {"example_index": np.arange(len(assignment)), "fold": np.asarray(assignment)}
    )
    return frame.to_csv(index=False, lineterminator="\n")


def write_assignment(assignment: Assignment, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(assignment_to_csv(assignment))


def read_assignment(
    source: Union[str, Path, io.StringIO], m: int, k: Optional[int] = None
) -> Assignment:
    """
    Read an assignment CSV and check it against the data set.

    Args:
        source: Path or text buffer with an ``example_index,fold`` header
        m: Number of examples in the data set
        k: Number of folds, if known

    Returns:
        The assignment ordered by example index
    """
    if isinstance(source, (str, Path)) and not Path(source).is_file():
        raise InputError(f"assignment file '{source}' does not exist")
    try:
        frame = pd.read_csv(source, dtype="int64")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise AssignmentError(f"unreadable assignment CSV: {e}") from e

    if list(frame.columns) != ["example_index", "fold"]:
        raise AssignmentError(
            f"expected columns example_index,fold, got {','.join(map(str, frame.columns))}"
        )
    indices = frame["example_index"].to_numpy()
    if len(frame) != m or not np.array_equal(np.sort(indices), np.arange(m)):
        raise AssignmentError(
            f"assignment must list every example index 0..{m - 1} exactly once"
        )

    assignment = np.empty(m, dtype=np.int64)
    assignment[indices] = frame["fold"].to_numpy()
    if k is None:
        k = int(assignment.max()) + 1 if m else 1
    return validate_assignment(assignment, m, k)


def fold_label_table(
    dataset: MultiLabelDataset, assignment: Assignment, k: int
) -> pd.DataFrame:
    """Positive-example counts per fold (rows) and label (columns)."""
    indicator = fold_indicator(assignment, k)
    tallies = np.asarray((indicator @ dataset.presence).todense(), dtype=np.int64)
    frame = pd.DataFrame(tallies, columns=list(dataset.label_names))
    frame.index.name = "fold"
    return frame


def fold_indicator(assignment: Assignment, k: int) -> sparse.csr_matrix:
    """Sparse k x m matrix with a one in row a_i of column i."""
    m = len(assignment)
    return sparse.csr_matrix(
        (np.ones(m, dtype=np.int64), (assignment, np.arange(m))), shape=(k, m)
    )

