"""
Shared fixtures: the four-example data set used for hand-checked values, a
synthetic imbalanced data set and random tiny data sets for exhaustive checks.
"""

import os
from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.folds import FoldSpec

DATA_DIR = Path(os.path.dirname(os.path.abspath(__file__))) / "data"

# e0={A}, e1={A,B}, e2={B,C}, e3={A,B,C}
TINY4_LABEL_SETS = [[0], [0, 1], [1, 2], [0, 1, 2]]

SyntheticFactory = Callable[..., MultiLabelDataset]


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def tiny4() -> MultiLabelDataset:
    return MultiLabelDataset.from_label_sets(TINY4_LABEL_SETS, 3, ["A", "B", "C"])


@pytest.fixture
def halves() -> FoldSpec:
    """Two folds of two examples each."""
    return FoldSpec.from_targets([2, 2])


def make_synthetic(
    seed: int = 0, m: int = 500, q: int = 12, k: int = 10, rare: int = 4
) -> MultiLabelDataset:
    """
    Imbalanced data set whose last ``rare`` labels each occur in between k and 2k
    examples; the others occur with probabilities spread over [0.05, 0.5].
    """
    rng = np.random.default_rng(seed)
    common = q - rare
    probabilities = np.linspace(0.05, 0.5, common)
    presence = rng.random((m, common)) < probabilities
    label_sets: List[List[int]] = [list(np.flatnonzero(row)) for row in presence]
    for label in range(common, q):
        carriers = rng.choice(m, size=int(rng.integers(k, 2 * k + 1)), replace=False)
        for i in carriers:
            label_sets[int(i)].append(label)
    return MultiLabelDataset.from_label_sets(label_sets, q)


def make_random_tiny(seed: int, m: int = 8, q: int = 3) -> MultiLabelDataset:
    """m examples, each label present with probability 1/2."""
    rng = np.random.default_rng(seed)
    label_sets = [list(np.flatnonzero(rng.random(q) < 0.5)) for _ in range(m)]
    return MultiLabelDataset.from_label_sets(label_sets, q)


@pytest.fixture
def synthetic_factory() -> SyntheticFactory:
    return make_synthetic


@pytest.fixture(scope="session")
def synthetic() -> MultiLabelDataset:
    return make_synthetic()


@pytest.fixture(scope="session")
def random_tiny_datasets() -> List[MultiLabelDataset]:
    return [make_random_tiny(seed) for seed in range(20)]
