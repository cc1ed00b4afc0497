"""
Tests for the exhaustive oracle, and the evolutionary splitters checked against it.
"""

from typing import List

import numpy as np
import pytest

from multilabel_splitter.baselines import (
    iterative_stratification,
    random_split,
    second_order_iterative_stratification,
)
from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import OracleSizeError
from multilabel_splitter.evolution import EAParams, run_best_of
from multilabel_splitter.folds import FoldSpec, is_size_feasible
from multilabel_splitter.nsga2 import dominates, run_nsga2_best_of, select_knee
from multilabel_splitter.oracle import (
    enumerate_assignments,
    exhaustive_optimal,
    multinomial,
)
from multilabel_splitter.split_metrics import (
    FITNESS_LD,
    FITNESS_LD_PRIME,
    FITNESS_LPD,
    METRICS,
    SplitEvaluator,
)

EIGHT_HALVES = FoldSpec.from_targets([4, 4])


class TestEnumeration:
    """Tests for the enumeration of size-feasible assignments."""

    def test_lexicographic(self, halves: FoldSpec) -> None:
        assignments = [a.tolist() for a in enumerate_assignments(halves)]
        assert assignments == [
            [0, 0, 1, 1],
            [0, 1, 0, 1],
            [0, 1, 1, 0],
            [1, 0, 0, 1],
            [1, 0, 1, 0],
            [1, 1, 0, 0],
        ]

    def test_counts(self) -> None:
        spec = FoldSpec.from_targets([2, 1, 2])
        assignments = list(enumerate_assignments(spec))
        assert len(assignments) == multinomial(spec.targets) == 30
        assert all(is_size_feasible(a, spec) for a in assignments)
        assert len({tuple(a.tolist()) for a in assignments}) == 30


class TestExhaustiveOptimal:
    """Tests for exhaustive_optimal."""

    def test_tiny4_ld(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        result = exhaustive_optimal(tiny4, halves, FITNESS_LD)
        assert result.enumerated == 6
        evaluator = SplitEvaluator(tiny4, halves)
        assert evaluator.ld(np.array([0, 1, 0, 1])) == pytest.approx(1.0)
        assert result.optimum_value <= 1.0 + 1e-12
        values = [evaluator.ld(a) for a in enumerate_assignments(halves)]
        assert result.optimum_value == pytest.approx(min(values))

    @pytest.mark.parametrize("metric", METRICS)
    def test_identical_examples(self, metric: str) -> None:
        dataset = MultiLabelDataset.from_label_sets([[0]] * 6, 1)
        result = exhaustive_optimal(dataset, FoldSpec.from_targets([3, 3]), metric)
        assert result.optimum_value == 0
        assert len(result.optimizers) == 20

    @pytest.mark.parametrize("metric", METRICS)
    def test_optimizers_reevaluate(
        self, metric: str, random_tiny_datasets: List[MultiLabelDataset]
    ) -> None:
        dataset = random_tiny_datasets[0]
        result = exhaustive_optimal(dataset, EIGHT_HALVES, metric)
        assert result.enumerated == 70
        measure = SplitEvaluator(dataset, EIGHT_HALVES).metric(metric)
        assert result.optimizers
        for assignment in result.optimizers:
            assert measure(assignment) == pytest.approx(result.optimum_value, abs=1e-12)

    def test_pareto_pairs(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        """Every enumerated pair is listed once and the front is non-dominated."""
        result = exhaustive_optimal(tiny4, halves, FITNESS_LD_PRIME)
        evaluator = SplitEvaluator(tiny4, halves)
        pairs = {
            (evaluator.ld_prime(a), evaluator.lpd(a)) for a in enumerate_assignments(halves)
        }
        assert set(result.pareto_pairs) == pairs
        front = result.non_dominated_pairs()
        assert all(not dominates(p, q) for p in result.pareto_pairs for q in front)

    def test_below_every_heuristic(
        self, random_tiny_datasets: List[MultiLabelDataset]
    ) -> None:
        splitters = [
            random_split,
            iterative_stratification,
            second_order_iterative_stratification,
        ]
        for dataset in random_tiny_datasets[:5]:
            evaluator = SplitEvaluator(dataset, EIGHT_HALVES)
            optimum = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LD).optimum_value
            for split in splitters:
                assignment = split(dataset, EIGHT_HALVES, 0)
                if is_size_feasible(assignment, EIGHT_HALVES):
                    assert optimum <= evaluator.ld(assignment) + 1e-12

    def test_single_label_ld_and_ld_prime_agree(self) -> None:
        """With one label per example both measures share their optimizers."""
        rng = np.random.default_rng(4)
        for _ in range(5):
            dataset = MultiLabelDataset.from_label_sets(
                [[int(j)] for j in rng.integers(0, 3, size=8)], 3
            )
            by_ld = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LD)
            by_ld_prime = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LD_PRIME)
            assert {tuple(a.tolist()) for a in by_ld.optimizers} == {
                tuple(a.tolist()) for a in by_ld_prime.optimizers
            }

    def test_too_large(self) -> None:
        dataset = MultiLabelDataset.from_label_sets([[0]] * 24, 1)
        with pytest.raises(OracleSizeError):
            exhaustive_optimal(dataset, FoldSpec.from_targets([12, 12]), FITNESS_LD)

    def test_threads_agree(self, random_tiny_datasets: List[MultiLabelDataset]) -> None:
        dataset = random_tiny_datasets[1]
        single = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LPD)
        threaded = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LPD, threads=4)
        assert single.optimum_value == threaded.optimum_value
        assert single.pareto_pairs == threaded.pareto_pairs


class TestAgainstOracle:
    """The evolutionary splitters on 20 random eight-example data sets."""

    @pytest.mark.parametrize("fitness", [FITNESS_LD_PRIME, FITNESS_LPD])
    def test_ea_reaches_optimum(
        self, fitness: str, random_tiny_datasets: List[MultiLabelDataset]
    ) -> None:
        hits = 0
        for seed, dataset in enumerate(random_tiny_datasets):
            optimum = exhaustive_optimal(dataset, EIGHT_HALVES, fitness).optimum_value
            result = run_best_of(dataset, EIGHT_HALVES, EAParams(fitness=fitness, seed=seed))
            hits += abs(result.best_fitness - optimum) <= 1e-12
        assert hits >= 19

    def test_moea_front_is_pareto_optimal(
        self, random_tiny_datasets: List[MultiLabelDataset]
    ) -> None:
        for seed, dataset in enumerate(random_tiny_datasets):
            oracle = exhaustive_optimal(dataset, EIGHT_HALVES, FITNESS_LD_PRIME)
            front = run_nsga2_best_of(dataset, EIGHT_HALVES, EAParams(seed=seed))
            for pair in front.objectives:
                assert not any(dominates(other, pair) for other in oracle.pareto_pairs)
            _, knee = select_knee(front)
            assert knee.distance == min(pair.distance for pair in front.objectives)
