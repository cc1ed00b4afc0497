"""
Tests for the single-objective evolutionary splitter.
"""

from typing import Any, Callable, Dict, List

import numpy as np
import pytest

from multilabel_splitter.baselines import random_split
from multilabel_splitter.dataset import MultiLabelDataset
from multilabel_splitter.errors import ConfigError
from multilabel_splitter.evolution import (
    EAParams,
    crossover_one_point,
    evolve,
    init_population,
    linear_ranking_probabilities,
    mutate,
    mutation_count,
    repair_constraint,
    repair_constraint_with_status,
    repair_sizes,
    run_best_of,
)
from multilabel_splitter.folds import Assignment, FoldSpec, is_size_feasible
from multilabel_splitter.split_metrics import (
    FITNESS_LD_PRIME,
    FITNESS_LPD,
    SplitEvaluator,
)

SyntheticFactory = Callable[..., MultiLabelDataset]


class TestEAParams:
    """Tests for parameter validation."""

    def test_defaults(self) -> None:
        params = EAParams()
        assert (params.pop_size, params.crossover_offspring) == (50, 10)
        assert (params.mutation_offspring, params.stale_generations_max) == (10, 25)
        assert params.mutation_rate == 0.01
        assert params.runs == 5
        assert params.fitness == FITNESS_LD_PRIME

    @pytest.mark.parametrize(
        "overrides",
        [
            {"pop_size": 0},
            {"crossover_offspring": 0, "mutation_offspring": 0},
            {"mutation_rate": 0.0},
            {"mutation_rate": 1.5},
            {"runs": 0},
            {"fitness": "LD"},
            {"seed": -1},
            {"seed": 2**64},
        ],
    )
    def test_invalid(self, overrides: Dict[str, Any]) -> None:
        with pytest.raises(ConfigError):
            EAParams(**overrides)


class TestOperators:
    """Tests for the variation and repair operators."""

    def test_crossover(self) -> None:
        p1, p2 = np.array([0, 0, 1, 1]), np.array([1, 1, 0, 0])
        assert crossover_one_point(p1, p2, 2).tolist() == [0, 0, 0, 0]
        alternating, shifted = np.array([0, 1, 0, 1]), np.array([1, 0, 1, 0])
        assert crossover_one_point(alternating, shifted, 1).tolist() == [0, 0, 1, 0]

    def test_crossover_identical_parents(self) -> None:
        parent = np.array([2, 0, 1, 1, 0])
        for cut in range(1, 5):
            assert np.array_equal(crossover_one_point(parent, parent, cut), parent)

    @pytest.mark.parametrize("cut", [0, 4, -1])
    def test_crossover_cut_range(self, cut: int) -> None:
        with pytest.raises(ValueError):
            crossover_one_point(np.zeros(4, dtype=np.int64), np.ones(4, dtype=np.int64), cut)

    def test_mutation_count(self) -> None:
        assert mutation_count(0.01, 4) == 1
        assert mutation_count(0.01, 400) == 4
        assert mutation_count(0.01, 250) == 3

    def test_mutate_two_folds(self) -> None:
        """With two folds every mutated gene flips."""
        rng = np.random.default_rng(0)
        parent = np.zeros(400, dtype=np.int64)
        child = mutate(parent, 0.01, 2, rng)
        assert int((child != parent).sum()) == 4
        assert set(child[child != parent].tolist()) == {1}

    def test_mutate_keeps_parent(self) -> None:
        rng = np.random.default_rng(0)
        parent = np.array([0, 1, 2, 0])
        child = mutate(parent, 0.01, 3, rng)
        assert parent.tolist() == [0, 1, 2, 0]
        assert int((child != parent).sum()) == 1

    def test_mutate_needs_two_folds(self) -> None:
        with pytest.raises(ValueError):
            mutate(np.zeros(4, dtype=np.int64), 0.5, 1, np.random.default_rng(0))

    def test_repair_sizes_moves_overflow(self, halves: FoldSpec) -> None:
        rng = np.random.default_rng(0)
        child = repair_sizes(np.zeros(4, dtype=np.int64), halves, rng)
        assert is_size_feasible(child, halves)
        assert int((child != 0).sum()) == 2

    def test_repair_sizes_uneven_targets(self) -> None:
        spec = FoldSpec.from_targets([1, 3])
        child = repair_sizes(np.zeros(4, dtype=np.int64), spec, np.random.default_rng(1))
        assert int((child == 1).sum()) == 3

    def test_repair_sizes_feasible_untouched(self, halves: FoldSpec) -> None:
        feasible = np.array([1, 0, 0, 1])
        child = repair_sizes(feasible, halves, np.random.default_rng(0))
        assert np.array_equal(child, feasible)

    def test_repair_constraint(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        """Fold 0 of [0,0,1,1] gains a C example through a swap."""
        evaluator = SplitEvaluator(tiny4, halves)
        for seed in range(10):
            child = repair_constraint(
                np.array([0, 0, 1, 1]), tiny4, halves, np.random.default_rng(seed)
            )
            assert is_size_feasible(child, halves)
            assert evaluator.coverage_deficits(child) == 0

    def test_repair_constraint_impossible(self) -> None:
        """A one-example fold cannot hold labels that no single example carries."""
        dataset = MultiLabelDataset.from_label_sets([[0, 1], [0, 1], [2], [2]], 3)
        spec = FoldSpec.from_targets([3, 1])
        assignment = np.array([0, 0, 0, 1])
        child, covered = repair_constraint_with_status(
            assignment, dataset, spec, np.random.default_rng(0)
        )
        assert not covered
        assert np.array_equal(child, assignment)

    def test_constraint_ignores_rare_labels(self) -> None:
        """Labels rarer than k are never required."""
        dataset = MultiLabelDataset.from_label_sets([[0], [], [], [], [], []], 1)
        spec = FoldSpec.from_targets([2, 2, 2])
        assignment = np.array([0, 0, 1, 1, 2, 2])
        child, covered = repair_constraint_with_status(
            assignment, dataset, spec, np.random.default_rng(0)
        )
        assert covered
        assert np.array_equal(child, assignment)

    def test_linear_ranking(self) -> None:
        probabilities = linear_ranking_probabilities(4)
        assert probabilities.tolist() == pytest.approx([0.4, 0.3, 0.2, 0.1])


class TestInitPopulation:
    """Tests for the initial population."""

    def test_size_feasible(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        population = init_population(tiny4, halves, EAParams(seed=1))
        assert len(population) == 50
        assert all(is_size_feasible(a, halves) for a in population)

    def test_deterministic(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        first = init_population(tiny4, halves, EAParams(seed=3))
        second = init_population(tiny4, halves, EAParams(seed=3))
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_constrained(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        """Every individual covers all labels occurring at least twice."""
        population = init_population(tiny4, halves, EAParams(constrained=True))
        evaluator = SplitEvaluator(tiny4, halves)
        assert all(evaluator.coverage_deficits(a) == 0 for a in population)
        assert all(a[2] != a[3] for a in population)


class TestEvolve:
    """Tests for a single evolutionary run."""

    def test_result_consistent(self, synthetic: MultiLabelDataset) -> None:
        """The reported fitness is that of the returned assignment."""
        spec = FoldSpec.uniform(5, synthetic.m)
        params = EAParams(runs=1, max_generations=15, seed=2)
        result = evolve(synthetic, spec, params)
        evaluator = SplitEvaluator(synthetic, spec)
        assert result.best_fitness == evaluator.ld_prime(result.best_assignment)
        assert is_size_feasible(result.best_assignment, spec)
        assert result.generations == 15
        assert len(result.history) == 16
        assert all(b <= a for a, b in zip(result.history, result.history[1:]))

    def test_improves_on_random(self, synthetic: MultiLabelDataset) -> None:
        spec = FoldSpec.uniform(5, synthetic.m)
        params = EAParams(runs=1, max_generations=30, fitness=FITNESS_LPD)
        result = evolve(synthetic, spec, params)
        evaluator = SplitEvaluator(synthetic, spec)
        assert result.best_fitness < evaluator.lpd(random_split(synthetic, spec, 0))

    def test_every_evaluated_individual_feasible(
        self, synthetic: MultiLabelDataset, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Offspring are repaired before scoring, including those discarded later."""
        spec = FoldSpec.uniform(5, synthetic.m)
        scored: List[Assignment] = []
        score = SplitEvaluator.ld_prime

        def recording(self: SplitEvaluator, assignment: Assignment) -> float:
            scored.append(assignment.copy())
            return score(self, assignment)

        monkeypatch.setattr(SplitEvaluator, "ld_prime", recording)
        evolve(synthetic, spec, EAParams(max_generations=5, constrained=True))
        assert len(scored) == 50 + 5 * 20
        assert all(is_size_feasible(a, spec) for a in scored)

    def test_stops_when_stale(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        """Four examples leave nothing to improve after a few generations."""
        params = EAParams(stale_generations_max=3)
        result = evolve(tiny4, halves, params)
        assert result.generations >= 3
        assert result.history[-1] == result.best_fitness

    def test_threads_do_not_change_result(self, synthetic: MultiLabelDataset) -> None:
        spec = FoldSpec.uniform(5, synthetic.m)
        single = evolve(synthetic, spec, EAParams(max_generations=8, seed=9))
        threaded = evolve(synthetic, spec, EAParams(max_generations=8, seed=9, threads=4))
        assert np.array_equal(single.best_assignment, threaded.best_assignment)
        assert single.history == threaded.history

    def test_deterministic(self, tiny4: MultiLabelDataset, halves: FoldSpec) -> None:
        params = EAParams(seed=11, stale_generations_max=5)
        first = evolve(tiny4, halves, params)
        second = evolve(tiny4, halves, params)
        assert np.array_equal(first.best_assignment, second.best_assignment)
        assert first.history == second.history

    def test_single_fold_rejected(self, tiny4: MultiLabelDataset) -> None:
        with pytest.raises(ConfigError):
            evolve(tiny4, FoldSpec.from_targets([4]), EAParams())


class TestRunBestOf:
    """Tests for the best-of-runs driver."""

    def test_best_run_kept(self, synthetic: MultiLabelDataset) -> None:
        spec = FoldSpec.uniform(5, synthetic.m)
        params = EAParams(runs=3, max_generations=5, seed=4)
        best = run_best_of(synthetic, spec, params)
        singles = [
            evolve(synthetic, spec, params, run_seed=4 + i, run_index=i) for i in range(3)
        ]
        assert best.best_fitness == min(r.best_fitness for r in singles)
        assert best.run_index == min(
            range(3), key=lambda i: (singles[i].best_fitness, i)
        )


@pytest.mark.slow
class TestSyntheticRuns:
    """Long runs on the synthetic imbalanced data set."""

    def test_constraint_removes_empty_cells(
        self, synthetic_factory: SyntheticFactory
    ) -> None:
        """Constrained runs cover every required label; random splits do not."""
        random_flz = []
        for seed in range(10):
            dataset = synthetic_factory(seed=seed)
            spec = FoldSpec.uniform(10, dataset.m)
            required = dataset.presence_counts >= 10
            evaluator = SplitEvaluator(dataset, spec)

            params = EAParams(runs=1, constrained=True, seed=seed, max_generations=20)
            result = run_best_of(dataset, spec, params)
            presence = evaluator.fold_presence(result.best_assignment)
            assert int((presence[:, required] == 0).sum()) == 0

            shuffled = evaluator.fold_presence(random_split(dataset, spec, seed))
            random_flz.append(int((shuffled[:, required] == 0).sum()))
        assert np.mean(random_flz) > 0

    def test_improvement_over_random(self, synthetic_factory: SyntheticFactory) -> None:
        dataset = synthetic_factory(seed=0)
        spec = FoldSpec.uniform(10, dataset.m)
        evaluator = SplitEvaluator(dataset, spec)
        ld_ratios, lpd_ratios = [], []
        for seed in range(5):
            shuffled = random_split(dataset, spec, seed)
            by_ld = run_best_of(
                dataset, spec, EAParams(runs=1, seed=seed, fitness=FITNESS_LD_PRIME)
            )
            by_lpd = run_best_of(
                dataset, spec, EAParams(runs=1, seed=seed, fitness=FITNESS_LPD)
            )
            ld_ratios.append(evaluator.ld(by_ld.best_assignment) / evaluator.ld(shuffled))
            lpd_ratios.append(
                evaluator.lpd(by_lpd.best_assignment) / evaluator.lpd(shuffled)
            )
        assert np.median(ld_ratios) < 0.5
        assert np.median(lpd_ratios) < 0.8
