"""
Workflows behind the analyze, split, evaluate and compare sub-commands.

JSON goes to the file named by ``--out-report`` or, without it, to stdout. Logging
stays on stderr.
"""

import json
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from multilabel_splitter.baselines import (
    iterative_stratification,
    random_split,
    second_order_iterative_stratification,
)
from multilabel_splitter.config import RunConfig
from multilabel_splitter.dataset import MultiLabelDataset, load_dataset_file
from multilabel_splitter.dataset_stats import dataset_stats, pair_stats, stats_dict
from multilabel_splitter.errors import SplitterError
from multilabel_splitter.evolution import EAParams, run_best_of
from multilabel_splitter.folds import (
    Assignment,
    FoldSpec,
    fold_label_table,
    read_assignment,
    write_assignment,
)
from multilabel_splitter.nsga2 import ParetoFront, run_nsga2_best_of, select_knee
from multilabel_splitter.oracle import exhaustive_optimal
from multilabel_splitter.split_metrics import (
    FITNESS_LD,
    FITNESS_LD_PRIME,
    FITNESS_LPD,
    evaluate_split,
)

logger = logging.getLogger(__name__)

# Columns of the comparison table, in order
MEASURES = ("ld", "ld_prime", "lpd", "ed", "fz", "flz")

# Measure each method optimises, for the oracle check
ORACLE_METRICS = {
    "random": FITNESS_LD,
    "is": FITNESS_LD,
    "sois": FITNESS_LD,
    "ea-ld": FITNESS_LD_PRIME,
    "ea-lpd": FITNESS_LPD,
}


@dataclass
class MethodOutcome:
    assignment: Assignment
    generations: Optional[int] = None
    runs: Optional[int] = None
    coverage_failures: Optional[int] = None
    front: Optional[ParetoFront] = None


def write_json(payload: Dict[str, Any], path: Optional[Union[str, Path]]) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def fold_spec_for(config: RunConfig, dataset: MultiLabelDataset) -> FoldSpec:
    """FoldSpec from --targets, --proportions or --k, checked against the data set."""
    if config.targets is not None:
        spec = FoldSpec.from_targets(config.targets)
    elif config.proportions is not None:
        spec = FoldSpec.from_proportions(config.proportions, dataset.m)
    else:
        k = config.fold_count
        assert k is not None
        spec = FoldSpec.uniform(k, dataset.m)
    spec.check_dataset(dataset)
    return spec


def ea_params(config: RunConfig, fitness: str) -> EAParams:
    return EAParams(
        runs=config.resolved_runs,
        fitness=fitness,
        constrained=config.constrained,
        seed=config.seed,
        max_generations=config.max_generations,
        threads=config.threads,
    )


def run_method(
    method: str, dataset: MultiLabelDataset, spec: FoldSpec, config: RunConfig
) -> MethodOutcome:
    """Produce an assignment with one splitting method."""
    logger.info(f"Running {method} with k={spec.k}, seed={config.seed}")
    if method == "random":
        return MethodOutcome(random_split(dataset, spec, config.seed))
    if method == "is":
        return MethodOutcome(iterative_stratification(dataset, spec, config.seed))
    if method == "sois":
        return MethodOutcome(
            second_order_iterative_stratification(dataset, spec, config.seed)
        )
    if method in ("ea-ld", "ea-lpd"):
        fitness = FITNESS_LD_PRIME if method == "ea-ld" else FITNESS_LPD
        params = ea_params(config, fitness)
        result = run_best_of(dataset, spec, params)
        return MethodOutcome(
            result.best_assignment,
            generations=result.generations,
            runs=params.runs,
            coverage_failures=result.coverage_failures,
        )
    if method == "moea":
        params = ea_params(config, FITNESS_LD_PRIME)
        front = run_nsga2_best_of(dataset, spec, params)
        knee, _ = select_knee(front)
        return MethodOutcome(
            knee,
            generations=front.generations,
            runs=params.runs,
            coverage_failures=front.coverage_failures,
            front=front,
        )
    raise ValueError(f"unknown method '{method}'")


def oracle_summary(
    method: str, dataset: MultiLabelDataset, spec: FoldSpec, threads: int
) -> Dict[str, Any]:
    """Exhaustive optimum of the method's measure; the whole true front for moea."""
    if method == "moea":
        result = exhaustive_optimal(dataset, spec, FITNESS_LD_PRIME, threads)
        front = result.non_dominated_pairs()
        return {
            "oracle_optimum": min(pair.distance for pair in front),
            "oracle_front": [{"ld_prime": p.ld_prime, "lpd": p.lpd} for p in front],
            "oracle_enumerated": result.enumerated,
        }
    result = exhaustive_optimal(dataset, spec, ORACLE_METRICS[method], threads)
    return {
        "oracle_metric": ORACLE_METRICS[method],
        "oracle_optimum": result.optimum_value,
        "oracle_enumerated": result.enumerated,
    }


def cmd_analyze(config: RunConfig) -> None:
    """Write the imbalance statistics of the data set."""
    dataset = load_dataset_file(config.input_path, config.input_format)
    stats = stats_dict(dataset_stats(dataset), pair_stats(dataset))
    write_json(stats, config.out_report)


def cmd_split(config: RunConfig) -> None:
    """Split the data set with one method and report the split's measures."""
    dataset = load_dataset_file(config.input_path, config.input_format)
    spec = fold_spec_for(config, dataset)
    method = config.method

    oracle: Dict[str, Any] = {}
    if config.oracle:
        oracle = oracle_summary(method, dataset, spec, config.threads)

    started = time.perf_counter()
    outcome = run_method(method, dataset, spec, config)
    runtime_ms = (time.perf_counter() - started) * 1000.0

    report = evaluate_split(dataset, outcome.assignment, spec).to_dict()
    report.update(
        method=method,
        seed=config.seed,
        k=spec.k,
        proportions=list(spec.proportions),
        targets=list(spec.targets),
    )
    if outcome.generations is not None:
        report.update(
            generations=outcome.generations,
            runs=outcome.runs,
            coverage_failures=outcome.coverage_failures,
        )
    if outcome.front is not None:
        report["front_size"] = len(outcome.front.solutions)
    report.update(oracle)
    if config.timing:
        report["runtime_ms"] = runtime_ms
    report["config"] = config.provenance()

    if config.out_assignment is not None:
        write_assignment(outcome.assignment, config.out_assignment)
    if config.out_front is not None and outcome.front is not None:
        outcome.front.write(config.out_front)
    write_json(report, config.out_report)


def cmd_evaluate(config: RunConfig) -> None:
    """Score an existing assignment CSV against the data set."""
    dataset = load_dataset_file(config.input_path, config.input_format)
    assert config.assignment_path is not None
    assignment = read_assignment(config.assignment_path, dataset.m, config.fold_count)
    k = config.fold_count or int(assignment.max()) + 1
    config_k = replace(config, k=k)
    spec = fold_spec_for(config_k, dataset)

    report = evaluate_split(dataset, assignment, spec)
    if config.out_table is not None:
        table = fold_label_table(dataset, assignment, spec.k)
        table.to_csv(config.out_table, lineterminator="\n")
    payload = report.to_dict()
    payload["config"] = config_k.provenance()
    write_json(payload, config.out_report)


def format_table(frame: pd.DataFrame, best: Dict[str, List[str]]) -> str:
    """Aligned text table, floats in 3-significant-digit scientific notation."""
    text = frame.copy()
    for measure in MEASURES:
        column = []
        for method, value in zip(frame["method"], frame[measure]):
            if pd.isna(value):
                cell = "-"
            elif measure in ("fz", "flz"):
                cell = str(int(value))
            else:
                cell = f"{value:.2e}"
            column.append(cell + ("*" if method in best.get(measure, []) else ""))
        text[measure] = column
    return text.to_string(index=False) + "\n"


def cmd_compare(config: RunConfig) -> None:
    """
    Run every requested method on the same data set, spec and seed.

    A failing method gets a row with its error status; the first failure is raised
    again once the table has been written.
    """
    dataset = load_dataset_file(config.input_path, config.input_format)
    spec = fold_spec_for(config, dataset)

    rows: List[Dict[str, Any]] = []
    first_error: Optional[SplitterError] = None
    for method in config.methods:
        row: Dict[str, Any] = {"method": method}
        try:
            outcome = run_method(method, dataset, spec, config)
        except SplitterError as e:
            logger.error(f"{method} failed: {e}")
            first_error = first_error or e
            row.update({measure: None for measure in MEASURES})
            row["status"] = f"error: {e}"
        else:
            report = evaluate_split(dataset, outcome.assignment, spec)
            row.update({measure: getattr(report, measure) for measure in MEASURES})
            row["status"] = "ok"
        rows.append(row)

    frame = pd.DataFrame(rows, columns=["method", *MEASURES, "status"])
    succeeded = frame[frame["status"] == "ok"]
    best: Dict[str, List[str]] = {}
    if len(succeeded):
        for measure in MEASURES:
            values = succeeded[measure].astype(np.float64)
            best[measure] = list(succeeded["method"][values == values.min()])

    sys.stdout.write(format_table(frame, best))
    if config.out_report is not None:
        write_json(
            {"rows": rows, "best": best, "config": config.provenance()},
            config.out_report,
        )
    if first_error is not None:
        raise first_error


COMMAND_HANDLERS = {
    "analyze": cmd_analyze,
    "split": cmd_split,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}
