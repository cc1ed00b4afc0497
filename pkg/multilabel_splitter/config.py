"""
Configuration settings for splitting runs.

Default evolutionary parameters follow the published protocol: a population of 50,
10 offspring by crossover and 10 by mutation per generation, stop after 25
generations without improvement, 1% mutation, best of 5 runs.
"""

import argparse
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

from multilabel_splitter.errors import ConfigError

# Evolutionary search
DEFAULT_POP_SIZE = 50
DEFAULT_CROSSOVER_OFFSPRING = 10
DEFAULT_MUTATION_OFFSPRING = 10
DEFAULT_STALE_GENERATIONS = 25
DEFAULT_MUTATION_RATE = 0.01
DEFAULT_RUNS = 5
DEFAULT_IMPROVEMENT_EPSILON = 1e-12

# Folds
DEFAULT_K = 10
DEFAULT_SEED = 0
# Seeds are unsigned 64-bit integers
SEED_LIMIT = 1 << 64
# Allowed deviation of a proportion sum from 1
PROPORTION_TOLERANCE = 1e-9

# Largest multinomial(m; c) the exhaustive oracle will enumerate
ORACLE_LIMIT = 1_000_000

# Default for --threads
THREADS_ENV_VAR = "EVOSPLIT_THREADS"

COMMANDS = ("analyze", "split", "evaluate", "compare")
METHODS = ("random", "is", "sois", "ea-ld", "ea-lpd", "moea")
EVOLUTIONARY_METHODS = ("ea-ld", "ea-lpd", "moea")
FORMATS = ("jsonl", "sparse-text")


def resolve_threads(flag: Optional[int]) -> int:
    """Thread count from the flag, else the environment, else 1."""
    if flag is not None:
        threads = flag
    else:
        env_value = os.environ.get(THREADS_ENV_VAR, "").strip()
        try:
            threads = int(env_value) if env_value else 1
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR}={env_value!r} is not an integer") from None
    if threads < 1:
        raise ConfigError(f"thread count must be positive, got {threads}")
    return threads


def _parse_list(
    text: Optional[str], cast: Callable[[str], Any], flag: str
) -> Optional[Tuple[Any, ...]]:
    if text is None:
        return None
    try:
        return tuple(cast(item.strip()) for item in text.split(",") if item.strip())
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated list, got '{text}'") from None


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved options of one command-line invocation."""

    command: str
    input_path: str
    input_format: str
    k: Optional[int] = None
    proportions: Optional[Tuple[float, ...]] = None
    targets: Optional[Tuple[int, ...]] = None
    methods: Tuple[str, ...] = ("random",)
    constrained: bool = False
    seed: int = DEFAULT_SEED
    runs: Optional[int] = None
    threads: int = 1
    out_assignment: Optional[str] = None
    out_report: Optional[str] = None
    out_front: Optional[str] = None
    out_table: Optional[str] = None
    assignment_path: Optional[str] = None
    oracle: bool = False
    timing: bool = False
    max_generations: Optional[int] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        """Build and validate a configuration from parsed command-line arguments."""
        methods = _parse_list(getattr(args, "methods", None), str, "--methods")
        if methods is None:
            methods = (getattr(args, "method", None) or "random",)
        return cls(
            command=args.command,
            input_path=args.input,
            input_format=args.format,
            k=getattr(args, "k", None),
            proportions=_parse_list(
                getattr(args, "proportions", None), float, "--proportions"
            ),
            targets=_parse_list(getattr(args, "targets", None), int, "--targets"),
            methods=methods,
            constrained=getattr(args, "constrained", False),
            seed=getattr(args, "seed", DEFAULT_SEED),
            runs=getattr(args, "runs", None),
            threads=resolve_threads(getattr(args, "threads", None)),
            out_assignment=getattr(args, "out_assignment", None),
            out_report=getattr(args, "out_report", None),
            out_front=getattr(args, "out_front", None),
            out_table=getattr(args, "out_table", None),
            assignment_path=getattr(args, "assignment", None),
            oracle=getattr(args, "oracle", False),
            timing=getattr(args, "timing", False),
            max_generations=getattr(args, "max_generations", None),
        ).validate()

    @property
    def method(self) -> str:
        return self.methods[0]

    @property
    def resolved_runs(self) -> int:
        return self.runs if self.runs is not None else DEFAULT_RUNS

    @property
    def fold_count(self) -> Optional[int]:
        """k implied by the options; None lets ``evaluate`` infer it."""
        if self.targets is not None:
            return len(self.targets)
        if self.proportions is not None:
            return len(self.proportions)
        if self.k is not None:
            return self.k
        return None if self.command == "evaluate" else DEFAULT_K

    def validate(self) -> "RunConfig":
        """
        Check cross-option constraints.

        Raises:
            ConfigError: If any option is invalid for the command
        """
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'")
        if self.input_format not in FORMATS:
            raise ConfigError(f"unknown format '{self.input_format}'")
        if self.command == "analyze":
            return self

        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError(f"--seed must lie in [0, 2**64), got {self.seed}")
        if self.k is not None and self.k < 2:
            raise ConfigError(f"--k must be at least 2, got {self.k}")
        if self.proportions is not None and self.targets is not None:
            raise ConfigError("give either --proportions or --targets, not both")
        if self.proportions is not None:
            if self.k is not None and len(self.proportions) != self.k:
                raise ConfigError(f"{len(self.proportions)} proportions given for k={self.k}")
            if len(self.proportions) < 2:
                raise ConfigError("--proportions needs at least two folds")
            if abs(sum(self.proportions) - 1.0) > PROPORTION_TOLERANCE:
                raise ConfigError(f"proportions sum to {sum(self.proportions)}, not 1")
        if self.targets is not None:
            if self.k is not None and len(self.targets) != self.k:
                raise ConfigError(f"{len(self.targets)} targets given for k={self.k}")
            if len(self.targets) < 2:
                raise ConfigError("--targets needs at least two folds")

        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s) {unknown}, expected {METHODS}")
        evolutionary = any(m in EVOLUTIONARY_METHODS for m in self.methods)
        if self.runs is not None and not evolutionary:
            raise ConfigError("--runs only applies to ea-ld, ea-lpd and moea")
        if self.runs is not None and self.runs < 1:
            raise ConfigError(f"--runs must be at least 1, got {self.runs}")
        if self.max_generations is not None and self.max_generations < 0:
            raise ConfigError("--max-generations cannot be negative")
        if self.out_front is not None and "moea" not in self.methods:
            raise ConfigError("--out-front only applies to --method moea")
        if self.command == "compare" and len(self.methods) < 2:
            raise ConfigError("compare needs at least two methods")
        if self.command == "split" and len(self.methods) != 1:
            raise ConfigError("split runs exactly one method")
        if self.command == "evaluate" and self.assignment_path is None:
            raise ConfigError("evaluate needs --assignment")
        return self

    def provenance(self) -> Dict[str, Any]:
        """Resolved configuration embedded in reports; thread count excluded."""
        evolutionary = any(m in EVOLUTIONARY_METHODS for m in self.methods)
        resolved: Dict[str, Any] = {
            "command": self.command,
            "input": self.input_path,
            "format": self.input_format,
            "k": self.fold_count,
            "proportions": list(self.proportions) if self.proportions else None,
            "targets": list(self.targets) if self.targets else None,
            "methods": list(self.methods),
            "constrained": self.constrained,
            "seed": self.seed,
        }
        if evolutionary:
            resolved.update(
                runs=self.resolved_runs,
                max_generations=self.max_generations,
                pop_size=DEFAULT_POP_SIZE,
                crossover_offspring=DEFAULT_CROSSOVER_OFFSPRING,
                mutation_offspring=DEFAULT_MUTATION_OFFSPRING,
                stale_generations_max=DEFAULT_STALE_GENERATIONS,
                mutation_rate=DEFAULT_MUTATION_RATE,
            )
        return resolved
