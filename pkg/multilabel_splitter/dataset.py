"""
Multi-label data set representation and loaders.

A data set is stored as a sparse matrix of label occurrence counts: row i holds the
multiplicity of every label in example i, absence is an implicit zero. Feature
vectors are never stored, only the label structure is needed to split and score.

Two text formats are supported:

- sparse-text: an optional ``#q <int>`` header, then one line per example with
  whitespace separated ``<label_index>`` or ``<label_index>:<count>`` tokens. A blank
  line is an example without labels.
- jsonl: one JSON object per line with a ``labels`` map from label name to count and
  an optional ``id``. An optional first line ``{"label_names": [...]}`` fixes the
  label order, otherwise labels are numbered in first-seen order.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import sparse

from multilabel_splitter.config import FORMATS
from multilabel_splitter.errors import DatasetFormatError, InputError

logger = logging.getLogger(__name__)

LabelSet = Union[Mapping[int, int], Iterable[int]]


@dataclass(frozen=True, eq=False)
class MultiLabelDataset:
    """Immutable label structure of a multi-label data set."""

    label_names: Tuple[str, ...]
    counts: sparse.csr_matrix
    example_ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        counts = sparse.csr_matrix(self.counts, dtype=np.int64, copy=True)
        counts.sum_duplicates()
        counts.eliminate_zeros()
        counts.sort_indices()
        object.__setattr__(self, "counts", counts)

        if counts.shape[1] != len(self.label_names):
            raise DatasetFormatError(
                f"{counts.shape[1]} label columns but {len(self.label_names)} names"
            )
        if counts.nnz and counts.data.min() < 1:
            raise DatasetFormatError("label counts must be positive")
        if self.example_ids is not None and len(self.example_ids) != counts.shape[0]:
            raise DatasetFormatError(
                f"{len(self.example_ids)} example ids for {counts.shape[0]} examples"
            )

    @classmethod
    def from_label_sets(
        cls,
        label_sets: Sequence[LabelSet],
        q: int,
        label_names: Optional[Sequence[str]] = None,
    ) -> "MultiLabelDataset":
        """
        Build a data set from per-example label sets.

        Args:
            label_sets: For each example either an iterable of label indices (count 1
                each) or a mapping label index -> count
            q: Number of labels
            label_names: Optional names, defaults to the index strings

        Returns:
            The data set
        """
        rows: List[int] = []
        cols: List[int] = []
        data: List[int] = []
        for i, labels in enumerate(label_sets):
            items = labels.items() if isinstance(labels, Mapping) else ((j, 1) for j in labels)
            for label, count in items:
                if not 0 <= label < q:
                    raise DatasetFormatError(f"label index {label} outside [0, {q})")
                if count < 1:
                    raise DatasetFormatError(f"non-positive count {count}")
                rows.append(i)
                cols.append(label)
                data.append(count)

        names = tuple(label_names) if label_names is not None else _index_names(q)
        counts = sparse.csr_matrix(
            (np.asarray(data, dtype=np.int64), (rows, cols)),
            shape=(len(label_sets), q),
        )
        return cls(label_names=names, counts=counts)

    @property
    def m(self) -> int:
        return int(self.counts.shape[0])

    @property
    def q(self) -> int:
        return len(self.label_names)

    def labels_of(self, i: int) -> Dict[int, int]:
        """Return the sparse label -> count map of example i."""
        start, end = self.counts.indptr[i], self.counts.indptr[i + 1]
        return {
            int(j): int(c)
            for j, c in zip(self.counts.indices[start:end], self.counts.data[start:end])
        }

    @cached_property
    def presence(self) -> sparse.csr_matrix:
        """Binary example x label matrix (multiplicity ignored)."""
        presence = self.counts.copy()
        presence.data = np.ones_like(presence.data)
        return presence

    @cached_property
    def presence_counts(self) -> npt.NDArray[np.int64]:
        """Number of examples containing each label."""
        return np.asarray(self.presence.sum(axis=0), dtype=np.int64).ravel()

    @cached_property
    def occurrence_counts(self) -> npt.NDArray[np.int64]:
        """Multiplicity-weighted total of each label."""
        return np.asarray(self.counts.sum(axis=0), dtype=np.int64).ravel()

    @cached_property
    def label_pairs(self) -> npt.NDArray[np.int64]:
        """Co-occurring label pairs (a, b), a < b, in lexicographic order."""
        if self.q < 2:
            return np.empty((0, 2), dtype=np.int64)
        cooccurrence = sparse.triu(self.presence.T @ self.presence, k=1).tocoo()
        pairs = np.column_stack([cooccurrence.row, cooccurrence.col]).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    @cached_property
    def pair_presence(self) -> sparse.csr_matrix:
        """Binary example x pair matrix over ``label_pairs``."""
        pairs = self.label_pairs
        if len(pairs) == 0:
            return sparse.csr_matrix((self.m, 0), dtype=np.int64)
        presence = self.presence.tocsc()
        columns = [presence[:, a].multiply(presence[:, b]) for a, b in pairs]
        return sparse.hstack(columns, format="csr", dtype=np.int64)


def _index_names(q: int) -> Tuple[str, ...]:
    return tuple(str(i) for i in range(q))


def load_dataset(source: IO[bytes], fmt: str) -> MultiLabelDataset:
    """
    Load a data set from a byte stream.

    Args:
        source: UTF-8 encoded byte stream
        fmt: Either 'jsonl' or 'sparse-text'

    Returns:
        The loaded data set

    Raises:
        DatasetFormatError: If a line cannot be parsed
    """
    try:
        text = source.read().decode("utf-8")
    except UnicodeDecodeError as e:
        raise DatasetFormatError(f"input is not valid UTF-8: {e}") from e

    if fmt == "sparse-text":
        dataset = _parse_sparse_text(text.splitlines())
    elif fmt == "jsonl":
        dataset = _parse_jsonl(text.splitlines())
    else:
        raise InputError(f"unknown format '{fmt}', expected one of {FORMATS}")

    logger.info(f"Loaded {fmt} data set with m={dataset.m} examples, q={dataset.q} labels")
    return dataset


def load_dataset_file(path: Union[str, Path], fmt: str) -> MultiLabelDataset:
    """Load a data set from a file path."""
    file_path = Path(path)
    if not file_path.is_file():
        raise InputError(f"input file '{file_path}' does not exist")
    with open(file_path, "rb") as f:
        return load_dataset(f, fmt)


def _parse_sparse_text(lines: List[str]) -> MultiLabelDataset:
    declared_q: Optional[int] = None
    body_start = 0
    if lines and lines[0].startswith("#"):
        header = lines[0].split()
        if len(header) != 2 or header[0] != "#q":
            raise DatasetFormatError("expected header '#q <int>'", 1)
        try:
            declared_q = int(header[1])
        except ValueError:
            raise DatasetFormatError(f"invalid label count '{header[1]}'", 1) from None
        if declared_q < 1:
            raise DatasetFormatError("label count must be positive", 1)
        body_start = 1

    label_sets: List[Dict[int, int]] = []
    max_index = -1
    for line_number, line in enumerate(lines[body_start:], start=body_start + 1):
        labels: Dict[int, int] = {}
        for token in line.split():
            index_text, _, count_text = token.partition(":")
            try:
                index = int(index_text)
                count = int(count_text) if count_text else 1
            except ValueError:
                raise DatasetFormatError(f"malformed token '{token}'", line_number) from None
            if index < 0:
                raise DatasetFormatError(f"negative label index {index}", line_number)
            if declared_q is not None and index >= declared_q:
                raise DatasetFormatError(
                    f"label index {index} >= declared q={declared_q}", line_number
                )
            if count < 1:
                raise DatasetFormatError(f"non-positive count {count}", line_number)
            labels[index] = labels.get(index, 0) + count
            max_index = max(max_index, index)
        label_sets.append(labels)

    q = declared_q if declared_q is not None else max_index + 1
    if q < 1:
        raise DatasetFormatError("label count cannot be inferred from an unlabeled file")
    return MultiLabelDataset.from_label_sets(label_sets, q)


def _parse_jsonl(lines: List[str]) -> MultiLabelDataset:
    names: Dict[str, int] = {}
    declared = False
    label_sets: List[Dict[int, int]] = []
    ids: List[Optional[str]] = []

    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid JSON ({e.msg})", line_number) from None
        if not isinstance(record, dict):
            raise DatasetFormatError("expected a JSON object", line_number)

        if "label_names" in record and not label_sets and not declared:
            header = record["label_names"]
            if not isinstance(header, list) or not all(isinstance(n, str) for n in header):
                raise DatasetFormatError("label_names must be a list of strings", line_number)
            if len(set(header)) != len(header):
                raise DatasetFormatError("duplicate label names in header", line_number)
            names = {name: i for i, name in enumerate(header)}
            declared = True
            continue

        labels = record.get("labels")
        if not isinstance(labels, dict):
            raise DatasetFormatError("missing 'labels' object", line_number)
        example: Dict[int, int] = {}
        for name, count in labels.items():
            if isinstance(count, bool) or not isinstance(count, int):
                raise DatasetFormatError(f"count of '{name}' is not an integer", line_number)
            if count < 1:
                raise DatasetFormatError(f"non-positive count {count} for '{name}'", line_number)
            if name not in names:
                if declared:
                    raise DatasetFormatError(f"undeclared label '{name}'", line_number)
                names[name] = len(names)
            example[names[name]] = count
        label_sets.append(example)

        example_id = record.get("id")
        if example_id is not None and not isinstance(example_id, str):
            raise DatasetFormatError("'id' must be a string", line_number)
        ids.append(example_id)

    if not names:
        raise DatasetFormatError("no labels declared or observed")

    label_names = sorted(names, key=names.__getitem__)
    dataset = MultiLabelDataset.from_label_sets(label_sets, len(label_names), label_names)
    if any(example_id is not None for example_id in ids):
        example_ids = tuple(
            example_id if example_id is not None else str(i)
            for i, example_id in enumerate(ids)
        )
        dataset = MultiLabelDataset(dataset.label_names, dataset.counts, example_ids)
    return dataset
