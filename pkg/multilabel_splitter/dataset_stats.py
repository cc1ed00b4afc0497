"""
Whole-data-set imbalance and multi-labelledness measures.

Card, Dens, Div, PDiv, TCS, IRLbl, avgIR, SCUMBLE, Max Labels and Max Frequency, plus
their second-order (label pair) variants.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
import numpy.typing as npt

from multilabel_splitter.dataset import MultiLabelDataset

logger = logging.getLogger(__name__)

STATS_KEYS = (
    "card",
    "dens",
    "div",
    "pdiv",
    "tcs_raw",
    "tcs_log",
    "avg_ir",
    "scumble",
    "max_labels",
    "max_frequency",
    "card2",
    "dens2",
    "div2",
    "pdiv2",
    "max_frequency2",
)


@dataclass(frozen=True)
class DatasetStats:
    card: float
    dens: float
    div: int
    pdiv: float
    max_labels: int
    max_frequency: float
    tcs_raw: float
    tcs_log: float
    avg_ir: float
    scumble: float
    per_label_presence: Tuple[int, ...]
    per_label_occurrence: Tuple[int, ...]
    # NaN for labels that never occur
    irlbl: Tuple[float, ...]
    absent_labels: Tuple[int, ...] = ()


@dataclass(frozen=True)
class PairStats:
    card2: float
    dens2: float
    div2: int
    pdiv2: float
    max_frequency2: float
    pair_index: Tuple[Tuple[int, int], ...]
    pair_counts: Tuple[int, ...]


def distinct_label_sets(dataset: MultiLabelDataset) -> List[Tuple[int, ...]]:
    """Sorted distinct label indices of every example."""
    counts = dataset.counts
    return [
        tuple(int(j) for j in counts.indices[counts.indptr[i] : counts.indptr[i + 1]])
        for i in range(dataset.m)
    ]


def imbalance_ratios(presence: npt.NDArray[np.int64]) -> npt.NDArray[np.float64]:
    """IRLbl per label from presence counts; NaN where a label never occurs."""
    irlbl = np.full(len(presence), np.nan)
    present = presence > 0
    if present.any():
        irlbl[present] = presence.max() / presence[present]
    return irlbl


def dataset_stats(dataset: MultiLabelDataset) -> DatasetStats:
    """
    Compute the imbalance measures of a data set.

    Card and Max Labels are multiplicity-weighted; Div ignores multiplicity; IRLbl,
    avgIR and SCUMBLE use presence counts.

    Args:
        dataset: Data set with at least one example and one label

    Returns:
        The measures
    """
    m, q = dataset.m, dataset.q
    sizes = np.asarray(dataset.counts.sum(axis=1)).ravel()
    presence = dataset.presence_counts
    occurrence = dataset.occurrence_counts

    card = float(sizes.mean()) if m else 0.0
    div = len(set(distinct_label_sets(dataset)))
    tcs_raw = float(m * q * div)

    irlbl = imbalance_ratios(presence)
    present = presence > 0
    absent = tuple(int(j) for j in np.flatnonzero(~present))
    if absent:
        logger.warning(
            f"{len(absent)} labels never occur and are excluded from avgIR/SCUMBLE: "
            f"{[dataset.label_names[j] for j in absent]}"
        )
    avg_ir = float(irlbl[present].mean()) if present.any() else 0.0

    return DatasetStats(
        card=card,
        dens=card / q,
        div=div,
        pdiv=div / m if m else 0.0,
        max_labels=int(sizes.max()) if m else 0,
        max_frequency=float(occurrence.max()) / m if m else 0.0,
        tcs_raw=tcs_raw,
        tcs_log=math.log10(tcs_raw) if tcs_raw > 0 else 0.0,
        avg_ir=avg_ir,
        scumble=scumble(dataset, irlbl),
        per_label_presence=tuple(int(c) for c in presence),
        per_label_occurrence=tuple(int(c) for c in occurrence),
        irlbl=tuple(float(r) for r in irlbl),
        absent_labels=absent,
    )


def scumble(dataset: MultiLabelDataset, irlbl: npt.NDArray[np.float64]) -> float:
    """
    Mean per-example SCUMBLE.

    SCUMBLE_i = 1 - geometric_mean(IRLbl of Y_i) / arithmetic_mean(IRLbl of Y_i);
    examples without labels contribute 0.
    """
    if dataset.m == 0:
        return 0.0
    counts = dataset.counts
    log_irlbl = np.log(np.where(np.isnan(irlbl), 1.0, irlbl))
    total = 0.0
    for i in range(dataset.m):
        labels = counts.indices[counts.indptr[i] : counts.indptr[i + 1]]
        if len(labels) == 0:
            continue
        geometric = math.exp(float(log_irlbl[labels].mean()))
        arithmetic = float(irlbl[labels].mean())
        total += 1.0 - geometric / arithmetic
    return total / dataset.m


def pair_stats(dataset: MultiLabelDataset) -> PairStats:
    """Second-order measures over unordered co-occurring label pairs."""
    m, q = dataset.m, dataset.q
    pairs = dataset.label_pairs
    pair_counts = np.asarray(dataset.pair_presence.sum(axis=0), dtype=np.int64).ravel()

    distinct = np.diff(dataset.counts.indptr)
    card2 = float((distinct * (distinct - 1) // 2).sum()) / m if m else 0.0
    div2 = len(pairs)

    return PairStats(
        card2=card2,
        dens2=card2 / q,
        div2=div2,
        pdiv2=div2 / m if m else 0.0,
        max_frequency2=float(pair_counts.max()) / m if div2 and m else 0.0,
        pair_index=tuple((int(a), int(b)) for a, b in pairs),
        pair_counts=tuple(int(c) for c in pair_counts),
    )


def stats_dict(stats: DatasetStats, pairs: PairStats) -> Dict[str, Any]:
    """JSON-ready mapping with exactly the keys of ``STATS_KEYS``."""
    values = {
        "card": stats.card,
        "dens": stats.dens,
        "div": stats.div,
        "pdiv": stats.pdiv,
        "tcs_raw": stats.tcs_raw,
        "tcs_log": stats.tcs_log,
        "avg_ir": stats.avg_ir,
        "scumble": stats.scumble,
        "max_labels": stats.max_labels,
        "max_frequency": stats.max_frequency,
        "card2": pairs.card2,
        "dens2": pairs.dens2,
        "div2": pairs.div2,
        "pdiv2": pairs.pdiv2,
        "max_frequency2": pairs.max_frequency2,
    }
    return {key: values[key] for key in STATS_KEYS}
