"""Prediction and confidence metrics over scored samples.

Prediction quality: accuracy and macro-F1. Confidence quality: expected
calibration error over 10 equal-width bins (last bin closed at 1.0), Brier
score, and the Mann-Whitney AUC separating correct from incorrect
predictions (ties count 0.5; absent when either class is empty).

All metrics are returned as fractions in [0, 1]; report rendering multiplies
by 100.
"""

from __future__ import annotations

import warnings
from bisect import bisect_right
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Sequence

from .confidence import labels_match, normalize_label
from .errors import EmocalError
from .lexicon import Taxonomy

N_BINS = 10


class MetricsError(EmocalError):
    code = "metrics"


@dataclass(frozen=True)
class ScoredSample:
    pred: str | None
    gold: str
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise MetricsError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class BinStat:
    count: int
    mean_conf: float
    acc: float


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    macro_f1: float
    ece: float
    brier: float
    auc: float | None
    n: int
    bin_stats: tuple[BinStat, ...]


def _is_correct(s: ScoredSample, aliases: dict[str, str] | None) -> bool:
    return s.pred is not None and labels_match(s.pred, s.gold, aliases)


def _require_samples(samples: Sequence[ScoredSample]) -> None:
    if not samples:
        raise MetricsError("metrics need at least one sample")


def accuracy(samples: Sequence[ScoredSample], aliases: dict[str, str] | None = None) -> float:
    _require_samples(samples)
    return sum(1 for s in samples if _is_correct(s, aliases)) / len(samples)


def macro_f1(
    samples: Sequence[ScoredSample],
    taxonomy: Taxonomy | Iterable[str] | None = None,
    aliases: dict[str, str] | None = None,
) -> float:
    """Unweighted mean F1 over classes seen in gold or valid predictions.

    Predictions outside the taxonomy (including parse failures) count as
    wrong for their gold class but do not open a class of their own.
    """
    _require_samples(samples)
    tax_labels = _taxonomy_labels(taxonomy, aliases)
    golds = [normalize_label(s.gold, aliases) for s in samples]
    preds = [normalize_label(s.pred, aliases) if s.pred is not None else None for s in samples]
    if tax_labels is not None:
        preds = [p if p in tax_labels else None for p in preds]

    classes = sorted(set(golds) | {p for p in preds if p is not None})
    f1s = []
    for cls in classes:
        tp = sum(1 for g, p in zip(golds, preds) if p == cls and g == cls)
        fp = sum(1 for g, p in zip(golds, preds) if p == cls and g != cls)
        fn = sum(1 for g, p in zip(golds, preds) if g == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return fsum(f1s) / len(f1s)


def _taxonomy_labels(
    taxonomy: Taxonomy | Iterable[str] | None, aliases: dict[str, str] | None
) -> set[str] | None:
    if taxonomy is None:
        return None
    labels = taxonomy.labels() if isinstance(taxonomy, Taxonomy) else list(taxonomy)
    return {normalize_label(l, aliases) for l in labels}


def bin_index(confidence: float, bins: int = N_BINS) -> int:
    """Bin assignment for [0, 0.1), ..., [0.9, 1.0] (last bin closed)."""
    edges = [i / bins for i in range(1, bins)]
    return min(bisect_right(edges, confidence), bins - 1)


def ece(
    samples: Sequence[ScoredSample],
    bins: int = N_BINS,
    aliases: dict[str, str] | None = None,
) -> tuple[float, tuple[BinStat, ...]]:
    _require_samples(samples)
    by_bin: list[list[ScoredSample]] = [[] for _ in range(bins)]
    for s in samples:
        by_bin[bin_index(s.confidence, bins)].append(s)

    stats: list[BinStat] = []
    contributions: list[float] = []
    n = len(samples)
    for members in by_bin:
        if not members:
            stats.append(BinStat(count=0, mean_conf=0.0, acc=0.0))
            continue
        mean_conf = fsum(s.confidence for s in members) / len(members)
        acc = sum(1 for s in members if _is_correct(s, aliases)) / len(members)
        stats.append(BinStat(count=len(members), mean_conf=mean_conf, acc=acc))
        contributions.append(len(members) / n * abs(mean_conf - acc))
    return fsum(contributions), tuple(stats)


def brier(samples: Sequence[ScoredSample], aliases: dict[str, str] | None = None) -> float:
    _require_samples(samples)
    return fsum(
        (s.confidence - (1.0 if _is_correct(s, aliases) else 0.0)) ** 2 for s in samples
    ) / len(samples)


def auc(
    samples: Sequence[ScoredSample], aliases: dict[str, str] | None = None
) -> float | None:
    """Mann-Whitney AUC of confidence as a correctness detector.

    Computed from tie-averaged ranks; returns None (with a warning) when all
    samples are correct or all are incorrect.
    """
    pos = [s.confidence for s in samples if _is_correct(s, aliases)]
    neg = [s.confidence for s in samples if not _is_correct(s, aliases)]
    if not pos or not neg:
        warnings.warn("AUC undefined: needs at least one correct and one incorrect sample")
        return None

    ranked = sorted(
        [(c, True) for c in pos] + [(c, False) for c in neg], key=lambda item: item[0]
    )
    rank_sum_pos = 0.0
    i = 0
    while i < len(ranked):
        j = i
        while j < len(ranked) and ranked[j][0] == ranked[i][0]:
            j += 1
        avg_rank = (i + 1 + j) / 2  # 1-based ranks i+1 .. j, tie-averaged
        rank_sum_pos += avg_rank * sum(1 for k in range(i, j) if ranked[k][1])
        i = j
    u = rank_sum_pos - len(pos) * (len(pos) + 1) / 2
    return u / (len(pos) * len(neg))


def compute_report(
    samples: Sequence[ScoredSample],
    taxonomy: Taxonomy | Iterable[str] | None = None,
    bins: int = N_BINS,
    aliases: dict[str, str] | None = None,
) -> MetricsReport:
    _require_samples(samples)
    ece_value, bin_stats = ece(samples, bins, aliases)
    return MetricsReport(
        acc=accuracy(samples, aliases),
        macro_f1=macro_f1(samples, taxonomy, aliases),
        ece=ece_value,
        brier=brier(samples, aliases),
        auc=auc(samples, aliases),
        n=len(samples),
        bin_stats=bin_stats,
    )
