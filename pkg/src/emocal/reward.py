"""Reward components for scored transcripts.

Three components, each worth at most 1: a binary format reward, a binary
correctness reward, and a non-positive confidence reward. The confidence
reward is log-likelihood by default (clamped away from log 0); a Brier-based
variant exists for ablations. The total is their (optionally re-weighted)
sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .confidence import labels_match
from .errors import EmocalError
from .transcript import FormatVerdict, parse

CONF_EPSILON = 1e-4  # clamp bound: the 2-decimal grammar permits c in {0, 1}
NEUTRAL_CONFIDENCE = 0.5  # information-free point used when no confidence parses
VARIANTS = ("log_likelihood", "brier")


@dataclass(frozen=True)
class RewardConfig:
    conf_variant: str = "log_likelihood"
    format_weight: float = 1.0
    correct_weight: float = 1.0
    conf_weight: float = 1.0

    def __post_init__(self):
        if self.conf_variant not in VARIANTS:
            raise EmocalError(f"unknown confidence reward variant {self.conf_variant!r}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: int
    r_correct: int
    r_conf: float
    total: float
    conf_variant: str
    clamped: bool


def reward_format(verdict: FormatVerdict) -> int:
    return 1 if verdict.ok else 0


def reward_correct(pred: str, gold: str, aliases: dict[str, str] | None = None) -> int:
    return 1 if labels_match(pred, gold, aliases) else 0


def reward_conf(correct: bool, c: float, variant: str = "log_likelihood") -> float:
    """Non-positive confidence reward; maximal when confidence matches correctness."""
    if not 0.0 <= c <= 1.0:
        raise EmocalError(f"confidence {c} outside [0, 1]", code="confidence_out_of_range")
    if variant == "log_likelihood":
        p = c if correct else 1.0 - c
        return math.log(min(max(p, CONF_EPSILON), 1.0 - CONF_EPSILON))
    if variant == "brier":
        return -((1.0 if correct else 0.0) - c) ** 2
    raise EmocalError(f"unknown confidence reward variant {variant!r}")


def conf_clamped(correct: bool, c: float, variant: str = "log_likelihood") -> bool:
    if variant != "log_likelihood":
        return False
    p = c if correct else 1.0 - c
    return p < CONF_EPSILON or p > 1.0 - CONF_EPSILON


def score_record(
    record: dict,
    config: RewardConfig | None = None,
    aliases: dict[str, str] | None = None,
) -> RewardBreakdown:
    """Score one transcript record against its gold label.

    Lenient degradation: a missing or invalid confidence zeroes the format
    reward and scores the confidence term at the neutral 0.5; a missing
    answer zeroes the correctness reward.
    """
    cfg = config or RewardConfig()
    gold = record.get("gold_label")
    if not gold:
        raise EmocalError("record has no gold_label", code="missing_gold")
    t, verdict = parse(record.get("raw") or "")

    r_format = reward_format(verdict) if t.confidence is not None else 0
    r_correct = reward_correct(t.answer, gold, aliases) if t.answer is not None else 0
    c = t.confidence if t.confidence is not None else NEUTRAL_CONFIDENCE
    r_conf = reward_conf(bool(r_correct), c, cfg.conf_variant)
    total = (
        cfg.format_weight * r_format + cfg.correct_weight * r_correct + cfg.conf_weight * r_conf
    )
    return RewardBreakdown(
        r_format=r_format,
        r_correct=r_correct,
        r_conf=r_conf,
        total=total,
        conf_variant=cfg.conf_variant,
        clamped=conf_clamped(bool(r_correct), c, cfg.conf_variant),
    )
