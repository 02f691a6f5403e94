"""Confidence targets for annotated supervision data.

The target blends two priors: whether the predicted label matches the gold
label, and the mean token probability of the response. Correct predictions
map to [0.5, 1.0]; wrong ones map to [0, 0.5], discounted by the loop
distance between prediction and gold. Targets are rounded half-up to two
decimals once, at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal

from .errors import EmocalError
from .loop import EmotionLoop, normalized_distance
from .transcript import Transcript, format_confidence, parse


def round2(x: float) -> float:
    """Half-up rounding to two decimal places."""
    return float(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def normalize_label(label: str, aliases: dict[str, str] | None = None) -> str:
    key = label.strip().casefold()
    if aliases:
        folded = {k.strip().casefold(): v.strip().casefold() for k, v in aliases.items()}
        key = folded.get(key, key)
    return key


def labels_match(a: str | None, b: str | None, aliases: dict[str, str] | None = None) -> bool:
    """Case-insensitive, trimmed label equality, with optional alias mapping."""
    if a is None or b is None:
        return False
    return normalize_label(a, aliases) == normalize_label(b, aliases)


@dataclass(frozen=True)
class ConfidenceTarget:
    value: float  # in [0, 1], two decimals
    correct: bool
    semantic_dist: float
    mean_prob: float

    def __post_init__(self):
        lo, hi = (0.5, 1.0) if self.correct else (0.0, 0.5)
        if not lo <= self.value <= hi:
            raise EmocalError(f"target {self.value} outside [{lo}, {hi}]")


def mean_token_prob(t: Transcript) -> float:
    """Mean probability over all response tokens; falls back to ``mean_prob``."""
    if t.token_probs:
        bad = [p for p in t.token_probs if not 0.0 <= p <= 1.0]
        if bad:
            raise EmocalError(f"token probabilities outside [0, 1]: {bad}", code="bad_probability")
        return sum(t.token_probs) / len(t.token_probs)
    if t.mean_prob is not None:
        if not 0.0 <= t.mean_prob <= 1.0:
            raise EmocalError(
                f"mean_prob {t.mean_prob} outside [0, 1]", code="bad_probability"
            )
        return t.mean_prob
    raise EmocalError("record has neither token_probs nor mean_prob", code="no_probability")


def target_value(correct: bool, semantic_dist: float, mean_p: float) -> float:
    """The raw target formula before any loop lookup."""
    if not 0.0 <= mean_p <= 1.0:
        raise EmocalError(f"mean probability {mean_p} outside [0, 1]", code="bad_probability")
    if correct:
        return round2(0.5 * (1.0 + mean_p))
    return round2(0.5 - semantic_dist * mean_p)


def confidence_target(
    pred: str,
    gold: str,
    loop: EmotionLoop,
    mean_p: float,
    aliases: dict[str, str] | None = None,
) -> ConfidenceTarget:
    correct = labels_match(pred, gold, aliases)
    if correct:
        d = 0.0
    else:
        d = normalized_distance(
            loop, normalize_label(pred, aliases), normalize_label(gold, aliases)
        )
    return ConfidenceTarget(
        value=target_value(correct, d, mean_p), correct=correct, semantic_dist=d, mean_prob=mean_p
    )


def annotate_record(
    record: dict, loop: EmotionLoop, aliases: dict[str, str] | None = None
) -> dict:
    """Append the confidence tag implied by the record's answer and gold label.

    The original raw text is preserved under ``raw_unannotated``.
    """
    raw = record.get("raw")
    if not isinstance(raw, str):
        raise EmocalError("record has no 'raw' text", code="unparseable")
    if "<confidence>" in raw:
        raise EmocalError("record already contains a confidence tag", code="already_annotated")
    t, _ = parse(raw)
    if t.answer is None:
        raise EmocalError("record has no extractable answer", code="no_answer")
    gold = record.get("gold_label")
    if not gold:
        raise EmocalError("record has no gold_label", code="missing_gold")
    probs = record.get("token_probs")
    t = replace(
        t,
        token_probs=tuple(probs) if probs else None,
        mean_prob=record.get("mean_prob"),
    )
    mean_p = mean_token_prob(t)
    target = confidence_target(t.answer, gold, loop, mean_p, aliases)

    annotated = raw.rstrip() + f"\n<confidence>{format_confidence(target.value)}</confidence>"
    out = dict(record)
    out["raw"] = annotated
    out["raw_unannotated"] = raw
    out["answer"] = t.answer
    out["confidence"] = target.value
    out["format_ok"] = parse(annotated)[1].ok
    return out
