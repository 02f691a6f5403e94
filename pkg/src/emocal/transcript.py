"""Tagged-transcript parsing, validation, and serialization.

A well-formed response is::

    <think>
    <element>...</element>
    <human>...</human>
    <context>...</context>
    <interaction>...</interaction>
    <analysis>...</analysis>
    </think>
    <answer>...</answer>
    <confidence>0.90</confidence>      # optional block

Tag matching is exact, case-sensitive, and attribute-free. The format
verdict is binary; ``parse`` reports every defect it finds using the codes
below. The ``<human>`` step is required even for scenes without people (its
body may state the absence), which keeps the verdict decidable.

Violation codes:

* ``missing_think`` / ``multiple_think`` - no complete ``<think>`` block, or
  more than one (nested blocks count as multiples)
* ``missing_step:<kind>`` / ``multiple_step:<kind>`` / ``empty_step:<kind>``
* ``step_order`` - all five steps present but out of order
* ``missing_answer`` / ``multiple_answer`` / ``empty_answer``
* ``answer_position`` - answer not after the think block
* ``multiple_confidence`` / ``confidence_position`` /
  ``confidence_not_numeric`` / ``confidence_out_of_range``
* ``stray_text`` / ``stray_text_in_think`` - non-whitespace outside the
  expected blocks
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmocalError, FormatViolationError

STEP_KINDS = ("element", "human", "context", "interaction", "analysis")
_ALL_TAGS = STEP_KINDS + ("think", "answer", "confidence")
_BLOCK_RE = {name: re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL) for name in _ALL_TAGS}
_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


class RecordError(EmocalError):
    code = "records"


@dataclass(frozen=True)
class Transcript:
    raw: str
    steps: dict[str, str] = field(default_factory=dict)
    answer: str | None = None
    confidence: float | None = None
    token_probs: tuple[float, ...] | None = None
    mean_prob: float | None = None


@dataclass(frozen=True)
class FormatVerdict:
    ok: bool
    violations: tuple[str, ...] = ()


def parse(raw: str, strict: bool = False) -> tuple[Transcript, FormatVerdict]:
    """Parse a tagged response; lenient mode extracts whatever is recoverable."""
    violations: list[str] = []

    think_blocks = list(_BLOCK_RE["think"].finditer(raw))
    n_open, n_close = raw.count("<think>"), raw.count("</think>")
    if n_open == 1 and n_close == 1 and len(think_blocks) == 1:
        think = think_blocks[0]
    else:
        think = think_blocks[0] if think_blocks else None
        violations.append("multiple_think" if max(n_open, n_close) > 1 else "missing_think")

    step_region = think.group(1) if think is not None else raw
    steps: dict[str, str] = {}
    step_spans: list[tuple[int, int]] = []
    positions: dict[str, int] = {}
    for kind in STEP_KINDS:
        matches = list(_BLOCK_RE[kind].finditer(step_region))
        if not matches:
            violations.append(f"missing_step:{kind}")
            continue
        if len(matches) > 1:
            violations.append(f"multiple_step:{kind}")
        m = matches[0]
        body = m.group(1).strip()
        if not body:
            violations.append(f"empty_step:{kind}")
        else:
            steps[kind] = body
        positions[kind] = m.start()
        step_spans.extend(m.span() for m in matches)
    if len(positions) == len(STEP_KINDS):
        ordered = [positions[k] for k in STEP_KINDS]
        if ordered != sorted(ordered):
            violations.append("step_order")
    if think is not None and _has_stray_text(step_region, step_spans):
        violations.append("stray_text_in_think")

    answer_matches = list(_BLOCK_RE["answer"].finditer(raw))
    answer: str | None = None
    if not answer_matches:
        violations.append("missing_answer")
    else:
        if len(answer_matches) > 1:
            violations.append("multiple_answer")
        m = answer_matches[0]
        answer = m.group(1).strip() or None
        if answer is None:
            violations.append("empty_answer")
        if think is not None and m.start() < think.end():
            violations.append("answer_position")

    conf_matches = list(_BLOCK_RE["confidence"].finditer(raw))
    confidence: float | None = None
    if conf_matches:
        if len(conf_matches) > 1:
            violations.append("multiple_confidence")
        m = conf_matches[0]
        if answer_matches and m.start() < answer_matches[0].end():
            violations.append("confidence_position")
        body = m.group(1).strip()
        if not _DECIMAL_RE.match(body):
            violations.append("confidence_not_numeric")
        else:
            value = float(body)
            if 0.0 <= value <= 1.0:
                confidence = value
            else:
                violations.append("confidence_out_of_range")

    outer_spans = [m.span() for m in think_blocks + answer_matches + conf_matches]
    if _has_stray_text(raw, outer_spans):
        violations.append("stray_text")

    verdict = FormatVerdict(ok=not violations, violations=tuple(violations))
    if strict and not verdict.ok:
        raise FormatViolationError(list(verdict.violations))
    transcript = Transcript(raw=raw, steps=steps, answer=answer, confidence=confidence)
    return transcript, verdict


def _has_stray_text(text: str, spans: Iterable[tuple[int, int]]) -> bool:
    chars = list(text)
    for start, end in spans:
        for i in range(start, end):
            chars[i] = " "
    return bool("".join(chars).strip())


def serialize(t: Transcript) -> str:
    """Emit the canonical tagged layout; the result always parses ok."""
    for kind in STEP_KINDS:
        body = t.steps.get(kind, "").strip() if t.steps else ""
        if not body:
            raise EmocalError(f"step {kind!r} is missing or empty", code="missing_field")
        _check_body(body, f"step {kind!r}")
    if not t.answer or not t.answer.strip():
        raise EmocalError("answer is missing or empty", code="missing_field")
    _check_body(t.answer.strip(), "answer")

    lines = ["<think>"]
    lines += [f"<{kind}>{t.steps[kind].strip()}</{kind}>" for kind in STEP_KINDS]
    lines.append("</think>")
    lines.append(f"<answer>{t.answer.strip()}</answer>")
    if t.confidence is not None:
        if not 0.0 <= t.confidence <= 1.0:
            raise EmocalError(
                f"confidence {t.confidence!r} outside [0, 1]", code="confidence_out_of_range"
            )
        lines.append(f"<confidence>{format_confidence(t.confidence)}</confidence>")
    return "\n".join(lines)


def _check_body(body: str, what: str) -> None:
    for name in _ALL_TAGS:
        if f"<{name}>" in body or f"</{name}>" in body:
            raise EmocalError(f"{what} contains a reserved tag <{name}>", code="tag_in_field")


def format_confidence(value: float) -> str:
    """Two-decimal confidence rendering used everywhere a tag is emitted."""
    from .confidence import round2

    return f"{round2(value):.2f}"


# --- JSONL record streams ---------------------------------------------------
#
# One object per line:
#   { "id": str, "task": str, "raw": str, "gold_label": str|null,
#     "token_probs": [float]|null, "mean_prob": float|null }
# Writers add parsed fields: "answer", "confidence", "format_ok".
# Unknown fields are preserved on round-trip.


def read_records(
    path: str | Path, *, errors: list[str] | None = None
) -> Iterator[tuple[Transcript, dict]]:
    """Stream (Transcript, record) pairs from a JSONL file.

    Malformed lines are skipped; they are reported in ``errors`` when a list
    is supplied, otherwise a summary RecordError is raised after the last
    good record.
    """
    collected: list[str] = []
    sink = errors if errors is not None else collected
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise RecordError(f"cannot read records file {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                sink.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict) or not isinstance(record.get("raw"), str):
                sink.append(f"line {lineno}: record must be an object with a 'raw' string")
                continue
            yield record_to_transcript(record), record
    if errors is None and collected:
        raise RecordError(f"{path}: {len(collected)} malformed lines: " + "; ".join(collected))


def record_to_transcript(record: dict) -> Transcript:
    t, _ = parse(record["raw"])
    token_probs = record.get("token_probs")
    return replace(
        t,
        token_probs=tuple(token_probs) if token_probs else None,
        mean_prob=record.get("mean_prob"),
    )


def write_records(path: str | Path, pairs: Iterable[tuple[Transcript, dict]]) -> None:
    """Write records augmented with the parsed fields."""
    with open(path, "w", encoding="utf-8") as handle:
        for t, record in pairs:
            handle.write(json.dumps(augment_record(t, record), ensure_ascii=False) + "\n")


def augment_record(t: Transcript, record: dict) -> dict:
    _, verdict = parse(t.raw)
    out = dict(record)
    out["answer"] = t.answer
    out["confidence"] = t.confidence
    out["format_ok"] = verdict.ok
    return out
