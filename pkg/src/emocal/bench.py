"""Benchmark harness: subtask manifests, evaluation, grouping, splits, reports.

A manifest is JSON::

    { "name": str,
      "subtasks": [ { "name": str, "taxonomy": path, "loop": path,
                      "records": path } ],
      "groups": { "ID-VER": [subtask names], ... } }

Paths resolve relative to the manifest's directory. Records are the
transcript JSONL format with gold labels inline; predictions and confidences
are parsed from the raw text (falling back to the record's ``confidence``
field, then to a flagged neutral 0.5). Group metrics are unweighted means
over member subtasks, matching per-subtask averaging in result tables;
sample-weighted means are available behind a flag.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from math import fsum
from pathlib import Path
from typing import Sequence, TypeVar

from .errors import EmocalError
from .lexicon import Taxonomy, load_taxonomy
from .metrics import BinStat, MetricsReport, ScoredSample, compute_report
from .transcript import read_records

T = TypeVar("T")


class BenchError(EmocalError):
    code = "bench"


@dataclass(frozen=True)
class SubtaskDef:
    name: str
    taxonomy: str = ""
    loop: str = ""
    records: str = ""


@dataclass(frozen=True)
class Manifest:
    name: str
    subtasks: tuple[SubtaskDef, ...]
    groups: dict[str, tuple[str, ...]]
    base_dir: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


@dataclass(frozen=True)
class GroupMetrics:
    acc: float
    macro_f1: float
    ece: float
    brier: float
    auc: float | None
    n: int
    members: tuple[str, ...]


@dataclass(frozen=True)
class EvalReport:
    name: str
    subtasks: dict[str, MetricsReport]
    groups: dict[str, GroupMetrics]
    n_records: int
    warnings: tuple[str, ...]


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BenchError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BenchError(f"{path}: invalid JSON: {exc}") from exc
    return parse_manifest(doc, base_dir=path.parent, source=str(path))


def parse_manifest(doc: dict, base_dir: Path = Path("."), source: str = "<memory>") -> Manifest:
    if not isinstance(doc, dict) or not isinstance(doc.get("subtasks"), list):
        raise BenchError(f"{source}: manifest must be an object with a 'subtasks' list")
    subtasks = []
    for i, s in enumerate(doc["subtasks"]):
        if not isinstance(s, dict) or not s.get("name"):
            raise BenchError(f"{source}: subtask #{i} must be an object with a 'name'")
        subtasks.append(
            SubtaskDef(
                name=str(s["name"]),
                taxonomy=str(s.get("taxonomy") or ""),
                loop=str(s.get("loop") or ""),
                records=str(s.get("records") or ""),
            )
        )
    names = [s.name for s in subtasks]
    if len(set(names)) != len(names):
        raise BenchError(f"{source}: duplicate subtask names")
    groups: dict[str, tuple[str, ...]] = {}
    for group, members in (doc.get("groups") or {}).items():
        for member in members:
            if member not in names:
                raise BenchError(f"{source}: group {group!r} references unknown subtask {member!r}")
        groups[str(group)] = tuple(str(m) for m in members)
    return Manifest(
        name=str(doc.get("name", "")), subtasks=tuple(subtasks), groups=groups, base_dir=base_dir
    )


def evaluate(manifest: Manifest, *, weighted: bool = False) -> EvalReport:
    """Evaluate every subtask's records and aggregate group averages."""
    subtask_reports: dict[str, MetricsReport] = {}
    notes: list[str] = []
    n_records = 0
    for sub in manifest.subtasks:
        if not sub.records:
            raise BenchError(f"subtask {sub.name!r} has no records path")
        records_path = manifest.resolve(sub.records)
        if not records_path.exists():
            raise BenchError(f"subtask {sub.name!r}: records file {records_path} not found")
        taxonomy: Taxonomy | None = None
        if sub.taxonomy:
            taxonomy = load_taxonomy(manifest.resolve(sub.taxonomy))
        aliases = taxonomy.aliases if taxonomy else None

        samples: list[ScoredSample] = []
        line_errors: list[str] = []
        n_defaulted = 0
        for t, record in read_records(records_path, errors=line_errors):
            gold = record.get("gold_label")
            if not gold:
                raise BenchError(
                    f"subtask {sub.name!r}: record {record.get('id')!r} has no gold_label",
                    code="missing_gold",
                )
            confidence = t.confidence
            if confidence is None:
                confidence = record.get("confidence")
            if confidence is None or not 0.0 <= confidence <= 1.0:
                confidence = 0.5
                n_defaulted += 1
            samples.append(ScoredSample(pred=t.answer, gold=str(gold), confidence=confidence))
        if line_errors:
            notes.append(f"{sub.name}: skipped malformed lines: " + "; ".join(line_errors))
        if not samples:
            raise BenchError(f"subtask {sub.name!r} has no records")
        if n_defaulted:
            notes.append(f"{sub.name}: {n_defaulted} records without confidence (used 0.5)")
        subtask_reports[sub.name] = compute_report(samples, taxonomy, aliases=aliases)
        n_records += len(samples)

    groups: dict[str, GroupMetrics] = {}
    for group, members in manifest.groups.items():
        reports = [subtask_reports[m] for m in members]
        if not reports:
            continue
        groups[group] = _aggregate(reports, members, weighted=weighted)
        if any(r.auc is None for r in reports):
            notes.append(f"group {group}: AUC averaged over members where defined")
    return EvalReport(
        name=manifest.name,
        subtasks=subtask_reports,
        groups=groups,
        n_records=n_records,
        warnings=tuple(notes),
    )


def _aggregate(
    reports: Sequence[MetricsReport], members: Sequence[str], *, weighted: bool
) -> GroupMetrics:
    def mean(values: list[float], weights: list[int]) -> float:
        if weighted:
            return fsum(v * w for v, w in zip(values, weights)) / sum(weights)
        return fsum(values) / len(values)

    ns = [r.n for r in reports]
    auc_pairs = [(r.auc, r.n) for r in reports if r.auc is not None]
    return GroupMetrics(
        acc=mean([r.acc for r in reports], ns),
        macro_f1=mean([r.macro_f1 for r in reports], ns),
        ece=mean([r.ece for r in reports], ns),
        brier=mean([r.brier for r in reports], ns),
        auc=mean([a for a, _ in auc_pairs], [n for _, n in auc_pairs]) if auc_pairs else None,
        n=sum(ns),
        members=tuple(members),
    )


def split_dataset(
    records: Sequence[T], ratios: tuple[int, int, int] = (6, 3, 1), seed: int = 0
) -> tuple[list[T], list[T], list[T]]:
    """Seeded shuffle, then contiguous partition into three ratio-sized sets."""
    if not records:
        raise BenchError("cannot split an empty record set")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise BenchError(f"ratios must be three positive numbers, got {ratios!r}")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n, total = len(shuffled), sum(ratios)
    n1 = n * ratios[0] // total
    n2 = n * ratios[1] // total
    return shuffled[:n1], shuffled[n1 : n1 + n2], shuffled[n1 + n2 :]


# --- report documents --------------------------------------------------------


def report_to_dict(report: EvalReport) -> dict:
    return {
        "name": report.name,
        "subtasks": {
            name: {
                "acc": r.acc,
                "macro_f1": r.macro_f1,
                "ece": r.ece,
                "brier": r.brier,
                "auc": r.auc,
                "n": r.n,
                "bin_stats": [[b.count, b.mean_conf, b.acc] for b in r.bin_stats],
            }
            for name, r in report.subtasks.items()
        },
        "groups": {
            name: {
                "acc": g.acc,
                "macro_f1": g.macro_f1,
                "ece": g.ece,
                "brier": g.brier,
                "auc": g.auc,
                "n": g.n,
                "members": list(g.members),
            }
            for name, g in report.groups.items()
        },
        "n_records": report.n_records,
        "warnings": list(report.warnings),
    }


def report_from_dict(doc: dict) -> EvalReport:
    subtasks = {
        name: MetricsReport(
            acc=r["acc"],
            macro_f1=r["macro_f1"],
            ece=r["ece"],
            brier=r["brier"],
            auc=r["auc"],
            n=r["n"],
            bin_stats=tuple(BinStat(count=b[0], mean_conf=b[1], acc=b[2]) for b in r["bin_stats"]),
        )
        for name, r in doc["subtasks"].items()
    }
    groups = {
        name: GroupMetrics(
            acc=g["acc"],
            macro_f1=g["macro_f1"],
            ece=g["ece"],
            brier=g["brier"],
            auc=g["auc"],
            n=g["n"],
            members=tuple(g["members"]),
        )
        for name, g in doc["groups"].items()
    }
    return EvalReport(
        name=doc["name"],
        subtasks=subtasks,
        groups=groups,
        n_records=doc["n_records"],
        warnings=tuple(doc["warnings"]),
    )


def render_report(report: EvalReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"
    if fmt == "markdown":
        return _render_markdown(report)
    raise BenchError(f"unknown report format {fmt!r}")


def _pct(value: float | None) -> str:
    return "—" if value is None else f"{100 * value:.2f}"


def _render_markdown(report: EvalReport) -> str:
    lines = [f"# {report.name or 'Evaluation report'}", ""]
    lines += ["## Emotion prediction", "", "| Subtask | Acc | F1 |", "| --- | --- | --- |"]
    for name, r in report.subtasks.items():
        lines.append(f"| {name} | {_pct(r.acc)} | {_pct(r.macro_f1)} |")
    lines += [
        "",
        "## Confidence estimation",
        "",
        "| Subtask | ECE | Brier | AUC |",
        "| --- | --- | --- | --- |",
    ]
    for name, r in report.subtasks.items():
        lines.append(f"| {name} | {_pct(r.ece)} | {_pct(r.brier)} | {_pct(r.auc)} |")
    if report.groups:
        lines += [
            "",
            "## Group averages",
            "",
            "| Group | Acc | F1 | ECE | Brier | AUC |",
            "| --- | --- | --- | --- | --- | --- |",
        ]
        for name, g in report.groups.items():
            lines.append(
                f"| {name} | {_pct(g.acc)} | {_pct(g.macro_f1)} | {_pct(g.ece)} "
                f"| {_pct(g.brier)} | {_pct(g.auc)} |"
            )
    lines += ["", f"Records evaluated: {report.n_records}"]
    for note in report.warnings:
        lines.append(f"- {note}")
    return "\n".join(lines) + "\n"
