#!/usr/bin/env python3
"""Regenerate the end-to-end golden files from the shipped fixture corpus.

Runs the full CLI pipeline (loop build -> annotate -> score -> eval) over
tests/fixtures/corpus and freezes every intermediate and final artifact into
tests/fixtures/golden. The byte-identity test in tests/test_acceptance.py
replays the same pipeline into a temp directory and diffs against these
files, so rerun this script (and eyeball the diff) whenever output formats
intentionally change.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from emocal.cli import main  # noqa: E402

CORPUS = REPO / "tests" / "fixtures" / "corpus"
GOLDEN = REPO / "tests" / "fixtures" / "golden"

PIPELINE_OUTPUTS = [
    "loop_ver.json",
    "loop_vsa.json",
    "records_ver.annotated.jsonl",
    "records_vsa.annotated.jsonl",
    "records_ver.scored.jsonl",
    "records_vsa.scored.jsonl",
    "report.json",
    "report.md",
]


def run_pipeline(workdir: Path) -> None:
    """Run the golden pipeline inside ``workdir`` (corpus inputs already there)."""
    steps = [
        ["loop", "build", "--lexicon", "vad.tsv", "--taxonomy", "mikels8.json",
         "-o", "loop_ver.json"],
        ["loop", "build", "--lexicon", "vad.tsv", "--taxonomy", "polarity2.json",
         "-o", "loop_vsa.json"],
        ["annotate", "--loop", "loop_ver.json", "-i", "records_ver.jsonl",
         "-o", "records_ver.annotated.jsonl"],
        ["annotate", "--loop", "loop_vsa.json", "-i", "records_vsa.jsonl",
         "-o", "records_vsa.annotated.jsonl"],
        ["score", "-i", "records_ver.annotated.jsonl", "-o", "records_ver.scored.jsonl"],
        ["score", "-i", "records_vsa.annotated.jsonl", "-o", "records_vsa.scored.jsonl"],
        ["eval", "--manifest", "manifest.json", "-o", "report.json", "--markdown", "report.md"],
    ]
    for argv in steps:
        argv = [_abs(workdir, a) for a in argv]
        code = main(argv)
        if code != 0:
            raise SystemExit(f"pipeline step failed ({code}): {' '.join(argv)}")


def _abs(workdir: Path, arg: str) -> str:
    if arg.endswith((".tsv", ".json", ".jsonl", ".md")) and not Path(arg).is_absolute():
        return str(workdir / arg)
    return arg


def main_script() -> None:
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        for src in CORPUS.iterdir():
            shutil.copy(src, workdir / src.name)
        run_pipeline(workdir)
        GOLDEN.mkdir(parents=True, exist_ok=True)
        for name in PIPELINE_OUTPUTS:
            shutil.copy(workdir / name, GOLDEN / name)
            print(f"froze {GOLDEN / name}")


if __name__ == "__main__":
    main_script()
