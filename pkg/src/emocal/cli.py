"""Command-line entry point.

Subcommands: ``loop build``, ``loop dist``, ``parse``, ``annotate``,
``score``, ``eval``, ``split``, ``simulate``. Data goes to stdout or the
``-o`` path; diagnostics go to stderr. Exit codes: 0 success, 1 domain error
(structured JSON on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Iterator, TextIO, TypeVar

from . import bench, calibsim
from .confidence import annotate_record
from .errors import EmocalError, FormatViolationError
from .lexicon import load_lexicon, load_taxonomy, resolve_points
from .loop import build_loop, load_loop, normalized_distance, save_loop, serialize_loop
from .reward import RewardConfig, score_record
from .transcript import augment_record, parse as parse_transcript, read_records

T = TypeVar("T")
U = TypeVar("U")

_VARIANTS = {"log": "log_likelihood", "log_likelihood": "log_likelihood", "brier": "brier"}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except EmocalError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), file=sys.stderr)
        return 1


def run() -> None:
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the stream early
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    raise SystemExit(code)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emocal", description="Emotion-loop confidence calibration toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    loop_cmd = sub.add_parser("loop", help="build or query emotion loops")
    loop_sub = loop_cmd.add_subparsers(dest="loop_command", required=True)

    p = loop_sub.add_parser("build", help="build the optimal loop for a taxonomy")
    p.add_argument("--lexicon", required=True, help="VAD lexicon TSV")
    p.add_argument("--taxonomy", required=True, help="taxonomy JSON")
    p.add_argument("-o", "--output", default=None, help="loop JSON path (default stdout)")
    p.add_argument("--heuristic", action="store_true", help="allow inexact solver for large n")
    p.set_defaults(handler=_cmd_loop_build)

    p = loop_sub.add_parser("dist", help="normalized distance between two categories")
    p.add_argument("--loop", required=True, help="loop JSON")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(handler=_cmd_loop_dist)

    p = sub.add_parser("parse", help="parse transcripts, adding answer/confidence/format_ok")
    _add_stream_args(p)
    p.add_argument("--strict", action="store_true", help="fail on the first format violation")
    p.set_defaults(handler=_cmd_parse)

    p = sub.add_parser("annotate", help="append computed confidence tags to records")
    p.add_argument("--loop", required=True, help="loop JSON")
    p.add_argument("--taxonomy", default=None, help="taxonomy JSON supplying label aliases")
    _add_stream_args(p)
    p.set_defaults(handler=_cmd_annotate)

    p = sub.add_parser("score", help="attach reward breakdowns to records")
    _add_stream_args(p)
    p.add_argument("--variant", choices=sorted(_VARIANTS), default="log_likelihood")
    p.add_argument(
        "--group-advantages",
        choices=["plain", "normalized"],
        default=None,
        help="treat the input as one rollout group and add per-record advantages",
    )
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("eval", help="evaluate a benchmark manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("-o", "--output", default=None, help="JSON report path (default stdout)")
    p.add_argument("--markdown", default=None, help="also write a markdown report here")
    p.add_argument("--weighted", action="store_true", help="sample-weighted group averages")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("split", help="split a JSONL file into three seeded parts")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True, help="output prefix")
    p.add_argument("--ratios", default="6,3,1", help="three comma-separated positive integers")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("simulate", help="run the calibration-dynamics simulator")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=44)
    p.add_argument("--accuracy", type=float, default=0.55)
    p.add_argument("--reward", choices=sorted(_VARIANTS), default="log")
    p.add_argument("--normalize-adv", action="store_true")
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--out", default=None, help="trajectory CSV path (default stdout)")
    p.set_defaults(handler=_cmd_simulate)
    return parser


def _add_stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-i", "--input", required=True, help="records JSONL")
    p.add_argument("-o", "--output", default=None, help="output JSONL (default stdout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel record processing")


@contextlib.contextmanager
def _out_stream(path: str | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as handle:
            yield handle


def _map_ordered(fn: Callable[[T], U], items: Iterable[T], jobs: int) -> Iterator[U]:
    if jobs <= 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        yield from executor.map(fn, items)


def _stream_records(args, transform: Callable[[tuple], dict]) -> int:
    errors: list[str] = []
    records = read_records(args.input, errors=errors)
    with _out_stream(args.output) as out:
        for line in _map_ordered(
            lambda pair: json.dumps(transform(pair), ensure_ascii=False), records, args.jobs
        ):
            out.write(line + "\n")
    for message in errors:
        print(f"warning: {args.input}: {message}", file=sys.stderr)
    return 0


def _cmd_loop_build(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    taxonomy = load_taxonomy(args.taxonomy)
    points = resolve_points(taxonomy, lexicon)
    parents = taxonomy.parent_map() if taxonomy.hierarchical else None
    loop = build_loop(
        points, parents, heuristic=args.heuristic, taxonomy_name=taxonomy.name
    )
    if args.output:
        save_loop(loop, args.output)
    else:
        print(json.dumps(serialize_loop(loop), indent=2, ensure_ascii=False))
    return 0


def _cmd_loop_dist(args) -> int:
    loop = load_loop(args.loop)
    print(f"{normalized_distance(loop, args.a, args.b):.2f}")
    return 0


def _cmd_parse(args) -> int:
    def transform(pair):
        t, record = pair
        out = augment_record(t, record)
        if args.strict and not out["format_ok"]:
            _, verdict = parse_transcript(t.raw)
            raise FormatViolationError(list(verdict.violations))
        return out

    return _stream_records(args, transform)


def _cmd_annotate(args) -> int:
    loop = load_loop(args.loop)
    aliases = load_taxonomy(args.taxonomy).aliases if args.taxonomy else None

    def transform(pair):
        _, record = pair
        return annotate_record(record, loop, aliases)

    return _stream_records(args, transform)


def _cmd_score(args) -> int:
    config = RewardConfig(conf_variant=_VARIANTS[args.variant])

    def transform(pair):
        _, record = pair
        breakdown = score_record(record, config)
        out = dict(record)
        out["reward"] = {
            "format": breakdown.r_format,
            "correct": breakdown.r_correct,
            "conf": breakdown.r_conf,
            "total": breakdown.total,
        }
        return out

    if args.group_advantages is None:
        return _stream_records(args, transform)

    from .grpo import advantages

    errors: list[str] = []
    scored = [transform(pair) for pair in read_records(args.input, errors=errors)]
    if scored:
        advs = advantages(
            [r["reward"]["total"] for r in scored], args.group_advantages == "normalized"
        )
        for record, adv in zip(scored, advs):
            record["reward"]["advantage"] = adv
    with _out_stream(args.output) as out:
        for record in scored:
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
    for message in errors:
        print(f"warning: {args.input}: {message}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    manifest = bench.load_manifest(args.manifest)
    report = bench.evaluate(manifest, weighted=args.weighted)
    rendered = bench.render_report(report, "json")
    if args.output:
        Path(args.output).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    if args.markdown:
        Path(args.markdown).write_text(bench.render_report(report, "markdown"), encoding="utf-8")
    for note in report.warnings:
        print(f"note: {note}", file=sys.stderr)
    return 0


def _cmd_split(args) -> int:
    try:
        ratios = tuple(int(r) for r in args.ratios.split(","))
    except ValueError:
        raise EmocalError(f"cannot parse ratios {args.ratios!r}") from None
    try:
        lines = [l for l in Path(args.input).read_text(encoding="utf-8").splitlines() if l.strip()]
    except OSError as exc:
        raise EmocalError(f"cannot read {args.input}: {exc}") from exc
    parts = bench.split_dataset(lines, ratios, seed=args.seed)  # type: ignore[arg-type]
    for i, part in enumerate(parts, start=1):
        path = Path(f"{args.output}.split{i}.jsonl")
        path.write_text("".join(line + "\n" for line in part), encoding="utf-8")
        print(f"wrote {len(part)} records to {path}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    cfg = calibsim.SimConfig(
        steps=args.steps,
        group_size=args.group_size,
        seed=args.seed,
        true_accuracy=args.accuracy,
        reward_variant=_VARIANTS[args.reward],
        normalize_advantage=args.normalize_adv,
        learning_rate=args.lr,
    )
    traj = calibsim.run_sim(cfg)
    if args.out:
        calibsim.export_trajectory(traj, args.out)
    else:
        sys.stdout.write(calibsim.trajectory_to_csv(traj))
    print(
        f"final mean confidence {traj.final_mean_confidence:.4f}, "
        f"final ece {traj.ece[-1] if traj.ece else 0.0:.4f}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    run()
