"""Group-relative policy arithmetic over caller-supplied token probabilities.

This module computes objective values only: group advantages (mean-centered,
optionally std-normalized), the clipped surrogate with a KL penalty, and the
sequence NLL used by the supervised stages. No model, sampling, or gradient
code lives here.

Rollout groups travel as JSONL, one group per line::

    { "query_id": str,
      "responses": [ { "reward": float, "p_theta": [float],
                       "p_old": [float], "p_ref": [float] } ] }
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmocalError

ZERO_VARIANCE_EPS = 1e-8


class GrpoError(EmocalError):
    code = "grpo"


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    kl_beta: float = 0.01
    normalize_advantage: bool = False

    def __post_init__(self):
        if self.clip_eps <= 0:
            raise GrpoError(f"clip_eps must be positive, got {self.clip_eps}")
        if self.kl_beta < 0:
            raise GrpoError(f"kl_beta must be nonnegative, got {self.kl_beta}")


@dataclass(frozen=True)
class RolloutResponse:
    reward: float
    p_theta: tuple[float, ...]
    p_old: tuple[float, ...]
    p_ref: tuple[float, ...]

    def __post_init__(self):
        if not self.p_theta:
            raise GrpoError("response has no tokens")
        if not len(self.p_theta) == len(self.p_old) == len(self.p_ref):
            raise GrpoError("p_theta, p_old and p_ref must have equal length")


@dataclass(frozen=True)
class RolloutGroup:
    query_id: str
    responses: tuple[RolloutResponse, ...]

    @property
    def rewards(self) -> list[float]:
        return [r.reward for r in self.responses]


@dataclass(frozen=True)
class GrpoDiagnostics:
    mean_ratio: float
    clip_fraction: float
    mean_kl: float


def advantages(rewards: list[float], normalize: bool = False) -> list[float]:
    """Reward minus group mean; optionally divided by the population std."""
    if len(rewards) < 2:
        raise GrpoError(f"advantages need at least 2 rewards, got {len(rewards)}")
    mean = math.fsum(rewards) / len(rewards)
    centered = [r - mean for r in rewards]
    if not normalize:
        return centered
    std = math.sqrt(math.fsum(c * c for c in centered) / len(centered))
    if std < ZERO_VARIANCE_EPS:
        return [0.0] * len(centered)
    return [c / std for c in centered]


def _check_prob(p: float, name: str) -> None:
    if not 0.0 < p <= 1.0:
        raise GrpoError(f"{name} must be in (0, 1], got {p}", code="bad_probability")


def token_ratio(p_theta: float, p_old: float) -> float:
    _check_prob(p_theta, "p_theta")
    _check_prob(p_old, "p_old")
    return p_theta / p_old


def kl_token(p_theta: float, p_ref: float) -> float:
    """k3 estimator r - ln r - 1 with r = p_ref / p_theta; nonnegative."""
    _check_prob(p_theta, "p_theta")
    _check_prob(p_ref, "p_ref")
    r = p_ref / p_theta
    return max(0.0, r - math.log(r) - 1.0)


def grpo_objective(group: RolloutGroup, cfg: GrpoConfig | None = None) -> tuple[float, GrpoDiagnostics]:
    """Negated clipped-surrogate value, averaged per token then per response."""
    cfg = cfg or GrpoConfig()
    advs = advantages(group.rewards, cfg.normalize_advantage)
    lo, hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps

    response_means: list[float] = []
    all_ratios: list[float] = []
    all_kls: list[float] = []
    n_clipped = 0
    for resp, adv in zip(group.responses, advs):
        terms = []
        for pt, po, pr in zip(resp.p_theta, resp.p_old, resp.p_ref):
            ratio = token_ratio(pt, po)
            kl = kl_token(pt, pr)
            clipped = min(max(ratio, lo), hi)
            terms.append(min(ratio * adv, clipped * adv) - cfg.kl_beta * kl)
            all_ratios.append(ratio)
            all_kls.append(kl)
            if ratio < lo or ratio > hi:
                n_clipped += 1
        response_means.append(math.fsum(terms) / len(terms))
    loss = -math.fsum(response_means) / len(response_means)
    diags = GrpoDiagnostics(
        mean_ratio=math.fsum(all_ratios) / len(all_ratios),
        clip_fraction=n_clipped / len(all_ratios),
        mean_kl=math.fsum(all_kls) / len(all_kls),
    )
    return loss, diags


def sequence_nll(token_probs: Iterable[float]) -> float:
    """Mean negative log probability over a token sequence."""
    probs = list(token_probs)
    if not probs:
        raise GrpoError("sequence_nll needs a non-empty sequence")
    for p in probs:
        _check_prob(p, "token probability")
    return -math.fsum(math.log(p) for p in probs) / len(probs)


def read_rollout_groups(path: str | Path) -> Iterator[RolloutGroup]:
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise GrpoError(f"cannot read rollout file {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                responses = tuple(
                    RolloutResponse(
                        reward=float(r["reward"]),
                        p_theta=tuple(float(x) for x in r["p_theta"]),
                        p_old=tuple(float(x) for x in r["p_old"]),
                        p_ref=tuple(float(x) for x in r["p_ref"]),
                    )
                    for r in doc["responses"]
                )
                yield RolloutGroup(query_id=str(doc["query_id"]), responses=responses)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise GrpoError(f"{path}: line {lineno}: malformed rollout group: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    """Objective values for rollout-group JSONL, one result object per line."""
    parser = argparse.ArgumentParser(
        prog="python -m emocal.grpo", description=main.__doc__
    )
    parser.add_argument("rollouts", help="rollout-group JSONL file")
    parser.add_argument("--clip-eps", type=float, default=0.2)
    parser.add_argument("--kl-beta", type=float, default=0.01)
    parser.add_argument("--normalize-adv", action="store_true")
    parser.add_argument("-o", "--output", default=None)
    args = parser.parse_args(argv)

    cfg = GrpoConfig(
        clip_eps=args.clip_eps, kl_beta=args.kl_beta, normalize_advantage=args.normalize_adv
    )
    lines = []
    try:
        for group in read_rollout_groups(args.rollouts):
            loss, diags = grpo_objective(group, cfg)
            lines.append(
                json.dumps(
                    {
                        "query_id": group.query_id,
                        "loss": loss,
                        "advantages": advantages(group.rewards, cfg.normalize_advantage),
                        "mean_ratio": diags.mean_ratio,
                        "clip_fraction": diags.clip_fraction,
                        "mean_kl": diags.mean_kl,
                    },
                    ensure_ascii=False,
                )
            )
    except EmocalError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), file=sys.stderr)
        return 1
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
