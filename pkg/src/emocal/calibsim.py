"""Desk-scale replay of confidence-calibration training dynamics.

A categorical softmax policy over a fixed confidence grid stands in for a
model's verbalized-confidence head. Each step samples a group of
(correctness, confidence) rollouts, scores them with the reward module,
turns rewards into group advantages, and nudges the sampled grid cells'
scores by ``learning_rate * advantage``. Correctness is drawn independently
at ``true_accuracy``, so a calibrated policy concentrates near that value.

Running the log-likelihood reward without advantage normalization settles
near the accuracy; the Brier reward with standard normalization drifts
toward high confidence, because normalization blows up the tiny reward gaps
of near-uniform groups. The simulator is deterministic under its seed.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmocalError
from .grpo import advantages
from .metrics import bin_index
from .reward import reward_conf

DEFAULT_GRID = tuple((2 * i + 1) / 20 for i in range(10))  # 0.05, 0.15, ..., 0.95


class SimError(EmocalError):
    code = "calibsim"


@dataclass(frozen=True)
class SimConfig:
    steps: int = 2000
    group_size: int = 4
    seed: int = 44
    true_accuracy: float = 0.55
    reward_variant: str = "log_likelihood"
    normalize_advantage: bool = False
    learning_rate: float = 0.2
    confidence_grid: tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self):
        if self.steps < 0 or self.group_size < 2:
            raise SimError("steps must be >= 0 and group_size >= 2")
        if not 0.0 < self.true_accuracy < 1.0:
            raise SimError(f"true_accuracy must be in (0, 1), got {self.true_accuracy}")
        if self.learning_rate < 0:
            raise SimError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if not self.confidence_grid or any(not 0.0 < c < 1.0 for c in self.confidence_grid):
            raise SimError("confidence_grid values must lie strictly inside (0, 1)")


@dataclass
class SimTrajectory:
    config: SimConfig
    mean_confidence: list[float] = field(default_factory=list)
    ece: list[float] = field(default_factory=list)
    distributions: list[tuple[float, ...]] = field(default_factory=list)

    @property
    def final_mean_confidence(self) -> float:
        return self.mean_confidence[-1] if self.mean_confidence else self.initial_mean()

    @property
    def final_distribution(self) -> tuple[float, ...]:
        if self.distributions:
            return self.distributions[-1]
        k = len(self.config.confidence_grid)
        return tuple(1.0 / k for _ in range(k))

    def initial_mean(self) -> float:
        grid = self.config.confidence_grid
        return math.fsum(grid) / len(grid)


def _softmax(scores: list[float]) -> list[float]:
    peak = max(scores)
    exps = [math.exp(s - peak) for s in scores]
    total = math.fsum(exps)
    return [e / total for e in exps]


def policy_mean_confidence(dist: list[float], grid: tuple[float, ...]) -> float:
    return math.fsum(p * c for p, c in zip(dist, grid))


def policy_ece(dist: list[float], grid: tuple[float, ...], accuracy: float) -> float:
    """Population ECE of the policy: grid cells binned, empirical acc -> accuracy."""
    bin_mass = [0.0] * 10
    bin_conf = [0.0] * 10
    for p, c in zip(dist, grid):
        b = bin_index(c)
        bin_mass[b] += p
        bin_conf[b] += p * c
    return math.fsum(
        mass * abs(conf / mass - accuracy) for mass, conf in zip(bin_mass, bin_conf) if mass > 0
    )


def run_sim(cfg: SimConfig) -> SimTrajectory:
    """Run the feedback loop; records the post-update policy at every step."""
    grid = cfg.confidence_grid
    k = len(grid)
    scores = [0.0] * k
    rng = random.Random(cfg.seed)
    traj = SimTrajectory(config=cfg)

    for _ in range(cfg.steps):
        dist = _softmax(scores)
        cells = rng.choices(range(k), weights=dist, k=cfg.group_size)
        corrects = [rng.random() < cfg.true_accuracy for _ in range(cfg.group_size)]
        rewards = [
            1.0  # simulated responses are always well-formed
            + (1.0 if ok else 0.0)
            + reward_conf(ok, grid[cell], cfg.reward_variant)
            for cell, ok in zip(cells, corrects)
        ]
        advs = advantages(rewards, cfg.normalize_advantage)
        for cell, adv in zip(cells, advs):
            scores[cell] += cfg.learning_rate * adv

        dist = _softmax(scores)
        traj.distributions.append(tuple(dist))
        traj.mean_confidence.append(policy_mean_confidence(dist, grid))
        traj.ece.append(policy_ece(dist, grid, cfg.true_accuracy))
    return traj


def trajectory_to_csv(traj: SimTrajectory) -> str:
    """CSV of step, mean_confidence, ece; values keep full float precision."""
    out = io.StringIO(newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["step", "mean_confidence", "ece"])
    for step, (mean_c, e) in enumerate(zip(traj.mean_confidence, traj.ece), start=1):
        writer.writerow([step, repr(mean_c), repr(e)])
    return out.getvalue()


def export_trajectory(traj: SimTrajectory, path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(trajectory_to_csv(traj))
    except OSError as exc:
        raise SimError(f"cannot write trajectory to {path}: {exc}") from exc


def read_trajectory(path: str | Path) -> list[tuple[int, float, float]]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != ["step", "mean_confidence", "ece"]:
            raise SimError(f"{path}: unexpected CSV header {header!r}")
        return [(int(row[0]), float(row[1]), float(row[2])) for row in reader]
