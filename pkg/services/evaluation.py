from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from config import DEFAULT_WEIGHTS, STEP_RADIUS_DEG, get_logger
from services.optimizer import ExactOracleProvider, combined_score, run_trajectory
from utils.errors import InvalidParameterError

logger = get_logger("evaluation")


@dataclass(frozen=True)
class RoundStats:
    round: int
    visible_ratio: float
    normal_entropy: float
    visual_entropy: float
    combined_score: float

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "visible_ratio": self.visible_ratio,
            "normal_entropy": self.normal_entropy,
            "visual_entropy": self.visual_entropy,
            "combined_score": self.combined_score,
        }


@dataclass
class ProgressionReport:
    rounds: list[RoundStats] = field(default_factory=list)
    runs: int = 0
    visible_not_worse: int = 0  # runs whose final visible ratio >= initial

    @property
    def visible_not_worse_fraction(self) -> float:
        return self.visible_not_worse / self.runs if self.runs else 0.0

    def table(self) -> str:
        lines = [f"{'round':>5}  {'visible':>8}  {'H_geo':>8}  {'H_vis':>8}  {'score':>8}"]
        for stats in self.rounds:
            lines.append(
                f"{stats.round:>5}  {stats.visible_ratio:8.4f}  {stats.normal_entropy:8.4f}  "
                f"{stats.visual_entropy:8.4f}  {stats.combined_score:8.4f}"
            )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "visible_not_worse_fraction": self.visible_not_worse_fraction,
            "rounds": [stats.to_dict() for stats in self.rounds],
        }


def evaluate_progression(
    vqfs,
    rounds: int = 9,
    starts_per_mesh: int = 10,
    seed: int = 0,
    step_radius: float = math.radians(STEP_RADIUS_DEG),
    weights=DEFAULT_WEIGHTS,
) -> ProgressionReport:
    """
    Mean viewpoint quality per optimization round over many seeded runs.

    Every VQF gets starts_per_mesh random start viewpoints; each run follows
    the exact-oracle optimizer for `rounds` rounds and stays at its fixed
    point once converged.

    Returns:
        ProgressionReport with rounds 0 (start) .. rounds
    """
    vqfs = list(vqfs)
    if not vqfs:
        raise InvalidParameterError("evaluate_progression needs at least one VQF")
    if rounds < 1 or starts_per_mesh < 1:
        raise InvalidParameterError(f"--rounds and --starts must be >= 1, got {rounds}, {starts_per_mesh}")

    rng = np.random.default_rng(seed)
    # (runs, rounds + 1, 4): visible, H_geo, H_vis, combined
    samples = []
    for vqf in vqfs:
        flat = vqf.values.reshape(-1, 3)
        scores = combined_score(vqf, weights).flat
        provider = ExactOracleProvider(vqf)
        for start in rng.integers(0, len(vqf.grid), size=starts_per_mesh):
            trajectory = run_trajectory(provider, int(start), step_radius, rounds, weights)
            path = trajectory.indices + [trajectory.final] * (rounds + 1 - len(trajectory.steps))
            samples.append(
                [[1.0 - flat[i, 0], flat[i, 1], flat[i, 2], scores[i]] for i in path]
            )

    samples = np.asarray(samples)
    means = samples.mean(axis=0)
    report = ProgressionReport(
        rounds=[RoundStats(r, *(float(x) for x in means[r])) for r in range(rounds + 1)],
        runs=len(samples),
        visible_not_worse=int(np.count_nonzero(samples[:, -1, 0] >= samples[:, 0, 0] - 1e-12)),
    )
    logger.info(
        f"EVALUATION: {report.runs} runs over {len(vqfs)} fields, mean score "
        f"{report.rounds[0].combined_score:.4f} -> {report.rounds[-1].combined_score:.4f}"
    )
    return report
