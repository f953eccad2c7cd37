from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from config import (
    DEFAULT_WEIGHTS,
    MAX_STEPS,
    SPHERE_RADIUS,
    VQF_SUFFIX,
    get_logger,
)
from services.viewsphere import ViewpointGrid, reachable_set
from utils.errors import GridMismatchError, InvalidParameterError, ProviderError, ViewQualityError

logger = get_logger("optimizer")


@dataclass(frozen=True, eq=False)
class ScoreField:
    """One scalar per grid viewpoint, shaped (n_pol, n_az)"""

    grid: ViewpointGrid
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != self.grid.shape:
            raise InvalidParameterError(f"Score field shape {scores.shape} does not match grid {self.grid.shape}")
        if not np.isfinite(scores).all():
            index = int(np.flatnonzero(~np.isfinite(scores.ravel()))[0])
            raise InvalidParameterError(f"Score field holds a non-finite value at viewpoint {index}")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def flat(self) -> np.ndarray:
        """Scores in linear-index order"""
        return self.scores.ravel()

    def __getitem__(self, index: int) -> float:
        return float(self.flat[index])


def normalize_weights(weights) -> tuple[float, float, float]:
    """Validate channel weights and scale them to sum to 1"""
    weights = tuple(float(w) for w in weights)
    if len(weights) != 3:
        raise InvalidParameterError(f"--weights needs 3 values, got {len(weights)}")
    if any(not math.isfinite(w) or w < 0 for w in weights):
        raise InvalidParameterError(f"--weights must be finite and >= 0, got {weights}")
    total = sum(weights)
    if total <= 0:
        raise InvalidParameterError("--weights must not all be zero")
    return weights[0] / total, weights[1] / total, weights[2] / total


def combined_score(vqf, weights=DEFAULT_WEIGHTS) -> ScoreField:
    """
    Scalarize a VQF for the optimizer.

    Each channel is min-max normalized over the field (occlusion first turned
    into visible ratio 1 - R) and the three are mixed with the given weights.

    Args:
        vqf: VQF
        weights: (visible ratio, normal entropy, visual entropy) weights, >= 0

    Returns:
        ScoreField
    """
    # Import here to avoid circular imports
    from services.vqf import minmax_normalize

    w_vis, w_geo, w_img = normalize_weights(weights)
    scores = (
        w_vis * minmax_normalize(1.0 - vqf.channel("occlusion_ratio"))
        + w_geo * minmax_normalize(vqf.channel("normal_entropy"))
        + w_img * minmax_normalize(vqf.channel("visual_entropy"))
    )
    return ScoreField(vqf.grid, scores)


def best_viewpoint(field: ScoreField, prefer: int | None = None) -> int:
    """
    Argmax of a score field, ties broken by smallest linear index.

    Args:
        field: ScoreField
        prefer: Viewpoint that wins any tie it takes part in
    """
    flat = field.flat
    if prefer is not None and flat[prefer] >= flat.max():
        return int(prefer)
    return int(np.argmax(flat))


def next_viewpoint(field: ScoreField, current: int, reachable, prefer_current: bool = False) -> int:
    """
    One step of reachable-aware viewpoint optimization.

    Let g be the field's argmax. If g is reachable it is returned; otherwise
    the reachable viewpoint closest to g on the great circle, ties going to the
    higher score and then to the smaller index.

    Args:
        field: ScoreField
        current: Current viewpoint index
        reachable: Non-empty collection of reachable viewpoint indices
        prefer_current: Let current win argmax ties (waypoint mode)

    Returns:
        Candidate viewpoint index
    """
    reachable = sorted(int(i) for i in reachable)
    if not reachable:
        raise InvalidParameterError(f"No reachable viewpoint from {current}")

    goal = best_viewpoint(field, current if prefer_current else None)
    if goal in reachable:
        return goal

    distances = field.grid.distances[goal]
    flat = field.flat
    return min(reachable, key=lambda i: (distances[i], -flat[i], i))


def distance_weighted_score(
    field: ScoreField,
    grid: ViewpointGrid,
    agent_position,
    alpha: float,
    sphere_radius: float = SPHERE_RADIUS,
) -> ScoreField:
    """
    Penalize viewpoints by their distance from the agent.

    Viewpoints are reprojected onto a sphere of sphere_radius around the object
    and score_i - alpha * |agent - position_i| / (2 * sphere_radius) is returned.
    """
    if not alpha >= 0 or not math.isfinite(alpha):
        raise InvalidParameterError(f"--alpha must be >= 0, got {alpha}")
    if not sphere_radius > 0:
        raise InvalidParameterError(f"--sphere-radius must be > 0, got {sphere_radius}")
    if not grid.same_layout(field.grid):
        raise GridMismatchError("Score field and grid layouts differ")
    agent = np.asarray(agent_position, dtype=np.float64).reshape(3)
    if alpha == 0:
        return field

    positions = sphere_radius * grid.directions
    penalty = alpha * np.linalg.norm(positions - agent, axis=1) / (2.0 * sphere_radius)
    return ScoreField(field.grid, field.scores - penalty.reshape(grid.shape))


# ----- TRAJECTORIES -----


@dataclass(frozen=True)
class TrajectoryStep:
    viewpoint_index: int
    score: float  # at selection time


@dataclass
class Trajectory:
    grid: ViewpointGrid
    start: int
    steps: list[TrajectoryStep] = field(default_factory=list)
    converged: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def indices(self) -> list[int]:
        return [step.viewpoint_index for step in self.steps]

    @property
    def final(self) -> int:
        return self.steps[-1].viewpoint_index

    @property
    def moves(self) -> int:
        return len(self.steps) - 1

    def to_dict(self) -> dict:
        rows = []
        for number, step in enumerate(self.steps):
            viewpoint = self.grid[step.viewpoint_index]
            rows.append(
                {
                    "step": number,
                    "viewpoint_index": step.viewpoint_index,
                    "azimuth_deg": viewpoint.azimuth_deg,
                    "polar_deg": viewpoint.polar_deg,
                    "score": step.score,
                }
            )
        return {
            "start": self.start,
            "converged": self.converged,
            "grid": self.grid.to_dict(),
            "metadata": self.metadata,
            "steps": rows,
        }


class ExactOracleProvider:
    """Hands out the same ground-truth VQF at every step"""

    def __init__(self, vqf):
        self.vqf = vqf

    @property
    def grid(self) -> ViewpointGrid:
        return self.vqf.grid

    def vqf_for_step(self, step: int, current: int):
        return self.vqf


class FileSequenceProvider:
    """
    Hands out the k-th VQF file at step k.

    Models an external estimator that re-predicts the field from the latest
    view. Running past the end of the sequence is a ProviderError.
    """

    def __init__(self, paths):
        self.paths = list(paths)
        if not self.paths:
            raise ProviderError("VQF sequence is empty")
        self._cache = {}
        self._grid = self.vqf_for_step(0, -1).grid

    @classmethod
    def from_directory(cls, directory: str) -> FileSequenceProvider:
        if not os.path.isdir(directory):
            raise ProviderError(f"VQF sequence directory not found: {directory}")
        names = sorted(name for name in os.listdir(directory) if name.endswith(VQF_SUFFIX))
        return cls(os.path.join(directory, name) for name in names)

    @property
    def grid(self) -> ViewpointGrid:
        return self._grid

    def vqf_for_step(self, step: int, current: int):
        # Import here to avoid circular imports
        from services.vqf import load_vqf

        if step >= len(self.paths):
            raise ProviderError(f"No VQF estimate for step {step} ({len(self.paths)} files in sequence)")
        if step not in self._cache:
            path = self.paths[step]
            try:
                vqf = load_vqf(path)
            except ViewQualityError as e:
                raise ProviderError(f"Step {step}: {e}") from e
            if step > 0 and not vqf.grid.same_layout(self._grid):
                raise GridMismatchError(f"{path} uses a different grid than the first estimate")
            self._cache[step] = vqf
            logger.debug(f"OPTIMIZER: Step {step} uses estimate {path}")
        return self._cache[step]


def run_trajectory(
    provider,
    start: int,
    step_radius: float,
    max_steps: int = MAX_STEPS,
    weights=DEFAULT_WEIGHTS,
    alpha: float = 0.0,
    agent_position=None,
    sphere_radius: float = SPHERE_RADIUS,
) -> Trajectory:
    """
    Reachable-aware progressive viewpoint optimization.

    Every round asks the provider for the current VQF, scores it and proposes
    next_viewpoint over the viewpoints within step_radius. The run halts
    (converged) when the proposal is not strictly closer to the field's argmax
    than the current viewpoint, or stops after max_steps moves.

    With alpha > 0 every round's field is distance weighted around the agent,
    which starts at agent_position (default: the start viewpoint) and then
    sits at the latest waypoint reprojected to sphere_radius.

    Args:
        provider: ExactOracleProvider or FileSequenceProvider
        start: Start viewpoint index
        step_radius: Reachability radius in great-circle radians
        max_steps: Maximum number of moves (>= 1)
        weights: Channel weights for combined_score
        alpha: Distance penalty weight (0 disables waypoint mode)
        agent_position: Initial agent position in meters
        sphere_radius: Radius the viewpoints are reprojected to

    Returns:
        Trajectory
    """
    grid = provider.grid
    if int(max_steps) != max_steps or max_steps < 1:
        raise InvalidParameterError(f"--max-steps must be an integer >= 1, got {max_steps}")
    if not 0 <= start < len(grid):
        raise InvalidParameterError(f"--start {start} out of range [0, {len(grid)})")
    if not step_radius >= 0:
        raise InvalidParameterError(f"--step-radius-deg must be >= 0, got {step_radius}")

    weighted = alpha > 0
    agent = (
        np.asarray(agent_position, dtype=np.float64)
        if agent_position is not None
        else sphere_radius * grid[start].direction
    )
    trajectory = Trajectory(
        grid,
        start,
        metadata={
            "step_radius_deg": math.degrees(step_radius),
            "max_steps": int(max_steps),
            "weights": list(normalize_weights(weights)),
            "alpha": float(alpha),
            "sphere_radius": float(sphere_radius),
        },
    )

    current = start
    for step in range(int(max_steps)):
        vqf = provider.vqf_for_step(step, current)
        if not vqf.grid.same_layout(grid):
            raise GridMismatchError(f"Step {step} VQF grid differs from the trajectory grid")
        score_field = combined_score(vqf, weights)
        if weighted:
            score_field = distance_weighted_score(score_field, grid, agent, alpha, sphere_radius)
        if step == 0:
            trajectory.steps.append(TrajectoryStep(current, score_field[current]))

        candidate = next_viewpoint(
            score_field, current, reachable_set(grid, current, step_radius), prefer_current=weighted
        )
        goal = best_viewpoint(score_field, current if weighted else None)
        distances = grid.distances[goal]
        if candidate == current or distances[candidate] >= distances[current]:
            trajectory.converged = True
            break

        trajectory.steps.append(TrajectoryStep(candidate, score_field[candidate]))
        logger.debug(f"OPTIMIZER: Step {step + 1}: {current} -> {candidate} (goal {goal})")
        current = candidate
        agent = sphere_radius * grid[current].direction

    logger.info(
        f"OPTIMIZER: Trajectory from {start} ended at {current} after {trajectory.moves} move(s), "
        f"converged={trajectory.converged}"
    )
    return trajectory
