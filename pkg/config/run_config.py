"""
Effective configuration of one command invocation.

Global CLI flags fall back to the values in config.settings; validate() checks
every flag before any work starts and to_dict() is embedded in output files.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from config.settings import (
    ALPHA,
    DEFAULT_WEIGHTS,
    FOV_DEG,
    GRAY_BINS,
    GRID_AZ,
    GRID_POL,
    GRID_RADIUS,
    MAX_STEPS,
    NORMAL_BINS,
    RESOLUTION,
    SAMPLES_PER_FACE,
    SEED,
    SPHERE_RADIUS,
    STEP_RADIUS_DEG,
    THREADS,
)
from utils.errors import ConfigError, InvalidParameterError


def parse_bins(text: str) -> tuple[int, int]:
    """Parse a polar x azimuth bin spec such as '8x32'"""
    parts = str(text).lower().split("x")
    try:
        polar, azimuth = (int(part) for part in parts)
    except ValueError:
        raise InvalidParameterError(f"--normal-bins must look like '8x32', got '{text}'")
    if polar < 1 or azimuth < 1 or polar * azimuth < 2:
        raise InvalidParameterError(f"--normal-bins needs positive counts and at least 2 bins, got '{text}'")
    return polar, azimuth


def parse_floats(text: str, count: int, flag: str) -> tuple[float, ...]:
    """Parse a comma-separated list of exactly `count` floats"""
    try:
        values = tuple(float(part) for part in str(text).split(","))
    except ValueError:
        raise InvalidParameterError(f"{flag} must be {count} comma-separated numbers, got '{text}'")
    if len(values) != count:
        raise InvalidParameterError(f"{flag} needs {count} values, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError(f"{flag} values must be finite, got '{text}'")
    return values


@dataclass(frozen=True)
class RunConfig:
    grid_az: int = GRID_AZ
    grid_pol: int = GRID_POL
    radius: float = GRID_RADIUS
    fov_deg: float = FOV_DEG
    resolution: int = RESOLUTION
    samples_per_face: int = SAMPLES_PER_FACE
    normal_bins: str = NORMAL_BINS
    gray_bins: int = GRAY_BINS
    weights: tuple = field(default=DEFAULT_WEIGHTS)
    step_radius_deg: float = STEP_RADIUS_DEG
    max_steps: int = MAX_STEPS
    alpha: float = ALPHA
    sphere_radius: float = SPHERE_RADIUS
    threads: int = THREADS
    seed: int = SEED

    @classmethod
    def from_args(cls, args) -> RunConfig:
        """Build from an argparse namespace; flags left unset keep their defaults"""
        values = {}
        for name in cls.__dataclass_fields__:
            value = getattr(args, name, None)
            if value is not None:
                values[name] = value
        if isinstance(values.get("weights"), str):
            values["weights"] = parse_floats(values["weights"], 3, "--weights")
        return cls(**values)

    def validate(self) -> RunConfig:
        """
        Check every flag, raising ConfigError naming the first bad one.

        Returns:
            self, for chaining
        """
        # Import here to avoid circular imports
        from services.optimizer import normalize_weights
        from services.render import MIN_RESOLUTION

        self.grid()
        self.metric_params()
        if int(self.resolution) != self.resolution or self.resolution < MIN_RESOLUTION:
            raise InvalidParameterError(f"--res must be an integer >= {MIN_RESOLUTION}, got {self.resolution}")
        normalize_weights(self.weights)
        if not 0 <= self.step_radius_deg:
            raise InvalidParameterError(f"--step-radius-deg must be >= 0, got {self.step_radius_deg}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise InvalidParameterError(f"--max-steps must be an integer >= 1, got {self.max_steps}")
        if not self.alpha >= 0:
            raise InvalidParameterError(f"--alpha must be >= 0, got {self.alpha}")
        if not self.sphere_radius > 0:
            raise InvalidParameterError(f"--sphere-radius must be > 0, got {self.sphere_radius}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise InvalidParameterError(f"--threads must be an integer >= 1, got {self.threads}")
        if int(self.seed) != self.seed:
            raise InvalidParameterError(f"--seed must be an integer, got {self.seed}")
        return self

    def grid(self):
        # Import here to avoid circular imports
        from services.viewsphere import make_grid

        return make_grid(self.grid_az, self.grid_pol, self.radius, self.fov_deg)

    def metric_params(self):
        # Import here to avoid circular imports
        from services.metrics import MetricParams

        polar, azimuth = parse_bins(self.normal_bins)
        try:
            return MetricParams(
                normal_bins_polar=polar,
                normal_bins_azimuth=azimuth,
                gray_bins=int(self.gray_bins),
                samples_per_face=int(self.samples_per_face),
            )
        except ConfigError as e:
            raise InvalidParameterError(f"--gray-bins/--samples-per-face: {e}") from e

    @property
    def step_radius(self) -> float:
        return math.radians(self.step_radius_deg)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["weights"] = list(self.weights)
        # outputs must not depend on the worker count
        data.pop("threads")
        return data
