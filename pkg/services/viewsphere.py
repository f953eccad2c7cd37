from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from config import FOV_DEG, GRID_AZ, GRID_POL, GRID_RADIUS, get_logger
from utils.errors import InvalidGridError, InvalidParameterError

logger = get_logger("viewsphere")

WORLD_UP = np.array([0.0, 0.0, 1.0])
SNAP_EPS = 1e-12


@dataclass(frozen=True)
class Viewpoint:
    index: int
    azimuth_index: int
    polar_index: int
    azimuth: float  # radians in [0, 2pi)
    polar: float  # radians in (0, pi)
    radius: float

    @property
    def direction(self) -> np.ndarray:
        """Unit vector from the origin toward the viewpoint"""
        direction = np.array(
            [
                math.sin(self.polar) * math.cos(self.azimuth),
                math.sin(self.polar) * math.sin(self.azimuth),
                math.cos(self.polar),
            ]
        )
        # cos(pi/2) comes out near 6e-17, not 0
        return np.where(np.abs(direction) < SNAP_EPS, 0.0, direction)

    @property
    def position(self) -> np.ndarray:
        return self.radius * self.direction

    @property
    def azimuth_deg(self) -> float:
        return math.degrees(self.azimuth)

    @property
    def polar_deg(self) -> float:
        return math.degrees(self.polar)


@dataclass(frozen=True, eq=False)
class CameraPose:
    position: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    right: np.ndarray
    vertical_fov: float  # radians


@dataclass(frozen=True, eq=False)
class ViewpointGrid:
    """
    Spherical camera grid: n_az azimuths x n_pol polar rings, poles excluded.

    Linear viewpoint index = polar_index * n_az + azimuth_index.
    """

    n_az: int
    n_pol: int
    radius: float
    fov_deg: float = FOV_DEG
    viewpoints: tuple = field(default=(), repr=False)

    def __len__(self) -> int:
        return len(self.viewpoints)

    def __getitem__(self, index: int) -> Viewpoint:
        return self.viewpoints[index]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_pol, self.n_az

    @property
    def vertical_fov(self) -> float:
        return math.radians(self.fov_deg)

    @cached_property
    def directions(self) -> np.ndarray:
        """(N, 3) unit vectors in linear-index order"""
        return np.array([vp.direction for vp in self.viewpoints])

    @cached_property
    def positions(self) -> np.ndarray:
        return self.radius * self.directions

    @cached_property
    def distances(self) -> np.ndarray:
        """(N, N) great-circle angles between viewpoints"""
        cosines = np.clip(self.directions @ self.directions.T, -1.0, 1.0)
        return np.arccos(cosines)

    def index_of(self, polar_index: int, azimuth_index: int) -> int:
        return polar_index * self.n_az + azimuth_index

    def same_layout(self, other: ViewpointGrid) -> bool:
        return (
            self.n_az == other.n_az
            and self.n_pol == other.n_pol
            and math.isclose(self.radius, other.radius, rel_tol=1e-12)
            and math.isclose(self.fov_deg, other.fov_deg, rel_tol=1e-12)
        )

    def to_dict(self) -> dict:
        return {
            "n_az": self.n_az,
            "n_pol": self.n_pol,
            "radius": self.radius,
            "fov_deg": self.fov_deg,
        }


def make_grid(
    n_az: int = GRID_AZ,
    n_pol: int = GRID_POL,
    radius: float = GRID_RADIUS,
    fov_deg: float = FOV_DEG,
) -> ViewpointGrid:
    """
    Build the viewpoint grid.

    Azimuths are 2*pi*k/n_az and polar angles pi*(j+1)/(n_pol+1), so the
    defaults give 132 viewpoints at 15..165 degrees polar in 15 degree steps.

    Args:
        n_az: Number of azimuth samples (>= 2)
        n_pol: Number of polar rings (>= 1)
        radius: Camera distance in normalized units (> 1)
        fov_deg: Vertical field of view of every camera

    Returns:
        ViewpointGrid
    """
    if int(n_az) != n_az or n_az < 2:
        raise InvalidGridError(f"--grid-az must be an integer >= 2, got {n_az}")
    if int(n_pol) != n_pol or n_pol < 1:
        raise InvalidGridError(f"--grid-pol must be an integer >= 1, got {n_pol}")
    if not radius > 1.0:
        raise InvalidGridError(f"--radius must be > 1 (outside the unit bounding sphere), got {radius}")
    if not 0.0 < fov_deg < 180.0:
        raise InvalidGridError(f"--fov-deg must be in (0, 180), got {fov_deg}")

    n_az, n_pol = int(n_az), int(n_pol)
    viewpoints = []
    for polar_index in range(n_pol):
        polar = math.pi * (polar_index + 1) / (n_pol + 1)
        for azimuth_index in range(n_az):
            viewpoints.append(
                Viewpoint(
                    index=polar_index * n_az + azimuth_index,
                    azimuth_index=azimuth_index,
                    polar_index=polar_index,
                    azimuth=2.0 * math.pi * azimuth_index / n_az,
                    polar=polar,
                    radius=float(radius),
                )
            )
    return ViewpointGrid(n_az, n_pol, float(radius), float(fov_deg), tuple(viewpoints))


def look_at(position, vertical_fov: float) -> CameraPose:
    """
    Camera at position looking at the origin, roll fixed by world +z.

    Args:
        position: Camera center
        vertical_fov: Vertical field of view in radians

    Returns:
        CameraPose with an orthonormal (forward, up, right) triad
    """
    position = np.asarray(position, dtype=np.float64)
    distance = float(np.linalg.norm(position))
    if distance == 0.0:
        raise InvalidParameterError("Camera cannot sit at the object center")
    forward = -position / distance
    up = WORLD_UP - (WORLD_UP @ forward) * forward
    length = float(np.linalg.norm(up))
    if length < 1e-9:
        raise InvalidParameterError(f"Camera at {position.tolist()} looks along world up; roll is undefined")
    up = up / length
    right = np.cross(forward, up)
    return CameraPose(position, forward, up, right, float(vertical_fov))


def camera_pose(grid: ViewpointGrid, index: int) -> CameraPose:
    """Camera pose of a grid viewpoint"""
    if not 0 <= index < len(grid):
        raise InvalidParameterError(f"Viewpoint index {index} out of range [0, {len(grid)})")
    return look_at(grid[index].position, grid.vertical_fov)


def geodesic_distance(a: Viewpoint, b: Viewpoint) -> float:
    """Great-circle angle between two viewpoints, in radians"""
    return math.acos(max(-1.0, min(1.0, float(a.direction @ b.direction))))


def reachable_set(grid: ViewpointGrid, current: int, step_radius: float) -> frozenset[int]:
    """
    Viewpoints within step_radius (great-circle radians) of current.

    The current viewpoint is excluded unless nothing else is reachable, in
    which case the set is {current}.
    """
    if step_radius < 0:
        raise InvalidParameterError(f"step_radius must be >= 0, got {step_radius}")
    within = np.flatnonzero(grid.distances[current] <= step_radius + 1e-12)
    reachable = frozenset(int(i) for i in within if i != current)
    return reachable or frozenset([current])
