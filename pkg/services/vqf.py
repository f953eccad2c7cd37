from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from config import (
    DEFAULT_WEIGHTS,
    LOSS_LAMBDAS,
    RESOLUTION,
    SILOG_EPSILON,
    SILOG_LAMBDA,
    SSIM_C1,
    SSIM_C2,
    VQF_CHANNELS,
    VQF_SCHEMA_VERSION,
    get_logger,
)
from services.metrics import (
    MetricParams,
    QualityVector,
    normal_entropy,
    self_occlusion_ratio,
    visual_entropy,
)
from services.raycast import build_accel, face_visibility
from services.render import GrayImage, render_grayscale
from services.viewsphere import ViewpointGrid, camera_pose, make_grid
from services.worker_pool import run_parallel
from utils.errors import (
    ConfigError,
    GridMismatchError,
    InvalidParameterError,
    VQFSchemaError,
    VQFShapeError,
    VQFValueError,
)
from utils.storage import read_json, write_json

logger = get_logger("vqf")

HEATMAP_CHANNELS = ("occlusion", "normal_entropy", "visual_entropy", "combined")
VALUE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class VQF:
    """
    Viewpoint quality field: one (occlusion ratio, normal entropy, visual entropy)
    vector per grid viewpoint, stored as an (n_pol, n_az, 3) array.
    """

    grid: ViewpointGrid
    params: MetricParams
    mesh_id: str
    values: np.ndarray
    resolution: int = RESOLUTION
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_pol, self.grid.n_az, 3):
            raise VQFShapeError(
                f"VQF values have shape {values.shape}, grid needs "
                f"({self.grid.n_pol}, {self.grid.n_az}, 3)"
            )
        _validate_values(values.reshape(-1, 3), self.params)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VQF):
            return NotImplemented
        return (
            self.mesh_id == other.mesh_id
            and self.grid.to_dict() == other.grid.to_dict()
            and self.params == other.params
            and self.resolution == other.resolution
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def channel(self, name: str) -> np.ndarray:
        """(n_pol, n_az) array of one raw channel"""
        if name not in VQF_CHANNELS:
            raise InvalidParameterError(f"Unknown VQF channel '{name}', expected one of {VQF_CHANNELS}")
        return self.values[:, :, VQF_CHANNELS.index(name)]

    def quality(self, index: int) -> QualityVector:
        row = self.values.reshape(-1, 3)[index]
        return QualityVector(float(row[0]), float(row[1]), float(row[2]))

    def normalized(self) -> np.ndarray:
        """Values scaled to [0, 1]: entropies divided by their theoretical maxima"""
        scale = np.array([1.0, self.params.max_normal_entropy, self.params.max_visual_entropy])
        return self.values / scale

    def with_values(self, values, mesh_id: str | None = None) -> VQF:
        return VQF(self.grid, self.params, mesh_id or self.mesh_id, values, self.resolution, dict(self.config))

    def to_dict(self) -> dict:
        data = {
            "schema_version": VQF_SCHEMA_VERSION,
            "mesh_id": self.mesh_id,
            "grid": self.grid.to_dict(),
            "params": self.params.to_dict(),
            "render": {"resolution": self.resolution, "shading": "headlight-lambertian"},
            "channels": list(VQF_CHANNELS),
            "conventions": {
                "index_order": "polar_index * n_az + azimuth_index",
                "entropy_log_base": 2,
                "silog_log_base": "e",
            },
        }
        if self.config:
            data["config"] = self.config
        data["values"] = [[float(x) for x in row] for row in self.values.reshape(-1, 3)]
        return data

    @classmethod
    def from_dict(cls, data: dict, source: str = "<memory>") -> VQF:
        version = data.get("schema_version")
        if version != VQF_SCHEMA_VERSION:
            raise VQFSchemaError(
                f"{source}: schema_version {version!r} is not supported (expected {VQF_SCHEMA_VERSION})"
            )
        if list(data.get("channels", [])) != list(VQF_CHANNELS):
            raise VQFSchemaError(f"{source}: channels must be {list(VQF_CHANNELS)}")

        try:
            grid_spec = data["grid"]
            grid = make_grid(
                int(grid_spec["n_az"]),
                int(grid_spec["n_pol"]),
                float(grid_spec["radius"]),
                float(grid_spec["fov_deg"]),
            )
            params = MetricParams.from_dict(data["params"])
            resolution = int(data.get("render", {}).get("resolution", RESOLUTION))
            entries = data["values"]
        except (KeyError, TypeError, ValueError, ConfigError) as e:
            raise VQFSchemaError(f"{source}: malformed header: {e}") from e

        if not isinstance(entries, list) or len(entries) != len(grid):
            count = len(entries) if isinstance(entries, list) else "no"
            raise VQFShapeError(f"{source}: {count} entries for a {len(grid)}-viewpoint grid")
        for index, entry in enumerate(entries):
            if not isinstance(entry, list) or len(entry) != 3:
                raise VQFShapeError(f"{source}: viewpoint {index} must hold 3 values")

        try:
            values = np.array(entries, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise VQFValueError(f"{source}: non-numeric value: {e}") from e

        try:
            return cls(
                grid,
                params,
                str(data.get("mesh_id", "")),
                values.reshape(grid.n_pol, grid.n_az, 3),
                resolution,
                dict(data.get("config", {})),
            )
        except VQFValueError as e:
            raise VQFValueError(f"{source}: {e}") from e


def _validate_values(rows: np.ndarray, params: MetricParams) -> None:
    finite = np.isfinite(rows).all(axis=1)
    if not finite.all():
        index = int(np.flatnonzero(~finite)[0])
        raise VQFValueError(f"viewpoint {index} holds a non-finite value {rows[index].tolist()}")

    upper = np.array([1.0, params.max_normal_entropy, params.max_visual_entropy]) + VALUE_TOLERANCE
    bad = ((rows < -VALUE_TOLERANCE) | (rows > upper)).any(axis=1)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise VQFValueError(f"viewpoint {index} is out of range: {rows[index].tolist()}")


# ----- COMPUTATION -----


def evaluate_viewpoint(accel, mesh, camera, params: MetricParams, resolution: int = RESOLUTION):
    """
    All three quality metrics for one camera pose.

    Returns:
        (QualityVector, GrayImage, Mask)
    """
    report = face_visibility(accel, mesh, camera, params.samples_per_face)
    image, mask = render_grayscale(accel, mesh, camera, resolution, resolution)
    quality = QualityVector(
        occlusion_ratio=self_occlusion_ratio(report, mesh),
        normal_entropy=normal_entropy(report, mesh, camera, params),
        visual_entropy=visual_entropy(image, mask, params),
    )
    return quality, image, mask


def compute_vqf(
    mesh,
    grid: ViewpointGrid,
    params: MetricParams,
    resolution: int = RESOLUTION,
    threads: int = 1,
    view_sink=None,
    config: dict | None = None,
) -> VQF:
    """
    Evaluate the three metrics at every grid viewpoint.

    Args:
        mesh: Normalized TriangleMesh
        grid: ViewpointGrid
        params: MetricParams
        resolution: Square render resolution used for visual entropy
        threads: Worker threads; the result does not depend on it
        view_sink: Optional callable (index, image, mask) receiving every render
        config: Effective configuration embedded in the VQF file

    Returns:
        VQF
    """
    reach = float(np.linalg.norm(mesh.vertices[np.unique(mesh.triangles)], axis=1).max())
    if reach > 1.0 + 1e-6:
        raise InvalidParameterError(
            f"Mesh '{mesh.name}' is not normalized (farthest vertex at {reach:.6g})"
        )

    started = time.perf_counter()
    accel = build_accel(mesh)

    def evaluate(index):
        camera = camera_pose(grid, index)
        quality, image, mask = evaluate_viewpoint(accel, mesh, camera, params, resolution)
        if view_sink is not None:
            view_sink(index, image, mask)
        return quality.as_tuple()

    rows = run_parallel(evaluate, len(grid), threads, label="viewpoints")
    values = np.array(rows, dtype=np.float64).reshape(grid.n_pol, grid.n_az, 3)
    logger.info(
        f"VQF: Computed {len(grid)} viewpoints for {mesh.name} "
        f"({mesh.face_count} triangles) in {time.perf_counter() - started:.2f}s"
    )
    return VQF(grid, params, mesh.name, values, resolution, dict(config or {}))


# ----- SERIALIZATION -----


def save_vqf(vqf: VQF, path: str) -> None:
    """Write a VQF as a .vqf.json document"""
    write_json(path, vqf.to_dict())


def load_vqf(path: str) -> VQF:
    """Read and validate a .vqf.json document"""
    return VQF.from_dict(read_json(path), source=path)


# ----- COMPARISON -----


@dataclass(frozen=True)
class LossReport:
    l1: float
    dssim: float
    silog: float
    total: float
    lambdas: tuple[float, float, float]
    silog_lambda: float
    per_channel: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "l1": self.l1,
            "dssim": self.dssim,
            "silog": self.silog,
            "total": self.total,
            "lambdas": list(self.lambdas),
            "silog_lambda": self.silog_lambda,
            "silog_log_base": "e",
            "per_channel": self.per_channel,
        }


def ssim_global(x: np.ndarray, y: np.ndarray, c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """SSIM from whole-field means, variances and covariance (no sliding window)"""
    mean_x = float(np.mean(x))
    mean_y = float(np.mean(y))
    var_x = float(np.mean((x - mean_x) * (x - mean_x)))
    var_y = float(np.mean((y - mean_y) * (y - mean_y)))
    covariance = float(np.mean((x - mean_x) * (y - mean_y)))
    return ((2.0 * mean_x * mean_y + c1) * (2.0 * covariance + c2)) / (
        (mean_x * mean_x + mean_y * mean_y + c1) * (var_x + var_y + c2)
    )


def dssim_global(x: np.ndarray, y: np.ndarray) -> float:
    return (1.0 - ssim_global(x, y)) / 2.0


def silog_loss(pred: np.ndarray, truth: np.ndarray, lam: float = SILOG_LAMBDA) -> float:
    """
    Scale-invariant log error with natural logarithms.

    Values are clamped below at 1e-6 before the log.
    """
    diff = np.log(np.maximum(pred, SILOG_EPSILON)) - np.log(np.maximum(truth, SILOG_EPSILON))
    mean = float(np.mean(diff))
    return float(np.mean(diff * diff)) - lam * mean * mean


def compare_vqf(
    pred: VQF,
    truth: VQF,
    lambdas: tuple[float, float, float] = LOSS_LAMBDAS,
    silog_lambda: float = SILOG_LAMBDA,
) -> LossReport:
    """
    Composite loss of a predicted VQF against ground truth.

    Channels are first scaled to [0, 1] (entropies by their theoretical maxima);
    total = l1 * lambda1 + dssim * lambda2 + silog * lambda3.

    Returns:
        LossReport
    """
    if not pred.grid.same_layout(truth.grid):
        raise GridMismatchError(
            f"Grid mismatch: prediction is {pred.grid.n_pol}x{pred.grid.n_az} "
            f"(radius {pred.grid.radius}), truth is {truth.grid.n_pol}x{truth.grid.n_az} "
            f"(radius {truth.grid.radius})"
        )
    if pred.params != truth.params:
        raise GridMismatchError(
            f"Metric parameters differ: {pred.params.to_dict()} vs {truth.params.to_dict()}"
        )

    p = pred.normalized().reshape(-1, 3)
    t = truth.normalized().reshape(-1, 3)

    per_channel = {}
    dssim_values = []
    silog_values = []
    for column, name in enumerate(VQF_CHANNELS):
        channel_dssim = dssim_global(p[:, column], t[:, column])
        channel_silog = silog_loss(p[:, column], t[:, column], silog_lambda)
        dssim_values.append(channel_dssim)
        silog_values.append(channel_silog)
        per_channel[name] = {
            "l1": float(np.mean(np.abs(p[:, column] - t[:, column]))),
            "dssim": channel_dssim,
            "silog": channel_silog,
        }

    l1 = float(np.mean(np.abs(p - t)))
    dssim = float(np.mean(dssim_values))
    silog = float(np.mean(silog_values))
    lambda1, lambda2, lambda3 = (float(x) for x in lambdas)
    total = lambda1 * l1 + lambda2 * dssim + lambda3 * silog
    logger.info(f"VQF: Compared {pred.mesh_id} against {truth.mesh_id}: total loss {total:.6g}")
    return LossReport(l1, dssim, silog, total, (lambda1, lambda2, lambda3), float(silog_lambda), per_channel)


# ----- VISUALIZATION -----


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 1] over the field; a constant field maps to 0.5 everywhere"""
    values = np.asarray(values, dtype=np.float64)
    low = float(values.min())
    high = float(values.max())
    span = high - low
    if span <= 1e-12 * max(1.0, abs(low), abs(high)):
        return np.full(values.shape, 0.5)
    return (values - low) / span


def channel_heatmap(vqf: VQF, channel: str, weights=DEFAULT_WEIGHTS) -> GrayImage:
    """
    n_pol x n_az heatmap of one channel, min-max normalized over the field.

    The occlusion channel is drawn as visible ratio (1 - occlusion ratio);
    'combined' draws the optimizer's score field.
    """
    if channel == "occlusion":
        raw = 1.0 - vqf.channel("occlusion_ratio")
    elif channel in ("normal_entropy", "visual_entropy"):
        raw = vqf.channel(channel)
    elif channel == "combined":
        # Import here to avoid circular imports
        from services.optimizer import combined_score

        raw = combined_score(vqf, weights).scores
    else:
        raise InvalidParameterError(f"Unknown --channel '{channel}', expected one of {HEATMAP_CHANNELS}")
    return GrayImage(minmax_normalize(raw))


def describe(vqf: VQF) -> str:
    """One-line summary used in log messages"""
    visible = 1.0 - vqf.channel("occlusion_ratio")
    return (
        f"{vqf.mesh_id}: {len(vqf.grid)} viewpoints, visible ratio "
        f"{visible.min():.3f}..{visible.max():.3f}, max H_geo {vqf.channel('normal_entropy').max():.3f}, "
        f"max H_vis {vqf.channel('visual_entropy').max():.3f} (of {math.log2(vqf.params.gray_bins):.0f})"
    )
