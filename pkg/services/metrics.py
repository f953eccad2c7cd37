from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import entropy

from config import GRAY_BINS, SAMPLES_PER_FACE, get_logger
from utils.errors import InvalidParameterError

logger = get_logger("metrics")


@dataclass(frozen=True)
class MetricParams:
    normal_bins_polar: int = 8  # over [0, pi/2]
    normal_bins_azimuth: int = 32  # over [-pi, pi]
    gray_bins: int = GRAY_BINS  # over [0, 1]
    samples_per_face: int = SAMPLES_PER_FACE
    area_weighted_normals: bool = False

    def __post_init__(self):
        for name in ("normal_bins_polar", "normal_bins_azimuth", "gray_bins", "samples_per_face"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value}")
        if self.gray_bins < 2 or self.n_all < 2:
            raise InvalidParameterError("Histograms need at least 2 bins")

    @property
    def n_all(self) -> int:
        return self.normal_bins_polar * self.normal_bins_azimuth

    @property
    def max_normal_entropy(self) -> float:
        return math.log2(self.n_all)

    @property
    def max_visual_entropy(self) -> float:
        return math.log2(self.gray_bins)

    def to_dict(self) -> dict:
        return {
            "normal_bins_polar": self.normal_bins_polar,
            "normal_bins_azimuth": self.normal_bins_azimuth,
            "gray_bins": self.gray_bins,
            "samples_per_face": self.samples_per_face,
            "area_weighted_normals": self.area_weighted_normals,
        }

    @classmethod
    def from_dict(cls, data: dict) -> MetricParams:
        return cls(
            normal_bins_polar=int(data["normal_bins_polar"]),
            normal_bins_azimuth=int(data["normal_bins_azimuth"]),
            gray_bins=int(data["gray_bins"]),
            samples_per_face=int(data["samples_per_face"]),
            area_weighted_normals=bool(data.get("area_weighted_normals", False)),
        )


@dataclass(frozen=True)
class QualityVector:
    occlusion_ratio: float
    normal_entropy: float
    visual_entropy: float

    @property
    def visible_ratio(self) -> float:
        return 1.0 - self.occlusion_ratio

    def as_tuple(self) -> tuple[float, float, float]:
        return self.occlusion_ratio, self.normal_entropy, self.visual_entropy


def _entropy_bits(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a histogram; 0 for an empty one"""
    if counts.sum() <= 0:
        return 0.0
    return float(entropy(counts, base=2))


def self_occlusion_ratio(report, mesh) -> float:
    """
    Occluded surface area over total surface area.

    Partially visible faces contribute area * (1 - visible fraction).
    """
    occluded = float(np.dot(mesh.face_areas, 1.0 - report.visible_fraction))
    return min(1.0, max(0.0, occluded / mesh.total_area))


def normal_frame(camera) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Hemisphere frame for normal binning.

    The pole points from the object center toward the camera and the camera's
    right vector is the azimuth reference.

    Returns:
        (x axis, y axis, pole)
    """
    pole = np.asarray(camera.position, dtype=np.float64)
    pole = pole / np.linalg.norm(pole)
    x_axis = camera.right - (camera.right @ pole) * pole
    x_axis = x_axis / np.linalg.norm(x_axis)
    return x_axis, np.cross(pole, x_axis), pole


def normal_histogram(report, mesh, camera, params: MetricParams) -> np.ndarray:
    """
    (polar bins, azimuth bins) histogram of fully visible face normals.

    Normals more than pi/2 away from the pole are dropped. One count per face
    unless params.area_weighted_normals is set.
    """
    x_axis, y_axis, pole = normal_frame(camera)
    faces = np.flatnonzero(report.fully_visible)
    normals = mesh.face_normals[faces]

    cos_polar = normals @ pole
    inside = cos_polar >= 0.0
    faces, normals, cos_polar = faces[inside], normals[inside], cos_polar[inside]

    polar = np.arccos(np.clip(cos_polar, -1.0, 1.0))
    azimuth = np.arctan2(normals @ y_axis, normals @ x_axis)

    polar_bin = np.minimum(
        (polar / (0.5 * math.pi) * params.normal_bins_polar).astype(np.int64),
        params.normal_bins_polar - 1,
    )
    azimuth_bin = np.clip(
        ((azimuth + math.pi) / (2.0 * math.pi) * params.normal_bins_azimuth).astype(np.int64),
        0,
        params.normal_bins_azimuth - 1,
    )
    weights = mesh.face_areas[faces] if params.area_weighted_normals else None
    counts = np.bincount(
        polar_bin * params.normal_bins_azimuth + azimuth_bin,
        weights=weights,
        minlength=params.n_all,
    )
    return counts.reshape(params.normal_bins_polar, params.normal_bins_azimuth)


def normal_entropy(report, mesh, camera, params: MetricParams) -> float:
    """
    Occupancy-aware surface normal entropy of the fully visible faces.

    H = (occupied bins / all bins) * Shannon entropy (bits) of the histogram.
    Returns 0 when no face is fully visible.
    """
    counts = normal_histogram(report, mesh, camera, params).ravel()
    occupied = int(np.count_nonzero(counts))
    if occupied == 0:
        return 0.0
    return occupied / params.n_all * _entropy_bits(counts)


def visual_entropy(image, mask, params: MetricParams) -> float:
    """
    Shannon entropy (bits) of the gray levels inside the object mask.

    Returns 0 for an empty mask.
    """
    if image.pixels.shape != mask.bits.shape:
        raise InvalidParameterError(
            f"Image {image.pixels.shape} and mask {mask.bits.shape} dimensions differ"
        )
    values = image.pixels[mask.bits]
    if values.size == 0:
        return 0.0
    counts, _ = np.histogram(values, bins=params.gray_bins, range=(0.0, 1.0))
    return _entropy_bits(counts)
