from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from config import get_logger
from services.raycast import intersect_batch
from utils.errors import InvalidParameterError

logger = get_logger("render")

MIN_RESOLUTION = 16


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) float64 in [0, 1], row 0 at the top

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class Mask:
    bits: np.ndarray  # (height, width) bool, True = object pixel

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def coverage(self) -> float:
        return float(self.bits.mean())


def primary_rays(camera, width: int, height: int) -> np.ndarray:
    """
    Unit directions of the pinhole rays through every pixel center.

    Returns:
        (height * width, 3) directions in row-major order
    """
    half_height = math.tan(0.5 * camera.vertical_fov)
    half_width = half_height * width / height  # square pixels
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * half_width
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * half_height
    grid_x, grid_y = np.meshgrid(xs, ys)
    directions = (
        camera.forward[None, :]
        + grid_x.reshape(-1, 1) * camera.right[None, :]
        + grid_y.reshape(-1, 1) * camera.up[None, :]
    )
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def render_grayscale(accel, mesh, camera, width: int, height: int) -> tuple[GrayImage, Mask]:
    """
    Ray-traced grayscale render with a headlight Lambertian model.

    A hit pixel is albedo(hit) * max(0, n . w), where n is the flat face normal
    turned toward the camera and w points from the hit to the camera; albedo
    is interpolated barycentrically from the vertices. Misses are 0 and
    outside the mask.

    Args:
        accel: AccelStructure for mesh
        mesh: TriangleMesh
        camera: CameraPose
        width: Image width in pixels (>= 16)
        height: Image height in pixels (>= 16)

    Returns:
        (GrayImage, Mask)
    """
    if width < MIN_RESOLUTION or height < MIN_RESOLUTION:
        raise InvalidParameterError(
            f"--res must be at least {MIN_RESOLUTION}, got {width}x{height}"
        )

    directions = primary_rays(camera, width, height)
    origins = np.broadcast_to(camera.position, directions.shape)
    faces, _, u, v = intersect_batch(accel, origins, directions)

    hit = faces >= 0
    pixels = np.zeros(len(faces))
    if hit.any():
        hit_faces = faces[hit]
        normals = mesh.face_normals[hit_faces]
        toward_camera = -directions[hit]
        # |n . w| is the cosine with the normal flipped toward the camera
        shading = np.abs(np.einsum("ij,ij->i", normals, toward_camera))
        corner_albedo = mesh.albedo[mesh.triangles[hit_faces]]
        albedo = (
            (1.0 - u[hit] - v[hit]) * corner_albedo[:, 0]
            + u[hit] * corner_albedo[:, 1]
            + v[hit] * corner_albedo[:, 2]
        )
        pixels[hit] = np.clip(albedo * shading, 0.0, 1.0)

    return (
        GrayImage(pixels.reshape(height, width)),
        Mask(hit.reshape(height, width)),
    )
