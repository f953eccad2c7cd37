from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import trimesh

from config import DEGENERATE_AREA, get_logger
from utils.errors import (
    DegenerateFaceError,
    EmptyMeshError,
    InvariantViolation,
    MeshFileNotFoundError,
    MeshParseError,
)

logger = get_logger("mesh")

# Exact minimal enclosing sphere up to this many vertices, Ritter's approximation above
EXACT_SPHERE_LIMIT = 100_000

# OBJ vertex-color to grayscale weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """
    Immutable triangle soup with per-face normals and areas.

    Arrays are marked read-only so a mesh can be shared between worker threads.
    """

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int64
    face_normals: np.ndarray  # (F, 3) unit vectors, file winding order
    face_areas: np.ndarray  # (F,)
    albedo: np.ndarray  # (V,) grayscale in [0, 1]
    name: str = "mesh"

    def __post_init__(self):
        for array in (
            self.vertices,
            self.triangles,
            self.face_normals,
            self.face_areas,
            self.albedo,
        ):
            array.setflags(write=False)

    @classmethod
    def from_arrays(
        cls,
        vertices,
        triangles,
        albedo=None,
        name: str = "mesh",
    ) -> TriangleMesh:
        """
        Build a mesh from raw arrays, computing face normals and areas.

        Args:
            vertices: (V, 3) vertex positions
            triangles: (F, 3) vertex indices
            albedo: Optional (V,) grayscale albedo, defaults to 1.0
            name: Identifier used in logs and VQF files

        Returns:
            TriangleMesh
        """
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if not np.isfinite(vertices).all():
            raise MeshParseError(f"Mesh '{name}' has non-finite vertex coordinates")
        if len(triangles) == 0:
            raise EmptyMeshError(f"Mesh '{name}' has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshParseError(
                f"Mesh '{name}' references vertex {int(triangles.max())} "
                f"but only has {len(vertices)} vertices"
            )

        if albedo is None:
            albedo = np.ones(len(vertices))
        albedo = np.clip(np.array(albedo, dtype=np.float64).reshape(-1), 0.0, 1.0)
        if len(albedo) != len(vertices):
            raise MeshParseError(
                f"Mesh '{name}' has {len(albedo)} albedo values for {len(vertices)} vertices"
            )

        normals, areas = _face_geometry(vertices, triangles)
        return cls(vertices, triangles, normals, areas, albedo, name)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.triangles)

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @property
    def corners(self) -> np.ndarray:
        """(F, 3, 3) triangle corner positions"""
        return self.vertices[self.triangles]

    def transformed(self, rotation) -> TriangleMesh:
        """
        Rotate the mesh about the origin.

        Args:
            rotation: (3, 3) orthonormal matrix

        Returns:
            Rotated copy; areas are unchanged and normals rotate with the geometry
        """
        rotation = np.asarray(rotation, dtype=np.float64)
        normals = self.face_normals @ rotation.T
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        return TriangleMesh(
            self.vertices @ rotation.T,
            self.triangles.copy(),
            normals,
            self.face_areas.copy(),
            self.albedo.copy(),
            self.name,
        )


def _face_geometry(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    corners = vertices[triangles]
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norms = np.linalg.norm(cross, axis=1)
    degenerate = np.flatnonzero(norms == 0.0)
    if degenerate.size:
        raise DegenerateFaceError(
            f"Triangle {int(degenerate[0])} has zero area ({degenerate.size} degenerate in total)"
        )
    return cross / norms[:, None], 0.5 * norms


def face_properties(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """
    Compute per-face unit normals and areas.

    The normal follows the file's winding order: (v1 - v0) x (v2 - v0), normalized.

    Args:
        mesh: TriangleMesh

    Returns:
        (face_normals (F, 3), face_areas (F,))
    """
    return _face_geometry(mesh.vertices, mesh.triangles)


# ----- LOADING -----


def load_mesh(path: str) -> TriangleMesh:
    """
    Load an OBJ or STL file and sanitize it.

    Degenerate triangles (area <= 1e-12) are dropped and quads are split into the
    (0, 1, 2) / (0, 2, 3) fan. The mesh is NOT normalized.

    Args:
        path: Path to a .obj or .stl file

    Returns:
        TriangleMesh named after the file stem
    """
    if not os.path.isfile(path):
        raise MeshFileNotFoundError(f"Mesh file not found: {path}")

    name = os.path.basename(path)
    for suffix in (".obj", ".stl"):
        if name.lower().endswith(suffix):
            name = name[: -len(suffix)]
            break

    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".obj":
        vertices, triangles, albedo = _parse_obj(path)
    elif suffix == ".stl":
        vertices, triangles, albedo = _parse_stl(path)
    else:
        raise MeshParseError(f"Unsupported mesh format '{suffix}' for {path}")

    mesh, removed = sanitize(vertices, triangles, albedo, name)
    logger.info(
        f"MESH: Loaded {name}: {mesh.vertex_count} vertices, {mesh.face_count} triangles"
        + (f" ({removed} degenerate removed)" if removed else "")
    )
    return mesh


def sanitize(vertices, triangles, albedo=None, name: str = "mesh") -> tuple[TriangleMesh, int]:
    """
    Drop zero-area triangles and build a TriangleMesh.

    Returns:
        (mesh, number of removed triangles)
    """
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(triangles) == 0:
        raise EmptyMeshError(f"Mesh '{name}' contains no faces")
    if not np.isfinite(vertices).all():
        raise MeshParseError(f"Mesh '{name}' has non-finite vertex coordinates")

    corners = vertices[triangles]
    areas = 0.5 * np.linalg.norm(
        np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1
    )
    keep = areas > DEGENERATE_AREA
    if not keep.any():
        raise EmptyMeshError(f"Mesh '{name}' has no valid triangles after sanitization")

    removed = int((~keep).sum())
    if removed:
        logger.debug(f"MESH: Removed {removed} degenerate triangles from {name}")
    return TriangleMesh.from_arrays(vertices, triangles[keep], albedo, name), removed


def _parse_obj(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vertices = []
    colors = []
    faces = []  # (indices, line number)

    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for line_number, line in enumerate(f, 1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue

            if tokens[0] == "v":
                try:
                    values = [float(x) for x in tokens[1:]]
                except ValueError:
                    raise MeshParseError(f"{path}:{line_number}: malformed vertex line: {line.strip()}")
                if len(values) < 3:
                    raise MeshParseError(f"{path}:{line_number}: vertex needs 3 coordinates")
                if not np.all(np.isfinite(values)):
                    raise MeshParseError(f"{path}:{line_number}: non-finite vertex value: {line.strip()}")
                vertices.append(values[:3])
                colors.append(values[3:6] if len(values) >= 6 else None)

            elif tokens[0] == "f":
                refs = tokens[1:]
                if len(refs) not in (3, 4):
                    raise MeshParseError(
                        f"{path}:{line_number}: face with {len(refs)} vertices "
                        "(only triangles and quads are supported)"
                    )
                indices = []
                for ref in refs:
                    try:
                        index = int(ref.split("/")[0])
                    except ValueError:
                        raise MeshParseError(f"{path}:{line_number}: malformed face line: {line.strip()}")
                    if index == 0:
                        raise MeshParseError(f"{path}:{line_number}: face index 0 is invalid in OBJ")
                    # OBJ is 1-based; negative indices are relative to the vertices read so far
                    indices.append(index - 1 if index > 0 else len(vertices) + index)
                faces.append((indices[:3], line_number))
                if len(indices) == 4:
                    faces.append(([indices[0], indices[2], indices[3]], line_number))
            # vn, vt, g, o, s, usemtl, mtllib: ignored (normals are recomputed)

    if not faces:
        raise EmptyMeshError(f"{path}: no faces found")

    for indices, line_number in faces:
        for index in indices:
            if index < 0 or index >= len(vertices):
                raise MeshParseError(
                    f"{path}:{line_number}: face index {index + 1} out of range "
                    f"({len(vertices)} vertices)"
                )

    albedo = np.ones(len(vertices))
    colored = [i for i, c in enumerate(colors) if c is not None]
    if colored:
        rgb = np.array([colors[i] for i in colored], dtype=np.float64)
        if rgb.max() > 1.0:  # 8-bit colors
            rgb = rgb / 255.0
        albedo[colored] = np.clip(rgb @ LUMA_WEIGHTS, 0.0, 1.0)

    triangles = np.array([indices for indices, _ in faces], dtype=np.int64)
    return np.array(vertices, dtype=np.float64), triangles, albedo


def _parse_stl(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        loaded = trimesh.load(path, file_type="stl", process=False, force="mesh")
    except Exception as e:
        raise MeshParseError(f"{path}: failed to parse STL: {e}") from e

    vertices = np.asarray(loaded.vertices, dtype=np.float64)
    triangles = np.asarray(loaded.faces, dtype=np.int64)
    if len(triangles) == 0:
        raise EmptyMeshError(f"{path}: no facets found")
    return vertices, triangles, np.ones(len(vertices))


# ----- NORMALIZATION -----


def normalize(mesh: TriangleMesh) -> TriangleMesh:
    """
    Center the minimal bounding sphere at the origin and scale its radius to 1.

    Face normals are kept as they are; areas scale with the square of the factor.

    Args:
        mesh: TriangleMesh

    Returns:
        Normalized TriangleMesh
    """
    used = np.unique(mesh.triangles)
    center, radius = bounding_sphere(mesh.vertices[used])
    if radius <= 0.0:
        raise InvariantViolation(f"Mesh '{mesh.name}' has a zero-radius bounding sphere")

    scale = 1.0 / radius
    logger.debug(f"MESH: Normalizing {mesh.name}: center {center.tolist()}, radius {radius:.6g}")
    return TriangleMesh(
        (mesh.vertices - center) * scale,
        mesh.triangles.copy(),
        mesh.face_normals.copy(),
        mesh.face_areas * scale**2,
        mesh.albedo.copy(),
        mesh.name,
    )


def bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Minimal enclosing sphere (Welzl) for up to 1e5 points, Ritter's sphere above.

    Both are deterministic: the point order is fixed before the randomized
    incremental construction by a constant seed.

    Returns:
        (center (3,), radius)
    """
    points = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 3), axis=0)
    if len(points) > EXACT_SPHERE_LIMIT:
        return _ritter_sphere(points)

    order = np.random.default_rng(0).permutation(len(points))
    points = np.ascontiguousarray(points[order])
    extent = float(np.ptp(points, axis=0).max()) if len(points) > 1 else 0.0
    tolerance = 1e-12 * max(extent, 1e-300) ** 2
    center, radius_sq = _welzl(points, len(points), [], tolerance)
    return center, float(np.sqrt(max(radius_sq, 0.0)))


def _welzl(points, count, support, tolerance):
    center, radius_sq = _ball_through(support)
    if len(support) == 4:
        return center, radius_sq

    i = 0
    while i < count:
        offsets = points[i:count] - center
        outside = np.flatnonzero(np.einsum("ij,ij->i", offsets, offsets) > radius_sq + tolerance)
        if outside.size == 0:
            break
        i += int(outside[0])
        center, radius_sq = _welzl(points, i, support + [points[i]], tolerance)
        i += 1
    return center, radius_sq


def _ball_through(support):
    """Smallest ball with all support points on its boundary"""
    if not support:
        return np.zeros(3), -np.inf
    if len(support) == 1:
        return support[0].copy(), 0.0
    if len(support) == 2:
        center = 0.5 * (support[0] + support[1])
        return center, float(np.sum((support[0] - center) ** 2))
    if len(support) == 3:
        return _circumball(*support)
    return _circumsphere(*support)


def _circumball(a, b, c):
    u = a - c
    w = b - c
    normal = np.cross(u, w)
    denom = 2.0 * float(normal @ normal)
    scale = max(float(u @ u), float(w @ w))
    if denom <= 1e-24 * max(scale, 1e-300) ** 2:
        # collinear: the widest pair spans the ball
        pairs = [(a, b), (a, c), (b, c)]
        p, q = max(pairs, key=lambda pq: float(np.sum((pq[0] - pq[1]) ** 2)))
        return _ball_through([p, q])
    center = c + np.cross(float(u @ u) * w - float(w @ w) * u, normal) / denom
    return center, float(np.sum((a - center) ** 2))


def _circumsphere(a, b, c, d):
    system = 2.0 * np.array([b - a, c - a, d - a])
    rhs = np.array([b @ b - a @ a, c @ c - a @ a, d @ d - a @ a])
    scale = float(np.abs(system).max())
    if abs(np.linalg.det(system)) <= 1e-12 * max(scale, 1e-300) ** 3:
        # coplanar support: keep the circle through three points, grow it to cover the fourth
        center, _ = _circumball(a, b, c)
        radius_sq = max(float(np.sum((p - center) ** 2)) for p in (a, b, c, d))
        return center, radius_sq
    center = np.linalg.solve(system, rhs)
    return center, float(np.sum((a - center) ** 2))


def _ritter_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    first = points[0]
    p = points[np.argmax(np.sum((points - first) ** 2, axis=1))]
    q = points[np.argmax(np.sum((points - p) ** 2, axis=1))]
    center = 0.5 * (p + q)
    radius = 0.5 * float(np.linalg.norm(p - q))

    while True:
        distances = np.linalg.norm(points - center, axis=1)
        far = int(np.argmax(distances))
        if distances[far] <= radius * (1.0 + 1e-12):
            break
        new_radius = 0.5 * (radius + distances[far])
        center = center + (distances[far] - new_radius) / distances[far] * (points[far] - center)
        radius = new_radius
    return center, radius
