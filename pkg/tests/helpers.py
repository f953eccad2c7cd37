"""Mesh and field builders shared by the test modules."""

import numpy as np
import trimesh

from services.mesh import TriangleMesh, normalize
from services.metrics import MetricParams
from services.vqf import VQF


def from_trimesh(tm, name="mesh") -> TriangleMesh:
    return TriangleMesh.from_arrays(tm.vertices, tm.faces, name=name)


def unit_cube() -> TriangleMesh:
    """Axis-aligned cube with edge 1 centered at the origin (not normalized)"""
    return from_trimesh(trimesh.creation.box(extents=(1.0, 1.0, 1.0)), "cube")


def icosphere(subdivisions=4) -> TriangleMesh:
    return from_trimesh(trimesh.creation.icosphere(subdivisions=subdivisions), f"icosphere_{subdivisions}")


def bumpy_sphere(seed, subdivisions=2, amplitude=0.3) -> TriangleMesh:
    """Normalized icosphere with seeded radial noise: non-convex, no symmetry"""
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions)
    rng = np.random.default_rng(seed)
    radii = 1.0 + amplitude * rng.uniform(-1.0, 1.0, len(sphere.vertices))
    shade = rng.uniform(0.3, 1.0, len(sphere.vertices))
    mesh = TriangleMesh.from_arrays(
        sphere.vertices * radii[:, None], sphere.faces, albedo=shade, name=f"bumpy_{seed}"
    )
    return normalize(mesh)


def box_cluster() -> TriangleMesh:
    """Three boxes of different sizes side by side; boxes shadow each other"""
    boxes = [
        trimesh.creation.box(extents=extents, transform=trimesh.transformations.translation_matrix(offset))
        for extents, offset in (
            ((1.0, 1.0, 2.0), (0.0, 0.0, 0.0)),
            ((0.6, 0.6, 0.6), (1.0, 0.2, -0.5)),
            ((0.4, 1.2, 0.4), (-0.9, 0.3, 0.6)),
        )
    ]
    return normalize(from_trimesh(trimesh.util.concatenate(boxes), "box_cluster"))


def flat_plate() -> TriangleMesh:
    """Square in the yz plane facing +x"""
    vertices = [(0.0, -1.0, -1.0), (0.0, 1.0, -1.0), (0.0, 1.0, 1.0), (0.0, -1.0, 1.0)]
    return TriangleMesh.from_arrays(vertices, [(0, 1, 2), (0, 2, 3)], name="plate")


def write_obj(path, vertices, faces, one_based=True):
    """Write an OBJ file from 0-based face indices"""
    offset = 1 if one_based else 0
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in np.asarray(vertices, dtype=float)]
    lines += ["f " + " ".join(str(int(i) + offset) for i in face) for face in faces]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def field_vqf(grid, scores, params=None, mesh_id="field") -> VQF:
    """
    VQF whose visible-ratio channel follows `scores` and whose entropy channels
    are constant, so combined_score with weights (1, 0, 0) is minmax(scores).
    """
    scores = np.asarray(scores, dtype=float).reshape(grid.shape)
    span = scores.max() - scores.min()
    visible = (scores - scores.min()) / span if span > 0 else np.full(grid.shape, 0.5)
    values = np.stack([1.0 - visible, np.full(grid.shape, 1.0), np.full(grid.shape, 2.0)], axis=-1)
    return VQF(grid, params or MetricParams(), mesh_id, values)


def random_vqf(grid, seed, params=None, mesh_id="random") -> VQF:
    params = params or MetricParams()
    rng = np.random.default_rng(seed)
    values = np.stack(
        [
            rng.uniform(0.0, 1.0, grid.shape),
            rng.uniform(0.0, params.max_normal_entropy, grid.shape),
            rng.uniform(0.0, params.max_visual_entropy, grid.shape),
        ],
        axis=-1,
    )
    return VQF(grid, params, mesh_id, values)
