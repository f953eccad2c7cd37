from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy.stats import qmc

from config import FRONT_EPS, OCCLUSION_OFFSET, RAY_EPSILON, get_logger
from utils.errors import InvalidParameterError

logger = get_logger("raycast")

LEAF_SIZE = 4
STACK_SIZE = 128
DET_EPSILON = 1e-14
BOX_PADDING = 1e-9


# ----- TYPES -----


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    t_max: float = np.inf

    def __post_init__(self):
        length = float(np.linalg.norm(self.direction))
        if abs(length - 1.0) > 1e-6:
            raise InvalidParameterError(f"Ray direction must be unit length, got |d| = {length}")
        if not self.t_max > 0:
            raise InvalidParameterError(f"Ray t_max must be positive, got {self.t_max}")


@dataclass(frozen=True)
class Hit:
    face_index: int
    t: float
    barycentric: tuple[float, float]


@dataclass(frozen=True, eq=False)
class VisibilityReport:
    """Per-face visible sample fractions for one camera pose"""

    visible_fraction: np.ndarray  # (F,) in [0, 1]
    fully_visible: np.ndarray  # (F,) bool
    samples_per_face: int

    @property
    def visible_face_count(self) -> int:
        return int(self.fully_visible.sum())


@dataclass(frozen=True, eq=False)
class AccelStructure:
    """
    Flattened bounding volume hierarchy over the triangles of one mesh.

    Internal nodes have node_count == 0 and two children; leaves own
    leaf_faces[node_start : node_start + node_count].
    """

    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    leaf_faces: np.ndarray
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    depth: int

    @property
    def face_count(self) -> int:
        return len(self.v0)

    @property
    def size(self) -> int:
        return len(self.node_count)

    def kernel_args(self) -> tuple:
        return (
            self.node_min,
            self.node_max,
            self.node_left,
            self.node_right,
            self.node_start,
            self.node_count,
            self.leaf_faces,
            self.v0,
            self.e1,
            self.e2,
        )


# ----- KERNELS -----


@numba.njit(cache=True, nogil=True)
def _ray_triangle(ox, oy, oz, dx, dy, dz, v0, e1, e2, face):
    """Moller-Trumbore, two-sided. Returns (t, u, v) with t = -1 on a miss."""
    e1x, e1y, e1z = e1[face, 0], e1[face, 1], e1[face, 2]
    e2x, e2y, e2z = e2[face, 0], e2[face, 1], e2[face, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < DET_EPSILON:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - v0[face, 0]
    sy = oy - v0[face, 1]
    sz = oz - v0[face, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, u, v


@numba.njit(cache=True, nogil=True)
def _slab_overlap(ox, oy, oz, dx, dy, dz, bmin, bmax, t_lo, t_hi):
    lo = t_lo
    hi = t_hi
    origin = (ox, oy, oz)
    direction = (dx, dy, dz)
    for axis in range(3):
        o = origin[axis]
        d = direction[axis]
        if d == 0.0:
            if o < bmin[axis] or o > bmax[axis]:
                return False
        else:
            t1 = (bmin[axis] - o) / d
            t2 = (bmax[axis] - o) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > lo:
                lo = t1
            if t2 < hi:
                hi = t2
            if lo > hi:
                return False
    return True


@numba.njit(cache=True, nogil=True)
def _closest_bvh(
    ox, oy, oz, dx, dy, dz, t_min, t_max,
    node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
    v0, e1, e2,
):
    best_face = -1
    best_t = t_max
    best_u = 0.0
    best_v = 0.0
    stack = np.empty(STACK_SIZE, np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        # inclusive bound keeps equal-distance ties in other leaves reachable
        if not _slab_overlap(ox, oy, oz, dx, dy, dz, node_min[node], node_max[node], t_min, best_t):
            continue
        count = node_count[node]
        if count > 0:
            start = node_start[node]
            for k in range(start, start + count):
                face = leaf_faces[k]
                t, u, v = _ray_triangle(ox, oy, oz, dx, dy, dz, v0, e1, e2, face)
                if t > t_min and t <= t_max:
                    if best_face < 0 or t < best_t or (t == best_t and face < best_face):
                        best_face = face
                        best_t = t
                        best_u = u
                        best_v = v
        else:
            stack[top] = node_right[node]
            stack[top + 1] = node_left[node]
            top += 2
    return best_face, best_t, best_u, best_v


@numba.njit(cache=True, nogil=True)
def _any_hit_bvh(
    ox, oy, oz, dx, dy, dz, t_min, t_max,
    node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
    v0, e1, e2,
):
    stack = np.empty(STACK_SIZE, np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_overlap(ox, oy, oz, dx, dy, dz, node_min[node], node_max[node], t_min, t_max):
            continue
        count = node_count[node]
        if count > 0:
            start = node_start[node]
            for k in range(start, start + count):
                t, u, v = _ray_triangle(ox, oy, oz, dx, dy, dz, v0, e1, e2, leaf_faces[k])
                if t > t_min and t <= t_max:
                    return True
        else:
            stack[top] = node_right[node]
            stack[top + 1] = node_left[node]
            top += 2
    return False


@numba.njit(cache=True, nogil=True)
def _closest_exhaustive(ox, oy, oz, dx, dy, dz, t_min, t_max, v0, e1, e2):
    best_face = -1
    best_t = t_max
    best_u = 0.0
    best_v = 0.0
    for face in range(v0.shape[0]):
        t, u, v = _ray_triangle(ox, oy, oz, dx, dy, dz, v0, e1, e2, face)
        if t > t_min and t <= t_max:
            if best_face < 0 or t < best_t:
                best_face = face
                best_t = t
                best_u = u
                best_v = v
    return best_face, best_t, best_u, best_v


@numba.njit(cache=True, nogil=True)
def _closest_batch(
    origins, directions, t_min, t_max,
    node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
    v0, e1, e2,
    out_face, out_t, out_u, out_v,
):
    for i in range(origins.shape[0]):
        face, t, u, v = _closest_bvh(
            origins[i, 0], origins[i, 1], origins[i, 2],
            directions[i, 0], directions[i, 1], directions[i, 2],
            t_min, t_max[i],
            node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
            v0, e1, e2,
        )
        out_face[i] = face
        out_t[i] = t
        out_u[i] = u
        out_v[i] = v


@numba.njit(cache=True, nogil=True)
def _occluded_batch(
    origins, directions, t_min, t_max,
    node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
    v0, e1, e2,
    out,
):
    for i in range(origins.shape[0]):
        out[i] = _any_hit_bvh(
            origins[i, 0], origins[i, 1], origins[i, 2],
            directions[i, 0], directions[i, 1], directions[i, 2],
            t_min, t_max[i],
            node_min, node_max, node_left, node_right, node_start, node_count, leaf_faces,
            v0, e1, e2,
        )


# ----- BUILD -----


def build_accel(mesh) -> AccelStructure:
    """
    Build a median-split BVH (longest centroid axis, leaves of at most 4 triangles).

    Args:
        mesh: TriangleMesh

    Returns:
        AccelStructure answering nearest-hit queries exactly like exhaustive intersection
    """
    corners = mesh.corners
    lower = corners.min(axis=1)
    upper = corners.max(axis=1)
    centroids = corners.mean(axis=1)
    padding = BOX_PADDING * max(1.0, float(np.abs(corners).max()))

    node_min, node_max = [], []
    node_left, node_right, node_start, node_count = [], [], [], []
    leaf_faces = []

    def new_node():
        node_min.append(None)
        node_max.append(None)
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        return len(node_count) - 1

    depth = 0
    work = [(new_node(), np.arange(mesh.face_count), 1)]
    while work:
        node, faces, level = work.pop()
        depth = max(depth, level)
        node_min[node] = lower[faces].min(axis=0) - padding
        node_max[node] = upper[faces].max(axis=0) + padding

        if len(faces) <= LEAF_SIZE:
            node_start[node] = len(leaf_faces)
            node_count[node] = len(faces)
            leaf_faces.extend(faces.tolist())
            continue

        spread = centroids[faces]
        axis = int(np.argmax(np.ptp(spread, axis=0)))
        order = np.argsort(spread[:, axis], kind="stable")
        middle = len(faces) // 2
        left = new_node()
        right = new_node()
        node_left[node] = left
        node_right[node] = right
        work.append((right, faces[order[middle:]], level + 1))
        work.append((left, faces[order[:middle]], level + 1))

    accel = AccelStructure(
        node_min=np.ascontiguousarray(node_min, dtype=np.float64),
        node_max=np.ascontiguousarray(node_max, dtype=np.float64),
        node_left=np.asarray(node_left, dtype=np.int64),
        node_right=np.asarray(node_right, dtype=np.int64),
        node_start=np.asarray(node_start, dtype=np.int64),
        node_count=np.asarray(node_count, dtype=np.int64),
        leaf_faces=np.asarray(leaf_faces, dtype=np.int64),
        v0=np.ascontiguousarray(corners[:, 0]),
        e1=np.ascontiguousarray(corners[:, 1] - corners[:, 0]),
        e2=np.ascontiguousarray(corners[:, 2] - corners[:, 0]),
        depth=depth,
    )
    logger.debug(f"RAYCAST: Built BVH for {mesh.name}: {accel.size} nodes, depth {depth}")
    return accel


# ----- QUERIES -----


def intersect(accel: AccelStructure, ray: Ray) -> Hit | None:
    """
    Nearest hit with t in (1e-6, t_max]; equal distances resolve to the smaller face index.

    Returns:
        Hit or None when no triangle is hit
    """
    o = np.asarray(ray.origin, dtype=np.float64)
    d = np.asarray(ray.direction, dtype=np.float64)
    face, t, u, v = _closest_bvh(
        o[0], o[1], o[2], d[0], d[1], d[2], RAY_EPSILON, float(ray.t_max), *accel.kernel_args()
    )
    if face < 0:
        return None
    return Hit(int(face), float(t), (float(u), float(v)))


def intersect_exhaustive(accel: AccelStructure, ray: Ray) -> Hit | None:
    """Reference nearest hit by testing every triangle (oracle for the BVH)"""
    o = np.asarray(ray.origin, dtype=np.float64)
    d = np.asarray(ray.direction, dtype=np.float64)
    face, t, u, v = _closest_exhaustive(
        o[0], o[1], o[2], d[0], d[1], d[2], RAY_EPSILON, float(ray.t_max),
        accel.v0, accel.e1, accel.e2,
    )
    if face < 0:
        return None
    return Hit(int(face), float(t), (float(u), float(v)))


def intersect_batch(accel: AccelStructure, origins, directions, t_max=np.inf):
    """
    Nearest hits for many rays.

    Returns:
        (faces, t, u, v) arrays; face -1 marks a miss
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    count = len(origins)
    limits = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (count,)).copy()
    faces = np.empty(count, dtype=np.int64)
    t = np.empty(count)
    u = np.empty(count)
    v = np.empty(count)
    _closest_batch(origins, directions, RAY_EPSILON, limits, *accel.kernel_args(), faces, t, u, v)
    return faces, t, u, v


def occluded_batch(accel: AccelStructure, origins, directions, t_max) -> np.ndarray:
    """True where the segment origin + t * direction, t in (1e-6, t_max], hits any triangle"""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    count = len(origins)
    limits = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (count,)).copy()
    out = np.zeros(count, dtype=np.bool_)
    if count:
        _occluded_batch(origins, directions, RAY_EPSILON, limits, *accel.kernel_args(), out)
    return out


# ----- VISIBILITY -----


@lru_cache(maxsize=16)
def sample_pattern(samples_per_face: int) -> np.ndarray:
    """
    Fixed barycentric sample pattern shared by every face.

    Scrambled Halton points (constant seed) warped onto the triangle with the
    square-root map, so all weights are strictly positive.

    Returns:
        (S, 3) barycentric weights, read-only
    """
    if samples_per_face < 1:
        raise InvalidParameterError(f"samples_per_face must be >= 1, got {samples_per_face}")
    square = qmc.Halton(d=2, scramble=True, seed=0).random(samples_per_face)
    root = np.sqrt(square[:, 0])
    weights = np.column_stack([1.0 - root, root * (1.0 - square[:, 1]), root * square[:, 1]])
    weights.setflags(write=False)
    return weights


def face_visibility(accel: AccelStructure, mesh, camera, samples_per_face: int = 10) -> VisibilityReport:
    """
    Fraction of each face's sample points visible from the camera center.

    A sample is visible when the face is front-facing towards the camera at that
    point and the segment from the point (lifted 1e-4 along the normal) to the
    camera crosses no triangle. Back-facing samples count as occluded.

    Args:
        accel: AccelStructure built for mesh
        mesh: TriangleMesh
        camera: CameraPose
        samples_per_face: Sample points per face (10 by default)

    Returns:
        VisibilityReport
    """
    pattern = sample_pattern(samples_per_face)
    eye = np.asarray(camera.position, dtype=np.float64)

    points = np.einsum("sk,fkj->fsj", pattern, mesh.corners)  # (F, S, 3)
    normals = np.broadcast_to(mesh.face_normals[:, None, :], points.shape)
    to_eye = eye - points
    # edge-on samples count as back-facing
    front = np.einsum("fsj,fsj->fs", normals, to_eye) > FRONT_EPS * np.linalg.norm(to_eye, axis=2)

    candidates = np.flatnonzero(front.ravel())
    visible = np.zeros(front.size, dtype=np.bool_)
    if candidates.size:
        origins = (points + OCCLUSION_OFFSET * normals).reshape(-1, 3)[candidates]
        segments = eye - origins
        lengths = np.linalg.norm(segments, axis=1)
        blocked = occluded_batch(accel, origins, segments / lengths[:, None], lengths)
        visible[candidates] = ~blocked

    visible = visible.reshape(front.shape)
    counts = visible.sum(axis=1)
    return VisibilityReport(
        visible_fraction=counts / float(samples_per_face),
        fully_visible=counts == samples_per_face,
        samples_per_face=samples_per_face,
    )
