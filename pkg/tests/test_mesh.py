import math

import numpy as np
import pytest
import trimesh

from services.mesh import (
    TriangleMesh,
    bounding_sphere,
    face_properties,
    load_mesh,
    normalize,
    sanitize,
)
from tests.helpers import unit_cube, write_obj
from utils.errors import (
    DegenerateFaceError,
    EmptyMeshError,
    MeshFileNotFoundError,
    MeshParseError,
)


CUBE = trimesh.creation.box(extents=(1.0, 1.0, 1.0))


class TestLoadMesh:
    """OBJ / STL ingestion and sanitization."""

    def test_unit_cube_obj(self, tmp_path):
        path = write_obj(tmp_path / "cube.obj", CUBE.vertices, CUBE.faces)
        mesh = load_mesh(path)
        assert mesh.face_count == 12
        assert mesh.vertex_count == 8
        assert mesh.name == "cube"
        assert mesh.total_area == pytest.approx(6.0, abs=1e-9)

    def test_degenerate_triangle_removed(self, tmp_path):
        path = tmp_path / "two.obj"
        path.write_text(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
            "f 1 2 4\n"  # collinear
            "f 1 2 3\n"
        )
        mesh = load_mesh(str(path))
        assert mesh.face_count == 1
        assert mesh.total_area == pytest.approx(0.5)

    def test_icosphere_area(self, tmp_path):
        sphere = trimesh.creation.icosphere(subdivisions=3)
        mesh = load_mesh(write_obj(tmp_path / "ico.obj", sphere.vertices, sphere.faces))
        assert mesh.face_count == 1280
        assert mesh.total_area == pytest.approx(4.0 * math.pi, rel=0.02)

    def test_quad_fan(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        mesh = load_mesh(str(path))
        np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2], [0, 2, 3]])
        assert mesh.total_area == pytest.approx(1.0)

    def test_slash_and_negative_indices(self, tmp_path):
        path = tmp_path / "neg.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3//1 -2//1 -1//1\n")
        mesh = load_mesh(str(path))
        np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])
        np.testing.assert_allclose(mesh.face_normals[0], [0.0, 0.0, 1.0])

    def test_vertex_colors_become_albedo(self, tmp_path):
        path = tmp_path / "color.obj"
        path.write_text("v 0 0 0 255 255 255\nv 1 0 0 0 0 0\nv 0 1 0 255 0 0\nf 1 2 3\n")
        mesh = load_mesh(str(path))
        np.testing.assert_allclose(mesh.albedo, [1.0, 0.0, 0.299])

    def test_stl(self, tmp_path):
        path = tmp_path / "cube.stl"
        CUBE.export(str(path))
        mesh = load_mesh(str(path))
        assert mesh.face_count == 12
        assert mesh.total_area == pytest.approx(6.0, abs=1e-6)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshFileNotFoundError):
            load_mesh(str(tmp_path / "nope.obj"))

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
        with pytest.raises(MeshParseError, match=":4:"):
            load_mesh(str(path))

    def test_malformed_face_line(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 two 3\n")
        with pytest.raises(MeshParseError):
            load_mesh(str(path))

    @pytest.mark.parametrize("value", ["1e400", "nan", "-inf"])
    def test_non_finite_vertex(self, tmp_path, value):
        path = tmp_path / "bad.obj"
        path.write_text(f"v 0 0 0\nv {value} 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\nf 1 3 4\n")
        with pytest.raises(MeshParseError, match=":2:"):
            load_mesh(str(path))

    def test_all_degenerate_is_empty(self, tmp_path):
        path = tmp_path / "flat.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
        with pytest.raises(EmptyMeshError):
            load_mesh(str(path))

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "cube.ply"
        path.write_text("ply\n")
        with pytest.raises(MeshParseError):
            load_mesh(str(path))


class TestFaceProperties:
    """Normals follow the winding order; areas are half the cross product."""

    def test_right_triangle(self):
        mesh = TriangleMesh.from_arrays([(0, 0, 0), (2, 0, 0), (0, 3, 0)], [(0, 1, 2)])
        normals, areas = face_properties(mesh)
        np.testing.assert_allclose(normals, [[0.0, 0.0, 1.0]])
        np.testing.assert_allclose(areas, [3.0])

    def test_reversed_winding_flips_normal(self):
        mesh = TriangleMesh.from_arrays([(0, 0, 0), (2, 0, 0), (0, 3, 0)], [(0, 2, 1)])
        np.testing.assert_allclose(mesh.face_normals, [[0.0, 0.0, -1.0]])

    def test_unit_normals(self):
        mesh = unit_cube()
        np.testing.assert_allclose(np.linalg.norm(mesh.face_normals, axis=1), 1.0, atol=1e-12)

    def test_zero_area_face_is_internal_error(self):
        with pytest.raises(DegenerateFaceError):
            TriangleMesh.from_arrays([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(0, 1, 2)])

    def test_sanitize_reports_removed(self):
        mesh, removed = sanitize([(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)], [(0, 1, 2), (0, 1, 3)])
        assert removed == 1
        assert mesh.face_count == 1

    def test_sanitize_rejects_non_finite_vertices(self):
        with pytest.raises(MeshParseError, match="non-finite"):
            sanitize([(0, 0, 0), (np.inf, 0, 0), (0, 1, 0), (0, 0, 1)], [(0, 1, 2), (0, 2, 3)])

    def test_arrays_are_read_only(self):
        mesh = unit_cube()
        with pytest.raises(ValueError):
            mesh.vertices[0, 0] = 5.0


class TestNormalize:
    """Centering and scaling onto the unit bounding sphere."""

    def test_offset_cube(self):
        cube = trimesh.creation.box(extents=(2.0, 2.0, 2.0))
        mesh = normalize(TriangleMesh.from_arrays(cube.vertices + 11.0, cube.faces))
        np.testing.assert_allclose(mesh.vertices.mean(axis=0), 0.0, atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-6)

    def test_idempotent(self, cube):
        again = normalize(cube)
        np.testing.assert_allclose(again.vertices, cube.vertices, atol=1e-9)
        np.testing.assert_allclose(again.face_areas, cube.face_areas, atol=1e-9)

    def test_scale_invariant(self, bumpy):
        scaled = TriangleMesh.from_arrays(bumpy.vertices * 5.0 + 3.0, bumpy.triangles)
        np.testing.assert_allclose(normalize(scaled).vertices, bumpy.vertices, atol=1e-6)

    def test_normals_kept_and_areas_rescaled(self):
        mesh = unit_cube()
        normalized = normalize(mesh)
        scale = 2.0 / math.sqrt(3.0)
        np.testing.assert_allclose(normalized.face_normals, mesh.face_normals)
        np.testing.assert_allclose(normalized.face_areas, mesh.face_areas * scale**2)
        np.testing.assert_allclose(normalized.face_areas, face_properties(normalized)[1], rtol=1e-9)


class TestBoundingSphere:
    """Minimal enclosing sphere."""

    def test_two_points(self):
        center, radius = bounding_sphere(np.array([(0.0, 0.0, 0.0), (2.0, 0.0, 0.0)]))
        np.testing.assert_allclose(center, [1.0, 0.0, 0.0])
        assert radius == pytest.approx(1.0)

    def test_interior_points_do_not_matter(self):
        rng = np.random.default_rng(3)
        tetra = np.array([(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=float)
        inside = rng.uniform(-0.5, 0.5, (200, 3))
        center, radius = bounding_sphere(np.vstack([tetra, inside]))
        np.testing.assert_allclose(center, 0.0, atol=1e-9)
        assert radius == pytest.approx(math.sqrt(3.0), abs=1e-9)

    def test_encloses_random_cloud(self):
        points = np.random.default_rng(11).normal(size=(500, 3))
        center, radius = bounding_sphere(points)
        assert np.linalg.norm(points - center, axis=1).max() <= radius * (1 + 1e-9)
