import json
import math

import numpy as np
import pytest

from services.metrics import MetricParams
from services.viewsphere import camera_pose, make_grid
from services.vqf import (
    VQF,
    channel_heatmap,
    compare_vqf,
    compute_vqf,
    dssim_global,
    evaluate_viewpoint,
    load_vqf,
    minmax_normalize,
    save_vqf,
    silog_loss,
    ssim_global,
)
from tests.helpers import bumpy_sphere, random_vqf
from utils.errors import (
    ArtifactFormatError,
    ArtifactNotFoundError,
    GridMismatchError,
    InvalidParameterError,
    VQFSchemaError,
    VQFShapeError,
    VQFValueError,
)

SMALL_GRID = make_grid(6, 4)


@pytest.fixture(scope="module")
def small_vqf(bumpy):
    return compute_vqf(bumpy, SMALL_GRID, MetricParams(), resolution=48)


class TestComputeVqf:
    """Full-field evaluation."""

    def test_shape_and_ranges(self, small_vqf):
        assert small_vqf.values.shape == (4, 6, 3)
        occlusion = small_vqf.channel("occlusion_ratio")
        assert ((occlusion > 0.0) & (occlusion < 1.0)).all()
        assert (small_vqf.channel("normal_entropy") <= 8.0).all()
        assert (small_vqf.channel("visual_entropy") > 0.0).all()

    def test_entry_matches_single_viewpoint(self, bumpy, small_vqf, accel_for):
        index = 9
        quality, _, _ = evaluate_viewpoint(
            accel_for(bumpy), bumpy, camera_pose(SMALL_GRID, index), MetricParams(), 48
        )
        np.testing.assert_array_equal(small_vqf.quality(index).as_tuple(), quality.as_tuple())

    def test_thread_count_does_not_change_output(self, bumpy, small_vqf):
        threaded = compute_vqf(bumpy, SMALL_GRID, MetricParams(), resolution=48, threads=4)
        np.testing.assert_array_equal(threaded.values, small_vqf.values)

    def test_view_sink_sees_every_view(self, bumpy):
        grid = make_grid(2, 1)
        seen = []
        compute_vqf(bumpy, grid, MetricParams(), resolution=16, view_sink=lambda i, img, m: seen.append(i))
        assert sorted(seen) == [0, 1]

    def test_rejects_unnormalized_mesh(self):
        from services.mesh import TriangleMesh

        mesh = bumpy_sphere(seed=2)
        big = TriangleMesh.from_arrays(mesh.vertices * 3.0, mesh.triangles)
        with pytest.raises(InvalidParameterError, match="not normalized"):
            compute_vqf(big, SMALL_GRID, MetricParams(), resolution=16)

    @pytest.mark.slow
    def test_sphere_occlusion_everywhere(self, sphere, grid):
        vqf = compute_vqf(sphere, grid, MetricParams(), resolution=32, threads=4)
        np.testing.assert_allclose(vqf.channel("occlusion_ratio"), 0.7, atol=0.02)

    @pytest.mark.slow
    def test_rotation_about_z_shifts_azimuth_columns(self, grid):
        mesh = bumpy_sphere(seed=4)
        angle = math.radians(30.0)
        rotation = np.array(
            [[math.cos(angle), -math.sin(angle), 0.0], [math.sin(angle), math.cos(angle), 0.0], [0.0, 0.0, 1.0]]
        )
        original = compute_vqf(mesh, grid, MetricParams(), resolution=64, threads=4)
        rotated = compute_vqf(mesh.transformed(rotation), grid, MetricParams(), resolution=64, threads=4)
        shifted = np.roll(original.values, 1, axis=1)
        np.testing.assert_allclose(rotated.values[..., :2], shifted[..., :2], atol=1e-3)
        # a silhouette pixel may flip under rounding, nudging the gray histogram
        np.testing.assert_allclose(rotated.values[..., 2], shifted[..., 2], atol=2e-2)

    @pytest.mark.slow
    def test_visual_entropy_resolution_robust(self, grid, accel_for):
        for seed in range(5):
            mesh = bumpy_sphere(seed=20 + seed)
            camera = camera_pose(grid, 17 + 11 * seed)
            coarse, _, _ = evaluate_viewpoint(accel_for(mesh), mesh, camera, MetricParams(), 256)
            fine, _, _ = evaluate_viewpoint(accel_for(mesh), mesh, camera, MetricParams(), 512)
            assert abs(coarse.visual_entropy - fine.visual_entropy) / fine.visual_entropy < 0.05


class TestSerialization:
    """The .vqf.json document."""

    def test_save_load(self, small_vqf, tmp_path):
        path = str(tmp_path / "bumpy.vqf.json")
        save_vqf(small_vqf, path)
        assert load_vqf(path) == small_vqf

    def test_header(self, small_vqf, tmp_path):
        path = tmp_path / "bumpy.vqf.json"
        save_vqf(small_vqf, str(path))
        data = json.loads(path.read_text())
        assert data["schema_version"] == 1
        assert data["grid"] == {"n_az": 6, "n_pol": 4, "radius": 2.5, "fov_deg": 45.0}
        assert data["params"]["samples_per_face"] == 10
        assert data["render"]["resolution"] == 48
        assert data["channels"] == ["occlusion_ratio", "normal_entropy", "visual_entropy"]
        assert len(data["values"]) == 24
        assert data["values"][7] == list(small_vqf.values[1, 1])

    def test_byte_identical_rewrites(self, small_vqf, tmp_path):
        first, second = tmp_path / "a.vqf.json", tmp_path / "b.vqf.json"
        save_vqf(small_vqf, str(first))
        save_vqf(load_vqf(str(first)), str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactNotFoundError):
            load_vqf(str(tmp_path / "nope.vqf.json"))

    def test_wrong_schema_version(self, small_vqf):
        data = small_vqf.to_dict()
        data["schema_version"] = 2
        with pytest.raises(VQFSchemaError):
            VQF.from_dict(data)

    def test_wrong_entry_count(self, small_vqf):
        data = small_vqf.to_dict()
        data["values"] = data["values"][:-1]
        with pytest.raises(VQFShapeError):
            VQF.from_dict(data)

    def test_non_finite_value_names_index(self, small_vqf):
        data = small_vqf.to_dict()
        data["values"][5][1] = float("nan")
        with pytest.raises(VQFValueError, match="viewpoint 5"):
            VQF.from_dict(data)

    def test_out_of_range_value_names_index(self, small_vqf):
        data = small_vqf.to_dict()
        data["values"][3][0] = 1.5
        with pytest.raises(VQFValueError, match="viewpoint 3"):
            VQF.from_dict(data)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.vqf.json"
        path.write_text("{not json")
        with pytest.raises(ArtifactFormatError):
            load_vqf(str(path))


class TestLoss:
    """Composite comparison loss."""

    def test_identical_is_zero(self, small_vqf):
        report = compare_vqf(small_vqf, small_vqf)
        assert (report.l1, report.dssim, report.silog, report.total) == (0.0, 0.0, 0.0, 0.0)

    def test_silog_hand_fixture(self):
        pred = np.array([math.e, math.e**2])
        truth = np.array([1.0, 1.0])
        # d = (1, 2): mean(d^2) - 0.85 * mean(d)^2 = 2.5 - 0.85 * 2.25
        assert silog_loss(pred, truth, 0.85) == pytest.approx(0.5875, abs=1e-9)

    def test_silog_symmetric_pair(self):
        assert silog_loss(np.array([1.0, math.e]), np.array([math.e, 1.0]), 0.85) == pytest.approx(1.0, abs=1e-9)

    def test_silog_clamps_zero(self):
        value = silog_loss(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 0.85)
        assert math.isfinite(value)

    def test_total_is_weighted_sum(self):
        truth = random_vqf(SMALL_GRID, seed=1)
        pred = random_vqf(SMALL_GRID, seed=2)
        report = compare_vqf(pred, truth)
        assert report.lambdas == (0.3, 0.4, 0.3)
        assert report.silog_lambda == 0.85
        assert report.total == pytest.approx(0.3 * report.l1 + 0.4 * report.dssim + 0.3 * report.silog, abs=1e-12)
        assert report.l1 > 0.0

    def test_l1_uses_normalized_channels(self):
        truth = random_vqf(SMALL_GRID, seed=3)
        values = np.array(truth.values)
        values[..., 1] = np.clip(values[..., 1] + 0.8, 0.0, 8.0)
        pred = truth.with_values(values)
        expected = np.mean(np.abs(values[..., 1] - truth.values[..., 1]) / 8.0) / 3.0
        assert compare_vqf(pred, truth).l1 == pytest.approx(expected, abs=1e-12)

    def test_silog_two_viewpoint_fixture(self):
        pred = np.array([0.4, 0.8])
        truth = np.array([0.2, 0.4])
        assert silog_loss(pred, truth, 0.85) == pytest.approx(0.15 * math.log(2.0) ** 2, abs=1e-12)

    def test_symmetric_in_every_term(self):
        a = random_vqf(SMALL_GRID, seed=7)
        b = random_vqf(SMALL_GRID, seed=8)
        forward, backward = compare_vqf(a, b), compare_vqf(b, a)
        assert forward.l1 == pytest.approx(backward.l1, abs=1e-15)
        assert forward.dssim == pytest.approx(backward.dssim, abs=1e-15)
        assert forward.silog == pytest.approx(backward.silog, abs=1e-12)

    def test_constant_shift(self):
        params = MetricParams()
        scale = np.array([1.0, params.max_normal_entropy, params.max_visual_entropy])
        normalized = np.random.default_rng(9).uniform(0.0, 0.9, SMALL_GRID.shape + (3,))
        truth = VQF(SMALL_GRID, params, "truth", normalized * scale)
        pred = truth.with_values((normalized + 0.1) * scale)
        report = compare_vqf(pred, truth)
        assert report.l1 == pytest.approx(0.1, abs=1e-12)

        dssim = []
        for column in range(3):
            x = (normalized + 0.1)[..., column].ravel().tolist()
            y = normalized[..., column].ravel().tolist()
            n = len(x)
            mean_x, mean_y = sum(x) / n, sum(y) / n
            var_x = sum((value - mean_x) ** 2 for value in x) / n
            var_y = sum((value - mean_y) ** 2 for value in y) / n
            cov = sum((p - mean_x) * (q - mean_y) for p, q in zip(x, y)) / n
            ssim = ((2 * mean_x * mean_y + 0.01**2) * (2 * cov + 0.03**2)) / (
                (mean_x**2 + mean_y**2 + 0.01**2) * (var_x + var_y + 0.03**2)
            )
            dssim.append((1.0 - ssim) / 2.0)
        assert report.dssim == pytest.approx(sum(dssim) / 3.0, abs=1e-9)
        assert 0.0 < report.dssim < 0.05

    def test_ssim_identity_and_range(self):
        x = np.random.default_rng(0).uniform(size=100)
        assert ssim_global(x, x) == pytest.approx(1.0, abs=1e-15)
        assert 0.0 <= dssim_global(x, 1.0 - x) <= 1.0

    def test_grid_mismatch(self, small_vqf):
        other = random_vqf(make_grid(6, 5), seed=0)
        with pytest.raises(GridMismatchError, match="4x6"):
            compare_vqf(small_vqf, other)

    def test_params_mismatch(self):
        a = random_vqf(SMALL_GRID, seed=0)
        b = random_vqf(SMALL_GRID, seed=0, params=MetricParams(samples_per_face=20))
        with pytest.raises(GridMismatchError):
            compare_vqf(a, b)


class TestHeatmap:
    """Channel images."""

    def test_shape_and_range(self, small_vqf):
        image = channel_heatmap(small_vqf, "visual_entropy")
        assert image.pixels.shape == (4, 6)
        assert image.pixels.min() == 0.0
        assert image.pixels.max() == 1.0

    def test_occlusion_is_drawn_as_visible_ratio(self, small_vqf):
        image = channel_heatmap(small_vqf, "occlusion")
        brightest = np.unravel_index(np.argmax(image.pixels), image.pixels.shape)
        assert brightest == np.unravel_index(np.argmin(small_vqf.channel("occlusion_ratio")), (4, 6))

    def test_constant_field_is_mid_gray(self):
        values = np.tile([0.4, 2.0, 3.0], (4, 6, 1))
        vqf = VQF(SMALL_GRID, MetricParams(), "flat", values)
        for channel in ("occlusion", "normal_entropy", "visual_entropy", "combined"):
            np.testing.assert_array_equal(channel_heatmap(vqf, channel).pixels, 0.5)

    def test_combined_projection(self, small_vqf):
        combined = channel_heatmap(small_vqf, "combined", weights=(1.0, 0.0, 0.0))
        np.testing.assert_allclose(combined.pixels, channel_heatmap(small_vqf, "occlusion").pixels, atol=1e-12)

    def test_unknown_channel(self, small_vqf):
        with pytest.raises(InvalidParameterError):
            channel_heatmap(small_vqf, "depth")

    def test_channel_scale_does_not_change_the_image(self, small_vqf):
        values = np.array(small_vqf.values)
        values[..., 0] *= 0.5
        values[..., 2] *= 0.25
        scaled = small_vqf.with_values(values)
        for channel in ("occlusion", "visual_entropy"):
            np.testing.assert_allclose(
                channel_heatmap(scaled, channel).pixels, channel_heatmap(small_vqf, channel).pixels, atol=1e-12
            )

    def test_single_best_cell_is_the_only_white_pixel(self):
        values = np.tile([0.5, 2.0, 3.0], (4, 6, 1))
        values[2, 3, 2] = 5.0
        image = channel_heatmap(VQF(SMALL_GRID, MetricParams(), "peak", values), "visual_entropy")
        assert np.argwhere(image.pixels == 1.0).tolist() == [[2, 3]]

    def test_minmax_normalize(self):
        np.testing.assert_allclose(minmax_normalize(np.array([2.0, 4.0, 3.0])), [0.0, 1.0, 0.5])
