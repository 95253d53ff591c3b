import numpy as np
import pytest
from conftest import depth_map, disparity_map

from trapdist.geometry import (
    CameraIntrinsics,
    DepthKind,
    DimensionMismatchError,
    PointCloud,
    apply_affine_depth,
    disparity_to_approx_depth,
    export_pointcloud,
    focal_from_fov,
    read_pointcloud_ply,
    unproject,
)


class _Params:
    def __init__(self, scale, shift):
        self.scale = scale
        self.shift = shift


class TestFocalFromFov:
    def test_90_degree_fov_gives_half_width(self):
        assert focal_from_fov(640, 90) == pytest.approx(320.0, abs=1e-9)

    def test_width_848(self):
        assert focal_from_fov(848, 90) == pytest.approx(424.0, abs=1e-9)

    def test_two_pixel_width(self):
        assert focal_from_fov(2, 90) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("bad_fov", [0.0, 180.0, -10.0, 200.0])
    def test_fov_domain(self, bad_fov):
        with pytest.raises(ValueError):
            focal_from_fov(640, bad_fov)

    def test_bad_width(self):
        with pytest.raises(ValueError):
            focal_from_fov(0, 90)

    def test_strictly_decreasing_in_fov(self):
        fovs = np.linspace(10, 170, 50)
        focals = [focal_from_fov(640, f) for f in fovs]
        assert all(a > b for a, b in zip(focals, focals[1:]))


class TestCameraIntrinsics:
    def test_default_principal_point(self):
        intr = CameraIntrinsics(320.0, 640, 480)
        assert intr.principal_point == (319.5, 239.5)

    def test_explicit_principal_point(self):
        intr = CameraIntrinsics(320.0, 640, 480, principal_point=(320.0, 240.0))
        assert (intr.u0, intr.v0) == (320.0, 240.0)

    @pytest.mark.parametrize("focal,w,h", [(-1.0, 640, 480), (320.0, 0, 480), (320.0, 640, -2)])
    def test_invalid_fields(self, focal, w, h):
        with pytest.raises(ValueError):
            CameraIntrinsics(focal, w, h)

    def test_vendor_focal_mismatch_warns_not_raises(self):
        # A spec-sheet focal that disagrees with the FOV formula is trusted.
        with pytest.warns(UserWarning):
            intr = CameraIntrinsics(424.74, 848, 480, hfov_deg=90.0)
        assert intr.focal_px == 424.74

    def test_from_fov_consistent(self, recwarn):
        intr = CameraIntrinsics.from_fov(848, 480, 90.0)
        assert intr.focal_px == pytest.approx(424.0, abs=1e-9)
        assert not recwarn.list

    def test_json_round_trip(self):
        intr = CameraIntrinsics.from_fov(640, 480, 90.0)
        back = CameraIntrinsics.from_json_dict(intr.to_json_dict())
        assert back == intr


class TestDisparityToApproxDepth:
    def test_hand_case(self):
        d = disparity_to_approx_depth(disparity_map([[1.0]]), _Params(0.5, 0.5))
        assert d.values[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert d.kind is DepthKind.APPROXIMATE

    def test_zero_disparity_uses_shift(self):
        d = disparity_to_approx_depth(disparity_map([[0.0]]), _Params(1.0, 1.0))
        assert d.values[0, 0] == pytest.approx(1.0, abs=1e-9)

    def test_zero_denominator_invalidated(self):
        d = disparity_to_approx_depth(disparity_map([[1.0]]), _Params(1.0, -1.0))
        assert not d.valid[0, 0]

    def test_validity_monotone(self, rng):
        values = rng.uniform(0.1, 5.0, (10, 12))
        valid = rng.random((10, 12)) > 0.3
        d = disparity_to_approx_depth(disparity_map(values, valid), _Params(0.5, 0.1))
        assert not (d.valid & ~valid).any()


class TestApplyAffineDepth:
    def test_hand_case(self):
        d = apply_affine_depth(depth_map([[2.0]], kind=DepthKind.APPROXIMATE), _Params(3.0, 1.0))
        assert d.values[0, 0] == pytest.approx(7.0, abs=1e-9)
        assert d.kind is DepthKind.METRIC

    def test_identity(self, rng):
        values = rng.uniform(0.5, 20.0, (6, 7))
        src = depth_map(values, kind=DepthKind.APPROXIMATE)
        out = apply_affine_depth(src, _Params(1.0, 0.0))
        np.testing.assert_array_equal(out.values, src.values)
        np.testing.assert_array_equal(out.valid, src.valid)

    def test_nonpositive_result_invalidated(self):
        out = apply_affine_depth(depth_map([[1.0]], kind=DepthKind.APPROXIMATE), _Params(1.0, -2.0))
        assert not out.valid[0, 0]

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            apply_affine_depth(depth_map([[1.0]]), _Params(0.0, 1.0))

    def test_composition_closed_form(self, rng):
        # approx-then-affine equals m / (d*ms + cs) + c per pixel.
        values = rng.uniform(0.1, 10.0, (8, 9))
        d_hat = disparity_map(values)
        ms, cs = 0.7, 0.2
        m, c = 2.5, 0.3
        approx = disparity_to_approx_depth(d_hat, _Params(ms, cs))
        out = apply_affine_depth(approx, _Params(m, c))
        expected = m / (values * ms + cs) + c
        ok = out.valid
        np.testing.assert_allclose(out.values[ok], expected[ok], rtol=1e-9)


class TestUnproject:
    def test_optical_center(self):
        intr = CameraIntrinsics(320.0, 5, 5, principal_point=(2.0, 2.0))
        values = np.full((5, 5), 5.0)
        valid = np.zeros((5, 5), dtype=bool)
        valid[2, 2] = True
        cloud = unproject(depth_map(values, valid), intr)
        np.testing.assert_allclose(cloud.points[0], [0.0, 0.0, 5.0])

    def test_off_center_pixel(self):
        intr = CameraIntrinsics(320.0, 641, 481, principal_point=(320.0, 240.0))
        values = np.full((481, 641), 10.0)
        valid = np.zeros((481, 641), dtype=bool)
        valid[240, 640] = True
        cloud = unproject(depth_map(values, valid), intr)
        np.testing.assert_allclose(cloud.points[0], [10.0, 0.0, 10.0], atol=1e-12)

    def test_all_invalid_gives_empty_cloud(self):
        intr = CameraIntrinsics(320.0, 4, 3)
        cloud = unproject(depth_map(np.ones((3, 4)), np.zeros((3, 4), bool)), intr)
        assert len(cloud) == 0

    def test_dimension_mismatch(self):
        intr = CameraIntrinsics(320.0, 10, 10)
        with pytest.raises(DimensionMismatchError):
            unproject(depth_map(np.ones((3, 4))), intr)

    def test_reprojection_round_trip(self, rng):
        intr = CameraIntrinsics(211.7, 32, 24, principal_point=(15.2, 12.8))
        values = rng.uniform(0.5, 40.0, (24, 32))
        valid = rng.random((24, 32)) > 0.25
        d = depth_map(values, valid)
        cloud = unproject(d, intr)
        x, y, z = cloud.points.T
        u = x / z * intr.focal_px + intr.u0
        v = y / z * intr.focal_px + intr.v0
        np.testing.assert_allclose(u, cloud.source_pixel[:, 0], atol=1e-6)
        np.testing.assert_allclose(v, cloud.source_pixel[:, 1], atol=1e-6)
        np.testing.assert_array_equal(
            z, d.values[cloud.source_pixel[:, 1], cloud.source_pixel[:, 0]]
        )


class TestPlyExport:
    def test_single_point(self, tmp_path):
        cloud = PointCloud(np.array([[1.0, -2.0, 3.0]]), np.array([[4, 5]]))
        path = tmp_path / "one.ply"
        export_pointcloud(cloud, path)
        text = path.read_text()
        assert "element vertex 1" in text
        assert text.splitlines()[-1].split() == ["1", "-2", "3"]

    def test_round_trip_float32(self, tmp_path, rng):
        pts = rng.uniform(-50, 50, (200, 3))
        cloud = PointCloud(pts, np.zeros((200, 2), dtype=np.int64))
        path = tmp_path / "cloud.ply"
        export_pointcloud(cloud, path)
        back = read_pointcloud_ply(path)
        np.testing.assert_array_equal(back.astype(np.float32), pts.astype(np.float32))

    def test_empty_cloud_rejected(self, tmp_path):
        empty = PointCloud(np.empty((0, 3)), np.empty((0, 2), dtype=np.int64))
        with pytest.raises(ValueError):
            export_pointcloud(empty, tmp_path / "empty.ply")
