import numpy as np
import pytest

from trapdist.alignment import (
    AffineDepthParams,
    RansacConfig,
    Space,
    ransac_align_disparity,
)
from trapdist.geometry import CameraIntrinsics, unproject
from trapdist.instances import ingest_detections, instance_distance
from trapdist.synth import (
    AnimalSpec,
    DisparityTruth,
    FrustumError,
    SceneSpec,
    SceneSpecError,
    load_scene_spec,
    render_frame,
    render_scene,
    scene_from_dict,
    synth_disparity,
    write_dataset,
)

PARAMS = AffineDepthParams(0.02, 0.01, Space.DISPARITY)


def scene(animals=(), n_frames=3, seed=0, dropout=0.0, width=160, height=120):
    return SceneSpec(
        intrinsics=CameraIntrinsics.from_fov(width, height, 90.0),
        ground_height_m=3.0,
        ground_tilt_deg=15.0,
        animals=tuple(animals),
        n_frames=n_frames,
        seed=seed,
        dropout_frac=dropout,
    )


def spec_doc(**overrides):
    doc = {
        "intrinsics": {"width": 160, "height": 120, "hfov_deg": 90},
        "ground_plane": {"height_m": 3.0, "tilt_deg": 15.0},
        "animals": [
            {"size_m": 1.0, "position": [0.0, 1.0, 6.0], "velocity": [0.05, 0.0, 0.0]}
        ],
        "n_frames": 3,
        "seed": 1,
    }
    doc.update(overrides)
    return doc


class TestRenderScene:
    def test_static_animal_distance_exactly_planted(self):
        spec = scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0.0, 0.0, 0.0))])
        ft = render_frame(spec, 0)
        assert ft.animal_z == [5.0]
        dist = instance_distance(ft.masks[0], ft.depth_gt)
        assert dist.distance_m == 5.0 and not dist.fallback_used

    def test_near_animal_occludes_far(self):
        near = AnimalSpec(1.0, (0.0, 1.0, 4.0), (0.0, 0.0, 0.0))
        far = AnimalSpec(2.0, (0.0, 1.0, 8.0), (0.0, 0.0, 0.0))
        ft = render_frame(scene([far, near]), 0)
        # Where the two rectangles overlap, the nearer depth wins.
        x0, y0, w, h = ft.animal_rects[1]  # the near animal's rect
        window = ft.depth_gt.values[y0 : y0 + h, x0 : x0 + w]
        assert (window == 4.0).all()

    def test_empty_scene_is_pure_ground_plane(self):
        ft = render_frame(scene([]), 0)
        assert ft.detections == [] and ft.masks == []
        v = np.arange(120)
        intr = scene([]).intrinsics
        theta = np.radians(15.0)
        den = np.cos(theta) * (v - intr.v0) / intr.focal_px + np.sin(theta)
        row_ok = den > 1e-12
        expected = np.where(row_ok, 3.0 / np.where(row_ok, den, 1.0), 0.0)
        got = ft.depth_gt.values[:, 80]
        valid = ft.depth_gt.valid[:, 80]
        np.testing.assert_allclose(got[valid], expected[valid], rtol=1e-12)

    def test_unproject_centroid_depth(self):
        spec = scene([AnimalSpec(1.2, (0.5, 1.0, 7.0), (0.0, 0.0, 0.0))])
        ft = render_frame(spec, 0)
        cloud = unproject(ft.depth_gt, spec.intrinsics)
        x0, y0, w, h = ft.animal_rects[0]
        us, vs = cloud.source_pixel[:, 0], cloud.source_pixel[:, 1]
        inside = (us >= x0) & (us < x0 + w) & (vs >= y0) & (vs < y0 + h)
        assert abs(cloud.points[inside, 2].mean() - 7.0) < 1e-6

    def test_animal_motion_across_frames(self):
        spec = scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0.0, 0.0, 0.5))], n_frames=4)
        frames = render_scene(spec)
        assert [ft.animal_z[0] for ft in frames] == [5.0, 5.5, 6.0, 6.5]

    def test_out_of_range_depth_rejected(self):
        spec = scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0.0, 0.0, -1.0))], n_frames=6)
        with pytest.raises(FrustumError):
            render_scene(spec)

    def test_off_image_animal_rejected(self):
        spec = scene([AnimalSpec(0.5, (50.0, 1.0, 5.0), (0.0, 0.0, 0.0))])
        with pytest.raises(FrustumError):
            render_frame(spec, 0)

    def test_dropout_invalidates_pixels(self):
        clean = render_frame(scene([]), 0)
        dropped = render_frame(scene([], dropout=0.3), 0)
        assert dropped.depth_gt.valid.sum() < clean.depth_gt.valid.sum()

    def test_deterministic(self):
        spec = scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0.1, 0.0, 0.0))], dropout=0.1)
        a = render_frame(spec, 1)
        b = render_frame(spec, 1)
        np.testing.assert_array_equal(a.depth_gt.values, b.depth_gt.values)
        np.testing.assert_array_equal(a.depth_gt.valid, b.depth_gt.valid)

    def test_attention_crop_covers_expanded_box(self):
        spec = scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0.0, 0.0, 0.0))])
        ft = render_frame(spec, 0)
        att = ft.attention[0]
        assert att.values.max() == 1.0
        assert att.values.sum() == len(ft.masks[0])


class TestSynthDisparity:
    def test_closed_loop_recovery(self):
        ft = render_frame(scene([AnimalSpec(1.0, (0.0, 1.0, 5.0), (0, 0, 0))]), 0)
        d_hat = synth_disparity(ft.depth_gt, PARAMS)
        fit = ransac_align_disparity(d_hat, ft.depth_gt, RansacConfig())
        assert fit.scale == pytest.approx(PARAMS.scale, abs=1e-6)
        assert fit.shift == pytest.approx(PARAMS.shift, abs=1e-6)

    def test_noise_recovery_scales(self):
        ft = render_frame(scene([]), 0)
        d_hat = synth_disparity(ft.depth_gt, PARAMS, noise_std=0.01, seed=4)
        fit = ransac_align_disparity(d_hat, ft.depth_gt)
        assert fit.scale == pytest.approx(PARAMS.scale, rel=0.05)

    def test_outlier_recovery(self):
        ft = render_frame(scene([]), 0)
        d_hat = synth_disparity(ft.depth_gt, PARAMS, outlier_frac=0.3, seed=9)
        fit = ransac_align_disparity(d_hat, ft.depth_gt, RansacConfig(seed=2))
        assert fit.scale == pytest.approx(PARAMS.scale, rel=0.01)
        assert fit.shift == pytest.approx(PARAMS.shift, rel=0.01)

    def test_zero_scale_rejected(self):
        ft = render_frame(scene([]), 0)
        with pytest.raises(ValueError):
            synth_disparity(ft.depth_gt, AffineDepthParams(0.0, 0.1, Space.DISPARITY))

    def test_validity_mirrors_ground_truth(self):
        ft = render_frame(scene([], dropout=0.2), 0)
        d_hat = synth_disparity(ft.depth_gt, PARAMS)
        np.testing.assert_array_equal(d_hat.valid, ft.depth_gt.valid)


class TestSceneSpecParsing:
    def test_valid_document(self):
        spec, truth = scene_from_dict(spec_doc())
        assert spec.n_frames == 3
        assert truth.params.scale == 0.02
        assert spec.intrinsics.focal_px == pytest.approx(80.0)

    def test_yaml_file(self, tmp_path):
        import yaml

        path = tmp_path / "scene.yaml"
        path.write_text(yaml.safe_dump(spec_doc()))
        spec, _ = load_scene_spec(path)
        assert spec.intrinsics.width == 160

    @pytest.mark.parametrize(
        "patch,needle",
        [
            ({"n_frames": 0}, "n_frames"),
            ({"ground_plane": {"height_m": -1, "tilt_deg": 5}}, "height_m"),
            ({"intrinsics": {"width": 160, "height": 120}}, "intrinsics"),
            (
                {"animals": [{"size_m": -1, "position": [0, 1, 5], "velocity": [0, 0, 0]}]},
                "animals[0].size_m",
            ),
            (
                {"animals": [{"size_m": 1, "position": [0, 1, 80], "velocity": [0, 0, 0]}]},
                "animals[0].position",
            ),
            ({"disparity": {"scale": 0}}, "disparity.scale"),
        ],
    )
    def test_field_path_in_errors(self, patch, needle):
        with pytest.raises(SceneSpecError, match=__import__("re").escape(needle)):
            scene_from_dict(spec_doc(**patch))


class TestWriteDataset:
    def test_layout_and_ingestion_round_trip(self, tmp_path):
        spec, _ = scene_from_dict(spec_doc())
        truth = DisparityTruth(PARAMS)
        out = tmp_path / "ds"
        write_dataset(spec, truth, out)
        assert (out / "detections.json").exists()
        assert (out / "intrinsics.json").exists()
        assert len(list((out / "disparity").glob("*.pfm"))) == 3
        assert len(list((out / "depth_gt").glob("*.png"))) == 3
        assert len(list((out / "attention").glob("*.pfm"))) == 3
        dets = ingest_detections(out / "detections.json")
        assert len(dets) == 3
        assert dets[0].frame_id == 0 and dets[2].frame_id == 2
        rendered = render_frame(spec, 0).detections[0]
        assert dets[0].bbox == rendered.bbox

    def test_byte_identical_reruns(self, tmp_path):
        spec, truth = scene_from_dict(spec_doc())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        write_dataset(spec, truth, out_a)
        write_dataset(spec, truth, out_b)
        files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes(), rel
