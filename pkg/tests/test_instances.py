import json

import numpy as np
import pytest
from conftest import depth_map
from hypothesis import given, settings
from hypothesis import strategies as st

from trapdist.instances import (
    AttentionMap,
    Detection,
    DetectionParseError,
    InstanceMask,
    NoValidDepthError,
    detection_pixel_rect,
    expand_bbox,
    ingest_detections,
    instance_distance,
    read_distances_csv,
    threshold_attention,
    write_distances_csv,
)


def det(bbox, conf=0.9, frame=0):
    return Detection(bbox=bbox, confidence=conf, category="1", frame_id=frame)


def attention_for(detection, image_size, fill=0.0):
    ex, ey, ew, eh = expand_bbox(detection, image_size)
    return AttentionMap(np.full((eh, ew), fill), (ex, ey), (ew, eh)), (ex, ey, ew, eh)


class TestExpandBbox:
    def test_doubling_with_clipping(self):
        assert expand_bbox(det((0.1, 0.1, 0.2, 0.1)), (100, 100)) == (0, 5, 40, 20)

    def test_centered_box_exact_double(self):
        assert expand_bbox(det((0.4, 0.4, 0.2, 0.2)), (100, 100)) == (30, 30, 40, 40)

    def test_corner_box_clipped(self):
        assert expand_bbox(det((0.0, 0.0, 0.1, 0.1)), (100, 100)) == (0, 0, 15, 15)

    @given(
        x=st.floats(0, 0.9),
        y=st.floats(0, 0.9),
        w=st.floats(0.01, 0.5),
        h=st.floats(0.01, 0.5),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounds_and_area(self, x, y, w, h):
        w = min(w, 1.0 - x)
        h = min(h, 1.0 - y)
        d = det((x, y, w, h))
        ex, ey, ew, eh = expand_bbox(d, (320, 240))
        bx, by, bw, bh = detection_pixel_rect(d, (320, 240))
        assert 0 <= ex and 0 <= ey
        assert ex + ew <= 320 and ey + eh <= 240
        assert ew * eh <= 4 * bw * bh
        # The expanded rect always contains the original rect.
        assert ex <= bx and ey <= by
        assert ex + ew >= bx + bw and ey + eh >= by + bh


class TestThresholdAttention:
    def test_uniform_attention_selects_whole_box(self):
        d = det((0.2, 0.2, 0.2, 0.2))
        att, _ = attention_for(d, (100, 100), fill=0.5)
        mask = threshold_attention(att, d, (100, 100))
        assert len(mask) == 20 * 20
        bx, by, bw, bh = detection_pixel_rect(d, (100, 100))
        assert mask.pixels[:, 0].min() == bx and mask.pixels[:, 0].max() == bx + bw - 1

    def test_threshold_is_ten_percent_of_peak(self):
        d = det((0.2, 0.2, 0.2, 0.2))
        att, (ex, ey, ew, eh) = attention_for(d, (100, 100))
        values = att.values.copy()
        values[25 - ey, 25 - ex] = 0.8
        values[26 - ey, 26 - ex] = 0.079  # just below 10% of 0.8
        values[27 - ey, 27 - ex] = 0.081  # just above
        att2 = AttentionMap(values, att.crop_origin, att.crop_size)
        mask = threshold_attention(att2, d, (100, 100))
        got = set(map(tuple, mask.pixels))
        assert (25, 25) in got and (27, 27) in got and (26, 26) not in got

    def test_all_zero_attention_empty_mask(self):
        d = det((0.2, 0.2, 0.2, 0.2))
        att, _ = attention_for(d, (100, 100), fill=0.0)
        assert len(threshold_attention(att, d, (100, 100))) == 0

    def test_single_peak_pixel(self):
        d = det((0.2, 0.2, 0.2, 0.2))
        att, (ex, ey, _, _) = attention_for(d, (100, 100))
        values = att.values.copy()
        values[22 - ey, 23 - ex] = 1.0
        att2 = AttentionMap(values, att.crop_origin, att.crop_size)
        mask = threshold_attention(att2, d, (100, 100))
        assert mask.pixels.tolist() == [[23, 22]]

    def test_invariant_under_positive_rescaling(self, rng):
        d = det((0.1, 0.3, 0.3, 0.25))
        att, _ = attention_for(d, (100, 100))
        values = rng.random(att.values.shape)
        a = AttentionMap(values, att.crop_origin, att.crop_size)
        b = AttentionMap(values * 37.5, att.crop_origin, att.crop_size)
        np.testing.assert_array_equal(
            threshold_attention(a, d, (100, 100)).pixels,
            threshold_attention(b, d, (100, 100)).pixels,
        )

    def test_mask_confined_to_original_box(self, rng):
        d = det((0.3, 0.3, 0.2, 0.2))
        att, _ = attention_for(d, (100, 100))
        a = AttentionMap(rng.random(att.values.shape), att.crop_origin, att.crop_size)
        mask = threshold_attention(a, d, (100, 100))
        bx, by, bw, bh = detection_pixel_rect(d, (100, 100))
        assert (mask.pixels[:, 0] >= bx).all() and (mask.pixels[:, 0] < bx + bw).all()
        assert (mask.pixels[:, 1] >= by).all() and (mask.pixels[:, 1] < by + bh).all()

    def test_crop_must_cover_expanded_box(self):
        d = det((0.2, 0.2, 0.2, 0.2))
        small = AttentionMap(np.ones((5, 5)), (20, 20), (5, 5))
        with pytest.raises(ValueError):
            threshold_attention(small, d, (100, 100))


def mask_at(pixels, detection):
    return InstanceMask(np.array(pixels, dtype=np.int64), detection)


class TestInstanceDistance:
    def depth_with(self, coords_values, shape=(100, 100), background=50.0):
        values = np.full(shape, background)
        for (u, v), z in coords_values.items():
            values[v, u] = z
        return depth_map(values)

    def test_odd_count_median(self):
        d = det((0.1, 0.1, 0.3, 0.3))
        depth = self.depth_with({(10, 10): 2.0, (11, 10): 4.0, (12, 10): 9.0})
        dist = instance_distance(mask_at([(10, 10), (11, 10), (12, 10)], d), depth)
        assert dist.distance_m == 4.0
        assert dist.n_pixels == 3 and not dist.fallback_used

    def test_even_count_median_mean_of_middle(self):
        d = det((0.1, 0.1, 0.3, 0.3))
        depth = self.depth_with({(10, 10): 2.0, (11, 10): 4.0})
        dist = instance_distance(mask_at([(10, 10), (11, 10)], d), depth)
        assert dist.distance_m == 3.0

    def test_single_pixel(self):
        d = det((0.1, 0.1, 0.3, 0.3))
        depth = self.depth_with({(15, 15): 7.3})
        dist = instance_distance(mask_at([(15, 15)], d), depth)
        assert dist.distance_m == 7.3 and dist.n_pixels == 1

    def test_invalid_pixels_excluded(self):
        d = det((0.1, 0.1, 0.3, 0.3))
        values = np.full((100, 100), 50.0)
        values[10, 10], values[10, 11] = 2.0, 9.0
        valid = np.ones((100, 100), bool)
        valid[10, 11] = False
        dist = instance_distance(
            mask_at([(10, 10), (11, 10)], d), depth_map(values, valid)
        )
        assert dist.distance_m == 2.0

    def test_empty_mask_falls_back_to_box_median(self):
        d = det((0.1, 0.1, 0.2, 0.2))  # pixel rect (10,10,20,20)
        values = np.full((100, 100), 50.0)
        values[10:30, 10:30] = 6.5
        dist = instance_distance(mask_at(np.empty((0, 2)), d), depth_map(values))
        assert dist.fallback_used
        assert dist.distance_m == 6.5
        assert dist.n_pixels == 400

    def test_fully_invalid_mask_falls_back(self):
        d = det((0.1, 0.1, 0.2, 0.2))
        values = np.full((100, 100), 8.0)
        valid = np.ones((100, 100), bool)
        valid[15, 15] = False
        dist = instance_distance(mask_at([(15, 15)], d), depth_map(values, valid))
        assert dist.fallback_used and dist.distance_m == 8.0

    def test_no_valid_depth_in_box_raises(self):
        d = det((0.1, 0.1, 0.2, 0.2))
        valid = np.ones((100, 100), bool)
        valid[10:30, 10:30] = False
        depth = depth_map(np.full((100, 100), 5.0), valid)
        with pytest.raises(NoValidDepthError):
            instance_distance(mask_at(np.empty((0, 2)), d), depth)

    def test_permutation_invariance(self, rng):
        d = det((0.0, 0.0, 0.5, 0.5))
        values = rng.uniform(1, 30, (100, 100))
        depth = depth_map(values)
        pixels = [(u, v) for u in range(5, 15) for v in range(5, 15)]
        base = instance_distance(mask_at(pixels, d), depth).distance_m
        perm = [pixels[i] for i in rng.permutation(len(pixels))]
        assert instance_distance(mask_at(perm, d), depth).distance_m == base

    @given(st.lists(st.floats(0.5, 40.0), min_size=1, max_size=30), st.floats(40.5, 60.0))
    @settings(max_examples=100, deadline=None)
    def test_adding_pixel_above_median_never_lowers(self, depths, extra):
        d = det((0.0, 0.0, 1.0, 1.0))
        coords = [(i % 50, i // 50) for i in range(len(depths) + 1)]
        values = np.full((50, 50), 1.0)
        for (u, v), z in zip(coords, depths + [extra]):
            values[v, u] = z
        depth = depth_map(values)
        base = instance_distance(mask_at(coords[:-1], d), depth).distance_m
        grown = instance_distance(mask_at(coords, d), depth).distance_m
        assert grown >= base


class TestIngestDetections:
    def write(self, tmp_path, doc):
        path = tmp_path / "dets.json"
        path.write_text(json.dumps(doc))
        return path

    def test_single_record(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "images": [
                    {
                        "file": "frame_000007.png",
                        "detections": [
                            {"category": "1", "conf": 0.95, "bbox": [0.1, 0.2, 0.3, 0.4]}
                        ],
                    }
                ]
            },
        )
        dets = ingest_detections(path)
        assert len(dets) == 1
        assert dets[0].frame_id == 7
        assert dets[0].bbox == (0.1, 0.2, 0.3, 0.4)
        assert dets[0].source == "frame_000007"

    def test_bbox_clamped(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "images": [
                    {
                        "file": "f1.png",
                        "detections": [
                            {"category": "1", "conf": 0.9, "bbox": [0.9, -1e-9, 0.2, 1.0000001]}
                        ],
                    }
                ]
            },
        )
        (d,) = ingest_detections(path)
        x, y, w, h = d.bbox
        assert x + w <= 1.0 and y >= 0.0 and y + h <= 1.0

    def test_confidence_floor(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "images": [
                    {
                        "file": "f1.png",
                        "detections": [
                            {"category": "1", "conf": 0.1, "bbox": [0.1, 0.1, 0.2, 0.2]},
                            {"category": "1", "conf": 0.3, "bbox": [0.5, 0.5, 0.2, 0.2]},
                        ],
                    }
                ]
            },
        )
        dets = ingest_detections(path, min_confidence=0.2)
        assert len(dets) == 1 and dets[0].confidence == 0.3

    def test_invalid_json_reports_path(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(DetectionParseError, match="bad.json"):
            ingest_detections(path)

    def test_bad_record_reports_index(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "images": [
                    {"file": "a.png", "detections": []},
                    {"file": "b.png", "detections": [{"category": "1", "conf": 0.9}]},
                ]
            },
        )
        with pytest.raises(DetectionParseError, match=r"images\[1\]"):
            ingest_detections(path)

    def test_frame_id_fallback_to_index(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "images": [
                    {"file": "nodigits.png", "detections": [
                        {"category": "1", "conf": 0.9, "bbox": [0.1, 0.1, 0.2, 0.2]}
                    ]}
                ]
            },
        )
        assert ingest_detections(path)[0].frame_id == 0


class TestDistancesCsv:
    def test_round_trip(self, tmp_path):
        from trapdist.instances import InstanceDistance

        rows = [
            (0, 0, "1", 0.9, InstanceDistance(5.25, 120, False)),
            (1, 0, "2", 0.5, InstanceDistance(10.125, 1, True)),
        ]
        path = tmp_path / "d.csv"
        write_distances_csv(path, rows)
        back = read_distances_csv(path)
        assert back[0]["distance_m"] == 5.25 and not back[0]["fallback"]
        assert back[1]["fallback"] and back[1]["n_pixels"] == 1

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_distances_csv(path)
