"""Candidate generation and mask containment, checked against pixel counting."""

import numpy as np
import pytest
from scipy import ndimage

from funscene import anchor2d
from funscene.anchor2d import DilationRadius, MockEdgeScorer, attach_score, mask_containment
from funscene.masks import RleMask
from funscene.model import DegenerateMaskError, Detection2D, EdgeCandidate2D, NodeKind

from tests.test_model import make_packet


def pixel_oracle(fine: np.ndarray, obj: np.ndarray, delta: int) -> float:
    """Independent containment computation by raw pixel counting."""
    dilated = obj
    if delta > 0:
        dilated = ndimage.binary_dilation(obj, np.ones((2 * delta + 1, 2 * delta + 1), bool))
    return float(np.logical_and(fine, dilated).sum()) / float(fine.sum())


class TestMaskContainment:
    def test_fully_inside(self):
        obj = RleMask.from_rect(2, 2, 18, 18, 24, 24)
        fine = RleMask.from_rect(5, 5, 10, 10, 24, 24)
        assert mask_containment(fine, obj, DilationRadius(0)) == 1.0

    def test_disjoint(self):
        obj = RleMask.from_rect(0, 0, 5, 5, 24, 24)
        fine = RleMask.from_rect(10, 10, 15, 15, 24, 24)
        assert mask_containment(fine, obj, DilationRadius(0)) == 0.0

    def test_four_pixel_half_inside(self):
        # 4-pixel fine mask; dilated object covers exactly 2 of its pixels
        obj_arr = np.zeros((16, 16), dtype=bool)
        obj_arr[4:8, 2:6] = True  # dilated by 1 -> columns 1..6
        fine_arr = np.zeros((16, 16), dtype=bool)
        fine_arr[5, 5:9] = True  # columns 5,6 covered; 7,8 not
        delta = 1
        expected = pixel_oracle(fine_arr, obj_arr, delta)
        assert expected == 0.5
        got = mask_containment(RleMask.from_array(fine_arr), RleMask.from_array(obj_arr),
                               DilationRadius(delta))
        assert got == expected

    def test_empty_fine_mask_rejected(self):
        obj = RleMask.from_rect(0, 0, 5, 5, 24, 24)
        fine = RleMask.from_rect(3, 3, 3, 3, 24, 24)
        with pytest.raises(DegenerateMaskError):
            mask_containment(fine, obj, DilationRadius(0))

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            fine = rng.random((20, 20)) > 0.8
            obj = rng.random((20, 20)) > 0.7
            if not fine.any():
                fine[4, 4] = True
            f, o = RleMask.from_array(fine), RleMask.from_array(obj)
            values = [mask_containment(f, o, DilationRadius(d)) for d in range(4)]
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_rect_fast_path_matches_raster(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x0, y0 = rng.integers(0, 10, 2)
            fine = RleMask.from_rect(x0, y0, x0 + rng.integers(1, 8), y0 + rng.integers(1, 8), 32, 32)
            ox0, oy0 = rng.integers(0, 12, 2)
            obj = RleMask.from_rect(ox0, oy0, ox0 + rng.integers(1, 16), oy0 + rng.integers(1, 16), 32, 32)
            if fine.is_empty():
                continue
            for delta in (0, 2):
                expected = pixel_oracle(fine.to_array(), obj.to_array(), delta)
                assert mask_containment(fine, obj, DilationRadius(delta)) == pytest.approx(expected)

    def test_radius_bound(self):
        obj = RleMask.from_rect(0, 0, 5, 5, 24, 24)
        fine = RleMask.from_rect(1, 1, 3, 3, 24, 24)
        with pytest.raises(ValueError, match="exceeds"):
            mask_containment(fine, obj, DilationRadius(10))


def _detection(category, kind, rect, confidence, grid=(160, 140)):
    w, h = grid
    mask = RleMask.from_rect(*rect, w, h)
    return Detection2D(
        frame_id=0,
        bbox=tuple(float(v) for v in rect),
        category=category,
        confidence=confidence,
        mask=mask,
        appearance=np.full(8, 1.0 / 8),
        kind=kind,
    )


class TestGenerateCandidates:
    def test_single_pair_all_gates_pass(self):
        packet = make_packet()
        packet.edge_candidates.clear()
        out = anchor2d.generate_candidates(packet)
        assert len(out) == 1
        cand = out[0]
        assert (cand.object_idx, cand.fine_idx) == (0, 1)
        assert cand.s_det == pytest.approx(0.8)
        assert cand.g_camc == 1.0
        assert cand.s_2d is None

    def test_low_confidence_gate(self):
        packet = make_packet()
        packet.detections[1].confidence = 0.2
        assert anchor2d.generate_candidates(packet) == []

    def test_two_objects_three_fines_enumeration(self):
        # overlapping objects: f1 inside A only, f2 inside the A/B overlap,
        # f3 inside B only; the oracle enumerates all 6 pairs by pixel counting
        obj_a = _detection("cabinet", NodeKind.OBJECT, (0, 0, 80, 100), 0.9)
        obj_b = _detection("cabinet", NodeKind.OBJECT, (60, 0, 150, 100), 0.9)
        f1 = _detection("handle", NodeKind.UNIT, (10, 10, 20, 20), 0.8)
        f2 = _detection("handle", NodeKind.UNIT, (62, 40, 78, 50), 0.8)
        f3 = _detection("handle", NodeKind.UNIT, (100, 60, 120, 80), 0.8)
        packet = make_packet()
        packet.detections[:] = [obj_a, obj_b, f1, f2, f3]
        packet.edge_candidates.clear()
        delta = anchor2d.default_dilation(packet.intrinsics.width)

        expected = []
        for oi, obj in ((0, obj_a), (1, obj_b)):
            for fi, fine in ((2, f1), (3, f2), (4, f3)):
                g = pixel_oracle(fine.mask.to_array(), obj.mask.to_array(), delta.delta)
                if g > 0.90:
                    expected.append((oi, fi))
        assert expected == [(0, 2), (0, 3), (1, 3), (1, 4)]

        out = anchor2d.generate_candidates(packet, delta)
        assert [(c.object_idx, c.fine_idx) for c in out] == expected

    def test_imap_restriction(self):
        packet = make_packet()
        packet.detections[1].category = "window"
        packet.edge_candidates.clear()
        assert anchor2d.generate_candidates(packet) == []

    def test_deterministic_order(self):
        packet = make_packet()
        a = anchor2d.generate_candidates(packet)
        b = anchor2d.generate_candidates(packet)
        assert [(c.object_idx, c.fine_idx) for c in a] == [(c.object_idx, c.fine_idx) for c in b]

    def test_removing_detection_never_adds(self):
        obj_a = _detection("cabinet", NodeKind.OBJECT, (0, 0, 60, 100), 0.9)
        f1 = _detection("handle", NodeKind.UNIT, (10, 10, 20, 20), 0.8)
        f2 = _detection("handle", NodeKind.UNIT, (30, 30, 40, 40), 0.8)
        packet = make_packet()
        packet.detections[:] = [obj_a, f1, f2]
        packet.edge_candidates.clear()
        full = {(c.object_idx, c.fine_idx) for c in anchor2d.generate_candidates(packet)}
        packet.detections[:] = [obj_a, f1]
        reduced = {(c.object_idx, c.fine_idx) for c in anchor2d.generate_candidates(packet)}
        assert reduced <= full


class TestAttachScore:
    def test_boundary_one_accepted(self):
        cand = EdgeCandidate2D(0, 0, 1, s_det=0.8, g_camc=1.0)
        assert attach_score(cand, 1.0).s_2d == 1.0

    def test_zero_rejected(self):
        cand = EdgeCandidate2D(0, 0, 1, s_det=0.8, g_camc=1.0)
        with pytest.raises(ValueError):
            attach_score(cand, 0.0)

    def test_exact_storage(self):
        cand = EdgeCandidate2D(0, 0, 1, s_det=0.8, g_camc=1.0)
        assert attach_score(cand, 0.73).s_2d == 0.73


class TestMockScorer:
    def test_zero_noise_is_pure_lookup(self):
        scorer = MockEdgeScorer({("cabinet", "handle"): 0.9}, noise_sigma=0.0)
        packet = make_packet()
        obj, fine = packet.detections
        assert scorer.score(obj, fine) == 0.9
        assert scorer.score(obj, fine) == 0.9

    def test_seeded_noise_deterministic(self):
        table = {("cabinet", "handle"): 0.8}
        packet = make_packet()
        obj, fine = packet.detections
        a = [MockEdgeScorer(table, 0.05, seed=4).score(obj, fine) for _ in range(3)]
        b = [MockEdgeScorer(table, 0.05, seed=4).score(obj, fine) for _ in range(3)]
        assert a == b

    def test_score_candidates_completes_prefilter_output(self):
        packet = make_packet()
        packet.edge_candidates.clear()
        raw = anchor2d.generate_candidates(packet)
        scorer = MockEdgeScorer({("cabinet", "handle"): 0.85})
        scored = anchor2d.score_candidates(packet, raw, scorer)
        assert [c.s_2d for c in scored] == [0.85]
        assert all(anchor2d.admissible(c, packet) for c in scored)
