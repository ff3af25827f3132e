"""2D functional edge candidate generation and pre-filtering.

Candidate (object <- fine) pairs are proposed from a frame's detections,
gated by the interactability map, a joint detection-confidence floor and a
mask containment ratio computed against the dilated object mask.  The
visual-semantic support score is an adapter input, validated here but never
computed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from funscene.masks import RleMask
from funscene.model import (
    DegenerateMaskError,
    Detection2D,
    EdgeCandidate2D,
    FramePacket,
    InteractabilityMap,
    NodeKind,
)

TAU_DET = 0.25
TAU_GEO = 0.90

# Dilation tolerates segmentation contour errors; 3 px at 640 px width,
# scaled with resolution.
BASE_DILATION_PX = 3
BASE_IMAGE_WIDTH = 640


@dataclass(frozen=True)
class DilationRadius:
    delta: int

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("dilation radius must be >= 0")

    def check_against(self, width: int, height: int) -> None:
        limit = min(width, height) / 4
        if self.delta > limit:
            raise ValueError(f"dilation radius {self.delta} exceeds min(w,h)/4 = {limit}")


def default_dilation(width: int) -> DilationRadius:
    return DilationRadius(max(1, round(BASE_DILATION_PX * width / BASE_IMAGE_WIDTH)))


def mask_containment(fine_mask: RleMask, object_mask: RleMask, delta: DilationRadius) -> float:
    """Fraction of the fine mask covered by the dilated object mask.

    Monotone non-decreasing in the dilation radius.  Rectangular masks are
    resolved analytically; general rasters go through a morphological
    dilation with a square structuring element.
    """
    if fine_mask.width != object_mask.width or fine_mask.height != object_mask.height:
        raise ValueError("masks must share one grid")
    if fine_mask.is_empty():
        raise DegenerateMaskError("fine mask is empty; containment undefined")
    delta.check_against(fine_mask.width, fine_mask.height)

    fine_rect = fine_mask.as_rect()
    obj_rect = object_mask.as_rect()
    if fine_rect is not None and obj_rect is not None:
        return _rect_containment(fine_rect, obj_rect, delta.delta, fine_mask.width, fine_mask.height)

    fine = fine_mask.to_array()
    obj = object_mask.to_array()
    if delta.delta > 0:
        size = 2 * delta.delta + 1
        obj = ndimage.binary_dilation(obj, structure=np.ones((size, size), dtype=bool))
    inter = int(np.count_nonzero(fine & obj))
    return inter / fine_mask.area


def _rect_containment(fine_rect, obj_rect, delta: int, width: int, height: int) -> float:
    fx0, fy0, fx1, fy1 = fine_rect
    ox0, oy0, ox1, oy1 = obj_rect
    dx0, dy0 = max(0, ox0 - delta), max(0, oy0 - delta)
    dx1, dy1 = min(width, ox1 + delta), min(height, oy1 + delta)
    ix0, iy0 = max(fx0, dx0), max(fy0, dy0)
    ix1, iy1 = min(fx1, dx1), min(fy1, dy1)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / ((fx1 - fx0) * (fy1 - fy0))


def generate_candidates(
    packet: FramePacket, delta: DilationRadius | None = None
) -> list[EdgeCandidate2D]:
    """Enumerate the (object, fine) pairs passing all three pre-filter gates.

    Output is deterministic, ordered by (object index, fine index), and
    carries no support score.
    """
    if delta is None:
        delta = default_dilation(packet.intrinsics.width)
    out: list[EdgeCandidate2D] = []
    for oi, obj in enumerate(packet.detections):
        if obj.kind is not NodeKind.OBJECT:
            continue
        for fi, fine in enumerate(packet.detections):
            if not fine.kind.is_fine:
                continue
            if not packet.imap.allows_fine(fine.category, obj.category):
                continue
            s_det = min(obj.confidence, fine.confidence)
            if s_det <= TAU_DET:
                continue
            if fine.mask.is_empty():
                continue
            g = mask_containment(fine.mask, obj.mask, delta)
            if g <= TAU_GEO:
                continue
            out.append(
                EdgeCandidate2D(
                    frame_id=packet.frame_id,
                    object_idx=oi,
                    fine_idx=fi,
                    s_det=s_det,
                    g_camc=g,
                )
            )
    return out


def attach_score(candidate: EdgeCandidate2D, s: float) -> EdgeCandidate2D:
    """Complete a candidate with its visual-semantic support score."""
    if not (0.0 < s <= 1.0):
        raise ValueError(f"support score must lie in (0, 1], got {s}")
    return EdgeCandidate2D(
        frame_id=candidate.frame_id,
        object_idx=candidate.object_idx,
        fine_idx=candidate.fine_idx,
        s_det=candidate.s_det,
        g_camc=candidate.g_camc,
        s_2d=float(s),
    )


def admissible(candidate: EdgeCandidate2D, packet: FramePacket) -> bool:
    """Re-check an externally supplied candidate against the pre-filter gates."""
    obj = packet.detections[candidate.object_idx]
    fine = packet.detections[candidate.fine_idx]
    if obj.kind is not NodeKind.OBJECT or not fine.kind.is_fine:
        return False
    if not packet.imap.allows_fine(fine.category, obj.category):
        return False
    return candidate.s_det > TAU_DET and candidate.g_camc > TAU_GEO and candidate.s_2d is not None


class MockEdgeScorer:
    """Deterministic stand-in for the visual-semantic scorer.

    Looks up a (object category, fine category) table and optionally adds
    seeded Gaussian noise; with ``noise_sigma=0`` it is a pure lookup.
    """

    def __init__(self, table: dict[tuple[str, str], float], noise_sigma: float = 0.0, seed: int = 0):
        self.table = dict(table)
        self.noise_sigma = noise_sigma
        self._rng = np.random.default_rng(seed)

    def score(self, obj: Detection2D, fine: Detection2D) -> float:
        base = self.table.get((obj.category, fine.category), 0.5)
        if self.noise_sigma > 0:
            base += float(self._rng.normal(0.0, self.noise_sigma))
        return float(min(1.0, max(1e-3, base)))


def score_candidates(
    packet: FramePacket,
    candidates: list[EdgeCandidate2D],
    scorer: MockEdgeScorer,
) -> list[EdgeCandidate2D]:
    return [
        attach_score(c, scorer.score(packet.detections[c.object_idx], packet.detections[c.fine_idx]))
        for c in candidates
    ]


def imap_for_categories(
    imap: InteractabilityMap, categories: set[str]
) -> InteractabilityMap:
    """Restrict a map to the object categories present in a frame."""
    objs = frozenset(c for c in imap.objects if c in categories)
    return InteractabilityMap(
        objects=objs,
        carriers_of={k: v for k, v in imap.carriers_of.items() if k in objs},
        units_of={k: v for k, v in imap.units_of.items() if k in objs},
        prior=dict(imap.prior),
    )
