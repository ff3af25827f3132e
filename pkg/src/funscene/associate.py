"""Cross-frame node association: multi-cue scoring, gating and matching.

Each detection is scored against every map node with a weighted blend of 2D
projection overlap, a Gaussian kernel on centroid distance, appearance
cosine and semantic agreement.  Gated pairs feed a maximum-weight one-to-one
assignment; matched nodes are updated in place and unmatched detections
spawn new nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from funscene import geometry
from funscene.model import Detection2D, Intrinsics, MapNode


@dataclass(frozen=True)
class AssociationWeights:
    """Blend weights for the four association cues plus the kernel width."""

    w_iou: float = 0.5
    w_geo: float = 0.5 / 3
    w_app: float = 0.5 / 3
    w_sem: float = 0.5 / 3
    sigma: float = 0.10

    def __post_init__(self):
        if min(self.w_iou, self.w_geo, self.w_app, self.w_sem) < 0:
            raise ValueError("association weights must be non-negative")
        total = self.w_iou + self.w_geo + self.w_app + self.w_sem
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"association weights sum to {total}, expected 1")
        if self.sigma <= 0:
            raise ValueError("kernel width must be positive")


@dataclass(frozen=True)
class GateParams:
    tau_ass: float = 0.45
    dist_cap: float = 0.15
    dist_frac: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.tau_ass < 1.0):
            raise ValueError("tau_ass must lie in (0, 1)")
        if self.dist_cap <= 0 or self.dist_frac <= 0:
            raise ValueError("gate distances must be positive")


PROJECT_POINT_CAP = 1024


def project_node(node: MapNode, pose: np.ndarray, intr: Intrinsics):
    """Project a node's points and box the 5th-95th percentile spread.

    Points behind the camera are discarded; returns None when fewer than 3
    points project.  Large clouds are strided down to a deterministic
    subsample before projection.
    """
    pts = node.points
    if len(pts) > PROJECT_POINT_CAP:
        stride = int(np.ceil(len(pts) / PROJECT_POINT_CAP))
        pts = pts[::stride]
    uv, valid = geometry.project_points(pts, pose, intr)
    uv = uv[valid]
    if len(uv) < 3:
        return None
    (x0, y0), (x1, y1) = np.percentile(uv, [5.0, 95.0], axis=0)
    return (float(x0), float(y0), float(x1), float(y1))


def semantic_similarity(det: Detection2D, node: MapNode) -> float:
    """Embedding cosine when both sides carry embeddings, else exact match."""
    if det.embedding is not None and node.embedding is not None:
        return geometry.cosine_clamped(det.embedding, node.embedding)
    return 1.0 if det.category == node.category else 0.0


def association_score(
    det: Detection2D,
    node: MapNode,
    weights: AssociationWeights,
    proj_box=None,
    dist: float | None = None,
) -> float:
    """Multi-cue association score in [0, 1]; cosine terms are clamped."""
    iou = geometry.bbox_iou(det.bbox, proj_box) if proj_box is not None else 0.0
    d = float(np.linalg.norm(det.centroid3d - node.centroid)) if dist is None else dist
    geo = math.exp(-(d * d) / (2.0 * weights.sigma * weights.sigma))
    app = geometry.cosine_clamped(det.appearance, node.appearance)
    sem = semantic_similarity(det, node)
    return weights.w_iou * iou + weights.w_geo * geo + weights.w_app * app + weights.w_sem * sem


def gate(
    det: Detection2D,
    node: MapNode,
    params: GateParams,
    score: float,
    iou: float,
    dist: float | None = None,
) -> bool:
    """Scale-adaptive proximity, positive overlap and a score floor."""
    d = float(np.linalg.norm(det.centroid3d - node.centroid)) if dist is None else dist
    threshold = min(params.dist_cap, params.dist_frac * node.diag)
    return d < threshold and iou > 0.0 and score >= params.tau_ass


def max_weight_matching(scores: np.ndarray, gated: np.ndarray):
    """Maximum-weight one-to-one matching restricted to gated pairs.

    Solved with the Kuhn-Munkres method on a matrix padded with one zero
    "opt-out" column per row, so leaving a row unmatched never forces a
    displacement elsewhere; non-gated pairs are driven to -inf and ties are
    nudged toward lower (row, column) indices.  Returns (pairs, total) with
    pairs sorted by row.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gated = np.asarray(gated, dtype=bool)
    if scores.size == 0 or not gated.any():
        return [], 0.0
    n_rows, n_cols = scores.shape
    cost = np.full((n_rows, n_cols + n_rows), -1e9)
    cost[:, :n_cols] = np.where(gated, scores, -1e9)
    cost[:, n_cols:][np.diag_indices(n_rows)] = 0.0
    # deterministic tie-break: prefer earlier rows/columns
    ii, jj = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    cost[:, :n_cols] -= 1e-12 * (ii * (n_cols + 1) + jj)
    rows, cols = linear_sum_assignment(cost, maximize=True)
    pairs = []
    total = 0.0
    for r, c in zip(rows, cols):
        if c < n_cols and gated[r, c]:
            pairs.append((int(r), int(c)))
            total += float(scores[r, c])
    pairs.sort()
    return pairs, total


@dataclass
class MatchResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_dets: list[int] = field(default_factory=list)
    unmatched_nodes: list[int] = field(default_factory=list)
    scores: np.ndarray | None = None
    total: float = 0.0


def match_frame(
    detections: list[Detection2D],
    nodes: list[MapNode],
    weights: AssociationWeights,
    gates: GateParams,
    pose: np.ndarray,
    intr: Intrinsics,
    scorer=None,
) -> MatchResult:
    """Associate a frame's detections with map nodes.

    ``scorer(det, node, proj_box) -> (score, gated)`` may replace the
    standard scoring+gating (used by the ablation modes).  Detections
    without a 3D centroid are never matched here.
    """
    n_det, n_node = len(detections), len(nodes)
    scores = np.zeros((n_det, n_node))
    gated = np.zeros((n_det, n_node), dtype=bool)
    proj_boxes = [project_node(node, pose, intr) for node in nodes]
    if n_det and n_node:
        det_pos = np.array(
            [d.centroid3d if d.centroid3d is not None else (np.nan,) * 3 for d in detections]
        )
        node_pos = np.array([n.centroid for n in nodes])
        dist = np.linalg.norm(det_pos[:, None, :] - node_pos[None, :, :], axis=2)
        node_caps = np.array(
            [min(gates.dist_cap, gates.dist_frac * n.diag) for n in nodes]
        )
    for i, det in enumerate(detections):
        if det.centroid3d is None:
            continue
        for j, node in enumerate(nodes):
            if scorer is not None:
                s, ok = scorer(det, node, proj_boxes[j])
            else:
                # the gate requires proximity, so far pairs never need scoring
                if dist[i, j] >= node_caps[j]:
                    continue
                d = float(dist[i, j])
                s = association_score(det, node, weights, proj_boxes[j], dist=d)
                iou = geometry.bbox_iou(det.bbox, proj_boxes[j]) if proj_boxes[j] else 0.0
                ok = gate(det, node, gates, s, iou, dist=d)
            scores[i, j] = s
            gated[i, j] = ok
    pairs, total = max_weight_matching(scores, gated)
    matched_dets = {i for i, _ in pairs}
    matched_nodes = {j for _, j in pairs}
    return MatchResult(
        matches=pairs,
        unmatched_dets=[i for i in range(n_det) if i not in matched_dets],
        unmatched_nodes=[j for j in range(n_node) if j not in matched_nodes],
        scores=scores,
        total=total,
    )


def backproject_mask(
    det: Detection2D, pose: np.ndarray, intr: Intrinsics, max_side: int = 12
) -> np.ndarray:
    """Lift a detection's mask to a world-frame surface patch.

    Mask pixels are grid-sampled (at most ``max_side`` per axis) and
    back-projected at the camera depth of the detection centroid.  The mask
    carries no depth extent, so the patch is duplicated at two depths spread
    by the in-plane footprint (roughly isometric objects): the node box gets
    a usable third dimension from the first observation.  Falls back to the
    bare centroid when the mask or depth give nothing.
    """
    if det.centroid3d is None:
        return np.zeros((0, 3))
    z = geometry.camera_depth(det.centroid3d, pose)
    box = det.mask.bbox()
    if box is None or z <= 1e-3:
        return det.centroid3d.reshape(1, 3)
    x0, y0, x1, y1 = box
    us = np.unique(np.linspace(x0, x1 - 1, min(max_side, x1 - x0)).round().astype(int))
    vs = np.unique(np.linspace(y0, y1 - 1, min(max_side, y1 - y0)).round().astype(int))
    rect = det.mask.as_rect()
    if rect is not None:
        uu, vv = np.meshgrid(us, vs)
        uu, vv = uu.ravel(), vv.ravel()
    else:
        window = det.mask.to_array()[y0:y1, x0:x1]
        uu, vv = np.meshgrid(us, vs)
        keep = window[vv - y0, uu - x0]
        uu, vv = uu[keep], vv[keep]
    if len(uu) == 0:
        return det.centroid3d.reshape(1, 3)
    width_m = (x1 - x0) / intr.fx * z
    height_m = (y1 - y0) / intr.fy * z
    half_depth = min(0.3, max(0.01, 0.5 * float(np.sqrt(width_m * height_m))))
    cams = []
    for zk in (z - half_depth, z + half_depth):
        cams.append(
            np.stack(
                [
                    (uu + 0.5 - intr.cx) / intr.fx * z,
                    (vv + 0.5 - intr.cy) / intr.fy * z,
                    np.full(len(uu), zk),
                ],
                axis=1,
            )
        )
    cam = np.vstack(cams)
    world = (pose @ np.hstack([cam, np.ones((len(cam), 1))]).T).T[:, :3]
    return world


def update_node(
    node: MapNode,
    det: Detection2D,
    frame_id: int,
    points: np.ndarray | None = None,
    voxel: float = 0.01,
    alpha: float = 0.3,
) -> MapNode:
    """Fuse a matched detection into its node.

    New observation points are merged and voxel-capped, the centroid and box
    recomputed, the appearance histogram blended by EMA and the embedding
    folded into a renormalized running mean.
    """
    if points is None:
        points = det.centroid3d.reshape(1, 3)
    merged = np.vstack([node.points, np.asarray(points, dtype=np.float64).reshape(-1, 3)])
    node.points = geometry.voxel_downsample(merged, voxel)
    node.refresh_geometry()
    blended = (1.0 - alpha) * node.appearance + alpha * det.appearance
    node.appearance = blended / blended.sum()
    if det.embedding is not None:
        if node.embedding is None:
            node.embedding = det.embedding.copy()
            node.embedding_count = 1
        else:
            s = node.embedding * node.embedding_count + det.embedding
            node.embedding = s / np.linalg.norm(s)
            node.embedding_count += 1
    node.obs_count += 1
    node.last_seen = frame_id
    return node


def spawn_node(
    det: Detection2D,
    node_id: str,
    frame_id: int,
    points: np.ndarray | None = None,
    voxel: float = 0.01,
) -> MapNode:
    """Initialise a map node from an unmatched detection (requires depth)."""
    if det.centroid3d is None:
        raise ValueError("cannot spawn a node from a detection without 3D evidence")
    if points is None:
        points = det.centroid3d.reshape(1, 3)
    return MapNode(
        id=node_id,
        kind=det.kind,
        category=det.category,
        points=geometry.voxel_downsample(np.asarray(points, dtype=np.float64), voxel),
        appearance=det.appearance.copy(),
        obs_count=1,
        last_seen=frame_id,
        embedding=None if det.embedding is None else det.embedding.copy(),
        embedding_count=0 if det.embedding is None else 1,
    )


def baseline_scorer(det: Detection2D, node: MapNode, det_box3d, tau_ass: float, dist_gate: float = 0.5):
    """Coarse 3D-IoU + semantic-cosine association used by the ablation suite.

    No projection consistency, no appearance term, and only a fixed
    proximity gate instead of the scale-adaptive one.
    """
    sem = semantic_similarity(det, node)
    iou3d = 0.0
    if det_box3d is not None:
        iou3d = geometry.box3d_iou(det_box3d[0], det_box3d[1], node.box_min, node.box_max)
    score = 0.5 * iou3d + 0.5 * sem
    d = float(np.linalg.norm(det.centroid3d - node.centroid))
    return score, (d < dist_gate and score >= tau_ass)


def greedy_match_frame(
    detections: list[Detection2D],
    nodes: list[MapNode],
    det_boxes3d: list,
    tau_ass: float,
) -> MatchResult:
    """Per-detection greedy argmax association, no one-to-one exclusivity.

    This is the recognize-then-merge baseline behaviour: each detection
    independently joins the instance with the best 3D-overlap + semantic
    score, which aliases adjacent same-category instances.
    """
    n_det, n_node = len(detections), len(nodes)
    matches: list[tuple[int, int]] = []
    unmatched: list[int] = []
    taken: set[int] = set()
    for i, det in enumerate(detections):
        if det.centroid3d is None:
            unmatched.append(i)
            continue
        best_j, best_score = None, -1.0
        for j, node in enumerate(nodes):
            score, ok = baseline_scorer(det, node, det_boxes3d[i], tau_ass)
            if ok and score > best_score:
                best_j, best_score = j, score
        if best_j is None:
            unmatched.append(i)
        else:
            matches.append((i, best_j))
            taken.add(best_j)
    return MatchResult(
        matches=matches,
        unmatched_dets=unmatched,
        unmatched_nodes=[j for j in range(n_node) if j not in taken],
    )
