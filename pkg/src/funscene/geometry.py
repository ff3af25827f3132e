"""Pinhole projection, box overlap and point-set helpers."""

from __future__ import annotations

import numpy as np

from funscene.model import Intrinsics


def invert_pose(pose: np.ndarray) -> np.ndarray:
    """Invert a rigid world-from-camera transform."""
    rot = pose[:3, :3]
    t = pose[:3, 3]
    inv = np.eye(4)
    inv[:3, :3] = rot.T
    inv[:3, 3] = -rot.T @ t
    return inv


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-from-camera pose with +z forward, +y down in the image."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = forward
    pose[:3, 3] = eye
    return pose


def project_points(
    points: np.ndarray, pose: np.ndarray, intr: Intrinsics, min_depth: float = 1e-3
) -> tuple[np.ndarray, np.ndarray]:
    """Project world points; returns pixel coords and a front-of-camera mask."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = (invert_pose(pose) @ np.hstack([pts, np.ones((len(pts), 1))]).T).T[:, :3]
    z = cam[:, 2]
    valid = z > min_depth
    uv = np.full((len(pts), 2), np.nan)
    uv[valid, 0] = intr.fx * cam[valid, 0] / z[valid] + intr.cx
    uv[valid, 1] = intr.fy * cam[valid, 1] / z[valid] + intr.cy
    return uv, valid


def camera_depth(point: np.ndarray, pose: np.ndarray) -> float:
    cam = invert_pose(pose) @ np.append(np.asarray(point, dtype=np.float64), 1.0)
    return float(cam[2])


def bbox_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    return float(inter / (area_a + area_b - inter))


def box3d_iou(a_min, a_max, b_min, b_max) -> float:
    a_min, a_max = np.asarray(a_min), np.asarray(a_max)
    b_min, b_max = np.asarray(b_min), np.asarray(b_max)
    lo = np.maximum(a_min, b_min)
    hi = np.minimum(a_max, b_max)
    if np.any(hi <= lo):
        return 0.0
    inter = float(np.prod(hi - lo))
    vol_a = float(np.prod(a_max - a_min))
    vol_b = float(np.prod(b_max - b_min))
    denom = vol_a + vol_b - inter
    if denom <= 0:
        return 0.0
    return inter / denom


def cosine_clamped(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clamped to [0, 1]."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(a, b) / (na * nb))))


def voxel_downsample(points: np.ndarray, voxel: float) -> np.ndarray:
    """Average points per voxel cell; output is ordered by cell index."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if voxel <= 0 or len(pts) == 0:
        return pts
    keys = np.floor(pts / voxel).astype(np.int64)
    # scalar cell ids keep np.unique fast; 2^20 cells per axis is plenty
    offset = 1 << 19
    if np.any(np.abs(keys) >= offset):
        raise ValueError("points exceed the supported +/-5 km voxel range")
    flat = ((keys[:, 0] + offset) << 40) | ((keys[:, 1] + offset) << 20) | (keys[:, 2] + offset)
    cells, inverse = np.unique(flat, return_inverse=True)
    counts = np.bincount(inverse, minlength=len(cells)).astype(np.float64)
    sums = np.stack(
        [np.bincount(inverse, weights=pts[:, k], minlength=len(cells)) for k in range(3)],
        axis=1,
    )
    return sums / counts[:, None]
