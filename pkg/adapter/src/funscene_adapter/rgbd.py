"""Posed RGB-D sequence loading.

Expected layout: a directory with ``intrinsics.json`` plus per-frame
``color_%04d.png`` (RGB), ``depth_%04d.png`` (uint16 millimetres, 0 means
invalid) and ``pose_%04d.txt`` (4x4 world-from-camera, row per line).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class Frame:
    index: int
    color: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32 metres, NaN where invalid
    pose: np.ndarray   # (4, 4) world-from-camera


@dataclass(frozen=True)
class Sequence:
    directory: str
    intrinsics: dict
    frames: list[Frame]


def frame_hash(frame: Frame) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(frame.color.tobytes())
    h.update(np.nan_to_num(frame.depth).tobytes())
    return h.hexdigest()


def read_sequence(directory: str) -> Sequence:
    with open(os.path.join(directory, "intrinsics.json"), "r", encoding="utf-8") as fh:
        intrinsics = json.load(fh)
    frames = []
    index = 0
    while True:
        color_path = os.path.join(directory, f"color_{index:04d}.png")
        if not os.path.exists(color_path):
            break
        color = np.asarray(Image.open(color_path).convert("RGB"))
        depth_raw = np.asarray(Image.open(os.path.join(directory, f"depth_{index:04d}.png")))
        depth = depth_raw.astype(np.float32) / 1000.0
        depth[depth_raw == 0] = np.nan
        pose = np.loadtxt(os.path.join(directory, f"pose_{index:04d}.txt")).reshape(4, 4)
        frames.append(Frame(index=index, color=color, depth=depth, pose=pose))
        index += 1
    if not frames:
        raise FileNotFoundError(f"no frames found under {directory}")
    return Sequence(directory=directory, intrinsics=intrinsics, frames=frames)


def write_frame(directory: str, index: int, color: np.ndarray, depth_m: np.ndarray,
                pose: np.ndarray) -> None:
    os.makedirs(directory, exist_ok=True)
    Image.fromarray(color.astype(np.uint8)).save(
        os.path.join(directory, f"color_{index:04d}.png")
    )
    depth_mm = np.where(np.isfinite(depth_m), (depth_m * 1000.0).round(), 0).astype(np.uint16)
    Image.fromarray(depth_mm).save(os.path.join(directory, f"depth_{index:04d}.png"))
    np.savetxt(os.path.join(directory, f"pose_{index:04d}.txt"), pose)
