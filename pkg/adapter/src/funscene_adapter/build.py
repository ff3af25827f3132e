"""Assemble detection packets from an RGB-D sequence and cached model calls.

One JSON object per line, matching the engine's documented packet schema:
pose, intrinsics, detections (bbox, category, confidence, RLE mask,
appearance histogram, optional embedding, back-projected centroid, kind) and
pre-filtered, scored edge candidates plus the interactability table.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile

import numpy as np

from funscene_adapter.cache import CacheMissError, ResponseCache
from funscene_adapter.clients import (
    AdapterConfig,
    DetectorClient,
    EdgeScorerClient,
    InteractabilityClient,
)
from funscene_adapter.rgbd import Frame, Sequence

log = logging.getLogger("funscene_adapter")

APPEARANCE_BINS = 16


def rle_encode(mask: np.ndarray) -> dict:
    flat = np.asarray(mask, dtype=bool).ravel()
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"width": mask.shape[1], "height": mask.shape[0],
            "counts": [int(c) for c in counts]}


def rle_decode(obj: dict) -> np.ndarray:
    values = np.zeros(len(obj["counts"]), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, np.asarray(obj["counts"], dtype=np.int64))
    return flat.reshape(obj["height"], obj["width"])


def appearance_histogram(color: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Normalized grey-level histogram over the masked pixels."""
    pixels = color[mask]
    if len(pixels) == 0:
        return np.full(APPEARANCE_BINS, 1.0 / APPEARANCE_BINS)
    grey = pixels.mean(axis=1)
    hist, _ = np.histogram(grey, bins=APPEARANCE_BINS, range=(0.0, 255.0))
    hist = hist.astype(np.float64) + 1e-3  # keep strictly positive
    return hist / hist.sum()


def masked_centroid3d(frame: Frame, mask: np.ndarray, intr: dict):
    """Back-project the mask centre at the median masked depth, world frame."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return None
    depths = frame.depth[ys, xs]
    depths = depths[np.isfinite(depths)]
    if len(depths) == 0:
        return None
    z = float(np.median(depths))
    u, v = float(xs.mean()) + 0.5, float(ys.mean()) + 0.5
    cam = np.array([
        (u - intr["cx"]) / intr["fx"] * z,
        (v - intr["cy"]) / intr["fy"] * z,
        z,
        1.0,
    ])
    world = frame.pose @ cam
    return [float(world[0]), float(world[1]), float(world[2])]


def dilate(mask: np.ndarray, delta: int) -> np.ndarray:
    """Binary dilation with a square element via shifted unions."""
    out = mask.copy()
    h, w = mask.shape
    for dy in range(-delta, delta + 1):
        for dx in range(-delta, delta + 1):
            if dx == 0 and dy == 0:
                continue
            shifted = np.zeros_like(mask)
            ys0, ys1 = max(0, dy), min(h, h + dy)
            xs0, xs1 = max(0, dx), min(w, w + dx)
            shifted[ys0:ys1, xs0:xs1] = mask[max(0, -dy): h - max(0, dy),
                                             max(0, -dx): w - max(0, dx)]
            out |= shifted
    return out


def containment(fine_mask: np.ndarray, obj_mask: np.ndarray, delta: int) -> float:
    area = int(fine_mask.sum())
    if area == 0:
        return 0.0
    covered = int((fine_mask & dilate(obj_mask, delta)).sum())
    return covered / area


def bbox_of(mask: np.ndarray):
    ys, xs = np.nonzero(mask)
    return [float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1)]


def build_packets(seq: Sequence, config: AdapterConfig, backend=None) -> list[dict]:
    """One packet dict per frame; model failures skip the frame with a log line."""
    cache = ResponseCache(config.cache_dir)
    imap_client = InteractabilityClient(config, cache, backend)
    detector = DetectorClient(config, cache, backend)
    scorer = EdgeScorerClient(config, cache, backend)

    imap = imap_client.query()
    vocabulary = sorted(
        set(imap["objects"])
        | {c for v in imap["carriers_of"].values() for c in v}
        | {u for v in imap["units_of"].values() for u in v}
    )
    carriers_of = {k: set(v) for k, v in imap["carriers_of"].items()}
    units_of = {k: set(v) for k, v in imap["units_of"].items()}
    intr = seq.intrinsics
    delta = max(1, round(config.dilation_base_px * intr["width"] / config.dilation_base_width))

    packets = []
    for frame in seq.frames:
        try:
            raw_dets = detector.detect(frame, vocabulary)
        except CacheMissError as exc:
            log.warning("skipping frame %d: %s", frame.index, exc)
            continue
        detections = []
        masks = []
        for raw in raw_dets:
            mask = rle_decode(raw["mask"])
            kind = _kind_for(raw["category"], imap, carriers_of, units_of)
            detections.append(
                {
                    "frame_id": frame.index,
                    "bbox": bbox_of(mask),
                    "category": raw["category"],
                    "confidence": float(raw["confidence"]),
                    "mask": rle_encode(mask),
                    "appearance": [float(v) for v in appearance_histogram(frame.color, mask)],
                    "embedding": None,
                    "centroid3d": masked_centroid3d(frame, mask, intr),
                    "kind": kind,
                }
            )
            masks.append(mask)

        candidates = []
        for oi, obj in enumerate(detections):
            if obj["kind"] != "object":
                continue
            allowed = carriers_of.get(obj["category"], set()) | units_of.get(obj["category"], set())
            for fi, fine in enumerate(detections):
                if fine["kind"] == "object" or fine["category"] not in allowed:
                    continue
                s_det = min(obj["confidence"], fine["confidence"])
                if s_det <= config.tau_det:
                    continue
                g = containment(masks[fi], masks[oi], delta)
                if g <= config.tau_geo:
                    continue
                try:
                    s_2d = scorer.score(frame, obj, fine)
                except CacheMissError as exc:
                    log.warning("frame %d: unscored candidate dropped: %s", frame.index, exc)
                    continue
                candidates.append(
                    {
                        "frame_id": frame.index,
                        "object_idx": oi,
                        "fine_idx": fi,
                        "s_det": s_det,
                        "g_camc": g,
                        "s_2d": s_2d,
                    }
                )
        candidates.sort(key=lambda c: (c["object_idx"], c["fine_idx"]))
        packets.append(
            {
                "frame_id": frame.index,
                "timestamp": frame.index / 30.0,
                "pose": [[float(v) for v in row] for row in frame.pose],
                "intrinsics": {
                    "fx": intr["fx"], "fy": intr["fy"], "cx": intr["cx"], "cy": intr["cy"],
                    "width": intr["width"], "height": intr["height"],
                },
                "detections": detections,
                "edge_candidates": candidates,
                "imap": {
                    "objects": sorted(imap["objects"]),
                    "carriers_of": {k: sorted(v) for k, v in sorted(carriers_of.items())},
                    "units_of": {k: sorted(v) for k, v in sorted(units_of.items())},
                    "prior": [[c, u, float(p)] for c, u, p in imap["prior"]],
                },
            }
        )
    return packets


def _kind_for(category: str, imap: dict, carriers_of: dict, units_of: dict) -> str:
    if category in imap["objects"]:
        return "object"
    if any(category in v for v in carriers_of.values()):
        return "carrier"
    return "unit"


def write_packets(path: str, packets: list[dict]) -> None:
    text = "".join(
        json.dumps(p, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
        for p in packets
    )
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
