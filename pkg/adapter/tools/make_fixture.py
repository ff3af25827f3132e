"""Record the shipped mini-sequence fixture and its response cache.

Renders a 3-frame RGB-D sequence (a cabinet face with one handle, camera
translating sideways) and records scripted model responses into the cache,
so tests and CI replay everything without model access.  Run from the
adapter directory:

    python3 tools/make_fixture.py
"""

from __future__ import annotations

import os
import shutil
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from funscene_adapter.build import build_packets, rle_encode, write_packets  # noqa: E402
from funscene_adapter.clients import AdapterConfig  # noqa: E402
from funscene_adapter.rgbd import read_sequence, write_frame  # noqa: E402

WIDTH, HEIGHT = 160, 120
FX = FY = 140.0
CX, CY = 80.0, 60.0

CABINET_WORLD = ((-0.7, -0.55, 2.0), (0.7, 0.55, 2.0))   # fronto-parallel face
HANDLE_WORLD = ((-0.10, 0.0, 1.95), (0.15, 0.12, 1.95))
CABINET_COLOR = (142, 102, 62)
HANDLE_COLOR = (201, 201, 206)
EDGE_SCORES = [0.9, 0.85, 0.88]


def project_rect(world_rect, tx):
    (x0, y0, z), (x1, y1, _) = world_rect
    u0 = FX * (x0 - tx) / z + CX
    u1 = FX * (x1 - tx) / z + CX
    v0 = FY * y0 / z + CY
    v1 = FY * y1 / z + CY
    return (int(round(u0)), int(round(v0)), int(round(u1)), int(round(v1)))


def render_frame(index):
    tx = 0.03 * index
    color = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    depth = np.full((HEIGHT, WIDTH), np.nan, dtype=np.float32)
    cab = project_rect(CABINET_WORLD, tx)
    han = project_rect(HANDLE_WORLD, tx)
    color[cab[1]:cab[3], cab[0]:cab[2]] = CABINET_COLOR
    depth[cab[1]:cab[3], cab[0]:cab[2]] = CABINET_WORLD[0][2]
    color[han[1]:han[3], han[0]:han[2]] = HANDLE_COLOR
    depth[han[1]:han[3], han[0]:han[2]] = HANDLE_WORLD[0][2]
    pose = np.eye(4)
    pose[0, 3] = tx
    cab_mask = np.zeros((HEIGHT, WIDTH), dtype=bool)
    cab_mask[cab[1]:cab[3], cab[0]:cab[2]] = True
    han_mask = np.zeros((HEIGHT, WIDTH), dtype=bool)
    han_mask[han[1]:han[3], han[0]:han[2]] = True
    detections = [
        {"category": "cabinet", "confidence": 0.92, "bbox": list(map(float, cab)),
         "mask": rle_encode(cab_mask)},
        {"category": "handle", "confidence": 0.84, "bbox": list(map(float, han)),
         "mask": rle_encode(han_mask)},
    ]
    return color, depth, pose, detections


class ScriptedBackend:
    """Stands in for the live endpoints while recording the fixture."""

    def __init__(self):
        self.by_frame_hash = {}
        self.frame_index = {}

    def register(self, frame_hash, index, detections):
        self.by_frame_hash[frame_hash] = detections
        self.frame_index[frame_hash] = index

    def __call__(self, model, request):
        if model == "llm-interactability":
            return {
                "objects": ["cabinet"],
                "carriers_of": {"cabinet": ["drawer"]},
                "units_of": {"cabinet": ["handle"]},
                "prior": [["drawer", "handle", 1.0]],
            }
        if model == "openvocab-detector":
            return self.by_frame_hash[request["frame"]]
        if model == "vlm-edge-scorer":
            return EDGE_SCORES[self.frame_index[request["frame"]]]
        raise KeyError(model)


def main():
    root = os.path.join(os.path.dirname(__file__), "..", "fixtures")
    seq_dir = os.path.join(root, "miniseq")
    cache_dir = os.path.join(root, "cache")
    for path in (seq_dir, cache_dir):
        if os.path.isdir(path):
            shutil.rmtree(path)
        os.makedirs(path)

    import json
    with open(os.path.join(seq_dir, "intrinsics.json"), "w", encoding="utf-8") as fh:
        json.dump({"fx": FX, "fy": FY, "cx": CX, "cy": CY,
                   "width": WIDTH, "height": HEIGHT}, fh, indent=1)

    scripted = []
    for index in range(3):
        color, depth, pose, detections = render_frame(index)
        write_frame(seq_dir, index, color, depth, pose)
        scripted.append(detections)

    seq = read_sequence(seq_dir)
    backend = ScriptedBackend()
    from funscene_adapter.rgbd import frame_hash
    for frame, detections in zip(seq.frames, scripted):
        backend.register(frame_hash(frame), frame.index, detections)

    config = AdapterConfig(cache_dir=cache_dir)
    packets = build_packets(seq, config, backend=backend)
    out = os.path.join(root, "miniseq.packets.jsonl")
    write_packets(out, packets)
    print(f"recorded {len(packets)} packets, cache at {cache_dir}")


if __name__ == "__main__":
    main()
