"""Cached model clients: interactability table, detection+masks, edge scores.

Each client builds a content request, asks the cache, and only consults a
backend callable when one is supplied (recording mode).  CI and tests run
replay-only: a missing response is an error, never a live call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from funscene_adapter.cache import ResponseCache
from funscene_adapter.rgbd import Frame, frame_hash

IMAP_PROMPT = (
    "List the manipulable object categories visible in an indoor scene and, "
    "for each, the carrier structures and directly operable units it admits. "
    "Answer as JSON with objects, carriers_of, units_of and a carrier-unit "
    "compatibility table."
)

EDGE_PROMPT = (
    "Given the crop of a {object} and the crop of a {fine} inside it, rate "
    "from 0 to 1 how strongly this frame supports the part belonging to the "
    "object."
)


@dataclass
class AdapterConfig:
    cache_dir: str
    interactability_model: str = "llm-interactability"
    detector_model: str = "openvocab-detector"
    scorer_model: str = "vlm-edge-scorer"
    categories_hint: list[str] = field(default_factory=list)
    tau_det: float = 0.25
    tau_geo: float = 0.90
    dilation_base_px: int = 3
    dilation_base_width: int = 640


class InteractabilityClient:
    def __init__(self, config: AdapterConfig, cache: ResponseCache, backend=None):
        self.config = config
        self.cache = cache
        self.backend = backend

    def query(self) -> dict:
        request = {"prompt": IMAP_PROMPT, "hint": sorted(self.config.categories_hint)}
        return self.cache.fetch(self.config.interactability_model, request, self.backend)


class DetectorClient:
    """Detection + segmentation in one recorded call per frame.

    Responses carry per-detection category, confidence, bbox and an RLE
    mask (row-major alternating run lengths, zeros first).
    """

    def __init__(self, config: AdapterConfig, cache: ResponseCache, backend=None):
        self.config = config
        self.cache = cache
        self.backend = backend

    def detect(self, frame: Frame, vocabulary: list[str]) -> list[dict]:
        request = {"frame": frame_hash(frame), "vocabulary": sorted(vocabulary)}
        return self.cache.fetch(self.config.detector_model, request, self.backend)


class EdgeScorerClient:
    def __init__(self, config: AdapterConfig, cache: ResponseCache, backend=None):
        self.config = config
        self.cache = cache
        self.backend = backend

    def score(self, frame: Frame, obj_det: dict, fine_det: dict) -> float:
        request = {
            "frame": frame_hash(frame),
            "prompt": EDGE_PROMPT.format(object=obj_det["category"], fine=fine_det["category"]),
            "object_bbox": [round(v, 2) for v in obj_det["bbox"]],
            "fine_bbox": [round(v, 2) for v in fine_det["bbox"]],
        }
        value = self.cache.fetch(self.config.scorer_model, request, self.backend)
        return float(min(1.0, max(1e-3, value)))
