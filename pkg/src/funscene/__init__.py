"""Hierarchical functional 3D scene graph fusion from per-frame detection packets."""

from funscene.model import (
    Detection2D,
    EdgeBelief,
    EdgeCandidate2D,
    FramePacket,
    InteractabilityMap,
    Intrinsics,
    MapNode,
    NodeKind,
    SceneGraph,
)
from funscene.masks import RleMask

__version__ = "0.1.0"

__all__ = [
    "Detection2D",
    "EdgeBelief",
    "EdgeCandidate2D",
    "FramePacket",
    "InteractabilityMap",
    "Intrinsics",
    "MapNode",
    "NodeKind",
    "RleMask",
    "SceneGraph",
]
