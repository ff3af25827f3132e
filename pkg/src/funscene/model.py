"""Domain types shared by the fusion pipeline.

Value objects (detections, packets, candidates) are immutable after
construction.  ``MapNode`` and ``EdgeBelief`` are mutable accumulator state
owned by the engine's single writer; everything else may be read
concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from funscene.masks import RleMask

APPEARANCE_TOL = 1e-6
EMBEDDING_TOL = 1e-6
POSE_TOL = 1e-5
SIMPLEX_TOL = 1e-9


class PacketError(ValueError):
    """A packet or one of its records violates the wire contract."""


class GraphInvariantError(RuntimeError):
    """A scene graph violates its structural invariants."""


class DegenerateMaskError(ValueError):
    """An operation received an empty fine mask."""


class DuplicateEvidenceError(ValueError):
    """The same (candidate, frame) evidence was offered twice."""


class FrameOrderError(ValueError):
    """Packets arrived with non-increasing frame ids."""


class NodeKind(enum.Enum):
    OBJECT = "object"
    CARRIER = "carrier"
    UNIT = "unit"

    @property
    def is_fine(self) -> bool:
        """Carriers and interactive units are jointly "fine-grained"."""
        return self is not NodeKind.OBJECT


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def to_jsonable(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Intrinsics":
        return cls(
            fx=float(obj["fx"]), fy=float(obj["fy"]),
            cx=float(obj["cx"]), cy=float(obj["cy"]),
            width=int(obj["width"]), height=int(obj["height"]),
        )


@dataclass(eq=False)
class Detection2D:
    """One detector output: box, category, confidence, mask and descriptors.

    ``centroid3d`` is the back-projected world-frame centre and may be absent
    when the depth at the detection was invalid.
    """

    frame_id: int
    bbox: tuple[float, float, float, float]
    category: str
    confidence: float
    mask: RleMask
    appearance: np.ndarray
    kind: NodeKind
    embedding: np.ndarray | None = None
    centroid3d: np.ndarray | None = None

    def __post_init__(self):
        self.appearance = np.asarray(self.appearance, dtype=np.float64)
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=np.float64)
        if self.centroid3d is not None:
            self.centroid3d = np.asarray(self.centroid3d, dtype=np.float64).reshape(3)

    def validate(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise PacketError(f"bbox not well-ordered: {self.bbox}")
        if not (0.0 <= self.confidence <= 1.0):
            raise PacketError(f"confidence outside [0,1]: {self.confidence}")
        mask_box = self.mask.bbox()
        if mask_box is not None:
            mx0, my0, mx1, my1 = mask_box
            if mx0 < x0 - 1 or my0 < y0 - 1 or mx1 > x1 + 1 or my1 > y1 + 1:
                raise PacketError("mask pixels extend beyond bbox (1 px tolerance)")
        s = float(self.appearance.sum())
        if abs(s - 1.0) > APPEARANCE_TOL:
            raise PacketError(f"appearance sums to {s}, expected 1")
        if np.any(self.appearance < 0):
            raise PacketError("appearance has negative entries")
        if self.embedding is not None:
            n = float(np.linalg.norm(self.embedding))
            if abs(n - 1.0) > EMBEDDING_TOL:
                raise PacketError(f"embedding norm {n}, expected unit")

    def to_jsonable(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "bbox": [float(v) for v in self.bbox],
            "category": self.category,
            "confidence": float(self.confidence),
            "mask": self.mask.to_jsonable(),
            "appearance": [float(v) for v in self.appearance],
            "embedding": None if self.embedding is None else [float(v) for v in self.embedding],
            "centroid3d": None if self.centroid3d is None else [float(v) for v in self.centroid3d],
            "kind": self.kind.value,
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Detection2D":
        return cls(
            frame_id=int(obj["frame_id"]),
            bbox=tuple(float(v) for v in obj["bbox"]),
            category=str(obj["category"]),
            confidence=float(obj["confidence"]),
            mask=RleMask.from_jsonable(obj["mask"]),
            appearance=np.asarray(obj["appearance"], dtype=np.float64),
            embedding=None if obj.get("embedding") is None
            else np.asarray(obj["embedding"], dtype=np.float64),
            centroid3d=None if obj.get("centroid3d") is None
            else np.asarray(obj["centroid3d"], dtype=np.float64),
            kind=NodeKind(obj["kind"]),
        )


@dataclass(frozen=True)
class InteractabilityMap:
    """Which carrier/unit categories each manipulable object category admits.

    ``prior`` is a directed carrier<-unit compatibility table used by the
    hierarchy pairing stage.
    """

    objects: frozenset[str]
    carriers_of: dict[str, frozenset[str]]
    units_of: dict[str, frozenset[str]]
    prior: dict[tuple[str, str], float]

    def role_c(self, fine_category: str, object_category: str) -> bool:
        return fine_category in self.carriers_of.get(object_category, frozenset())

    def role_u(self, fine_category: str, object_category: str) -> bool:
        return fine_category in self.units_of.get(object_category, frozenset())

    def allows_fine(self, fine_category: str, object_category: str) -> bool:
        return self.role_c(fine_category, object_category) or self.role_u(
            fine_category, object_category
        )

    def compatibility(self, carrier_category: str, unit_category: str) -> float:
        return self.prior.get((carrier_category, unit_category), 0.0)

    def merged_with(self, other: "InteractabilityMap") -> "InteractabilityMap":
        carriers = {k: v for k, v in self.carriers_of.items()}
        for k, v in other.carriers_of.items():
            carriers[k] = carriers.get(k, frozenset()) | v
        units = {k: v for k, v in self.units_of.items()}
        for k, v in other.units_of.items():
            units[k] = units.get(k, frozenset()) | v
        prior = dict(self.prior)
        for k, v in other.prior.items():
            prior[k] = max(prior.get(k, 0.0), v)
        return InteractabilityMap(
            objects=self.objects | other.objects,
            carriers_of=carriers,
            units_of=units,
            prior=prior,
        )

    def to_jsonable(self) -> dict:
        return {
            "objects": sorted(self.objects),
            "carriers_of": {k: sorted(v) for k, v in sorted(self.carriers_of.items())},
            "units_of": {k: sorted(v) for k, v in sorted(self.units_of.items())},
            "prior": [[c, u, float(p)] for (c, u), p in sorted(self.prior.items())],
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "InteractabilityMap":
        return cls(
            objects=frozenset(obj["objects"]),
            carriers_of={k: frozenset(v) for k, v in obj["carriers_of"].items()},
            units_of={k: frozenset(v) for k, v in obj["units_of"].items()},
            prior={(c, u): float(p) for c, u, p in obj["prior"]},
        )


@dataclass(frozen=True)
class EdgeCandidate2D:
    """A pre-filtered functional edge hypothesis between two detections.

    Detections are referenced by index into the owning packet.  ``s_2d`` is
    the visual-semantic support score in (0, 1]; candidates straight out of
    the pre-filter carry ``s_2d=None`` until a score is attached.
    """

    frame_id: int
    object_idx: int
    fine_idx: int
    s_det: float
    g_camc: float
    s_2d: float | None = None

    def to_jsonable(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "object_idx": self.object_idx,
            "fine_idx": self.fine_idx,
            "s_det": float(self.s_det),
            "g_camc": float(self.g_camc),
            "s_2d": None if self.s_2d is None else float(self.s_2d),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "EdgeCandidate2D":
        return cls(
            frame_id=int(obj["frame_id"]),
            object_idx=int(obj["object_idx"]),
            fine_idx=int(obj["fine_idx"]),
            s_det=float(obj["s_det"]),
            g_camc=float(obj["g_camc"]),
            s_2d=None if obj.get("s_2d") is None else float(obj["s_2d"]),
        )


@dataclass(eq=False)
class FramePacket:
    """One timestamped frame of adapter output."""

    frame_id: int
    timestamp: float
    pose: np.ndarray
    intrinsics: Intrinsics
    detections: list[Detection2D]
    edge_candidates: list[EdgeCandidate2D]
    imap: InteractabilityMap

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=np.float64).reshape(4, 4)

    def validate(self) -> None:
        rot = self.pose[:3, :3]
        err = float(np.abs(rot @ rot.T - np.eye(3)).max())
        if err > POSE_TOL:
            raise PacketError(f"pose rotation block not orthonormal (error {err:.2e})")
        if np.abs(self.pose[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > POSE_TOL:
            raise PacketError("pose bottom row must be [0, 0, 0, 1]")
        for i, det in enumerate(self.detections):
            if det.frame_id != self.frame_id:
                raise PacketError(f"detections[{i}]: frame_id {det.frame_id} != packet {self.frame_id}")
            try:
                det.validate()
            except PacketError as exc:
                raise PacketError(f"detections[{i}]: {exc}") from exc
        n = len(self.detections)
        for i, cand in enumerate(self.edge_candidates):
            ctx = f"edge_candidates[{i}]"
            if not (0 <= cand.object_idx < n):
                raise PacketError(f"{ctx}: object_idx {cand.object_idx} references missing detection")
            if not (0 <= cand.fine_idx < n):
                raise PacketError(f"{ctx}: fine_idx {cand.fine_idx} references missing detection")
            obj = self.detections[cand.object_idx]
            fine = self.detections[cand.fine_idx]
            if obj.kind is not NodeKind.OBJECT:
                raise PacketError(f"{ctx}: object_idx points at a {obj.kind.value} detection")
            if not fine.kind.is_fine:
                raise PacketError(f"{ctx}: fine_idx points at an object detection")
            expected = min(obj.confidence, fine.confidence)
            if abs(cand.s_det - expected) > 1e-9:
                raise PacketError(f"{ctx}: s_det {cand.s_det} != min of detection confidences")
            if cand.s_det <= 0.25:
                raise PacketError(f"{ctx}: s_det {cand.s_det} fails the 0.25 pre-filter")
            if cand.g_camc <= 0.90:
                raise PacketError(f"{ctx}: g_camc {cand.g_camc} fails the 0.90 pre-filter")
            if cand.s_2d is not None and not (0.0 < cand.s_2d <= 1.0):
                raise PacketError(f"{ctx}: s_2d {cand.s_2d} outside (0, 1]")

    def to_jsonable(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "timestamp": float(self.timestamp),
            "pose": [[float(v) for v in row] for row in self.pose],
            "intrinsics": self.intrinsics.to_jsonable(),
            "detections": [d.to_jsonable() for d in self.detections],
            "edge_candidates": [c.to_jsonable() for c in self.edge_candidates],
            "imap": self.imap.to_jsonable(),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "FramePacket":
        return cls(
            frame_id=int(obj["frame_id"]),
            timestamp=float(obj["timestamp"]),
            pose=np.asarray(obj["pose"], dtype=np.float64),
            intrinsics=Intrinsics.from_jsonable(obj["intrinsics"]),
            detections=[Detection2D.from_jsonable(d) for d in obj["detections"]],
            edge_candidates=[EdgeCandidate2D.from_jsonable(c) for c in obj["edge_candidates"]],
            imap=InteractabilityMap.from_jsonable(obj["imap"]),
        )


@dataclass(eq=False)
class MapNode:
    """A fused 3D node instance accumulated across frames."""

    id: str
    kind: NodeKind
    category: str
    points: np.ndarray
    appearance: np.ndarray
    obs_count: int
    last_seen: int
    embedding: np.ndarray | None = None
    embedding_count: int = 0
    centroid: np.ndarray = field(init=False)
    box_min: np.ndarray = field(init=False)
    box_max: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.appearance = np.asarray(self.appearance, dtype=np.float64)
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=np.float64)
        self.refresh_geometry()

    def refresh_geometry(self) -> None:
        """Recompute centroid and box from the stored point set."""
        if len(self.points) == 0:
            raise ValueError("map node requires at least one point")
        self.centroid = self.points.mean(axis=0)
        self.box_min = self.points.min(axis=0)
        self.box_max = self.points.max(axis=0)

    @property
    def diag(self) -> float:
        return float(np.linalg.norm(self.box_max - self.box_min))

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "category": self.category,
            "points": [[float(v) for v in p] for p in self.points],
            "centroid": [float(v) for v in self.centroid],
            "box_min": [float(v) for v in self.box_min],
            "box_max": [float(v) for v in self.box_max],
            "diag": self.diag,
            "appearance": [float(v) for v in self.appearance],
            "embedding": None if self.embedding is None else [float(v) for v in self.embedding],
            "embedding_count": self.embedding_count,
            "obs_count": self.obs_count,
            "last_seen": self.last_seen,
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "MapNode":
        return cls(
            id=str(obj["id"]),
            kind=NodeKind(obj["kind"]),
            category=str(obj["category"]),
            points=np.asarray(obj["points"], dtype=np.float64),
            appearance=np.asarray(obj["appearance"], dtype=np.float64),
            obs_count=int(obj["obs_count"]),
            last_seen=int(obj["last_seen"]),
            embedding=None if obj.get("embedding") is None
            else np.asarray(obj["embedding"], dtype=np.float64),
            embedding_count=int(obj.get("embedding_count", 0)),
        )


RELATIONS = ("functional", "carrier-of", "unit-of")


@dataclass(frozen=True)
class Edge:
    """Directed edge: ``child`` functionally belongs to ``parent``."""

    parent: str
    child: str
    relation: str

    def to_jsonable(self) -> dict:
        return {"parent": self.parent, "child": self.child, "relation": self.relation}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Edge":
        return cls(parent=str(obj["parent"]), child=str(obj["child"]), relation=str(obj["relation"]))


@dataclass(eq=False)
class SceneGraph:
    """Fused node set plus directed functional edges and decision provenance."""

    nodes: dict[str, MapNode] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)
    provenance: dict[tuple[str, str], float] = field(default_factory=dict)

    def node_list(self) -> list[MapNode]:
        return list(self.nodes.values())

    def parent_of(self, child: str) -> str | None:
        for e in self.edges:
            if e.child == child:
                return e.parent
        return None

    def validate(self) -> None:
        """Check the forest / depth / single-parent invariants."""
        parents: dict[str, str] = {}
        for e in self.edges:
            if e.parent not in self.nodes or e.child not in self.nodes:
                raise GraphInvariantError(f"edge {e.parent}<-{e.child} references missing node")
            if e.relation not in RELATIONS:
                raise GraphInvariantError(f"unknown relation {e.relation!r}")
            if e.child in parents:
                raise GraphInvariantError(f"node {e.child} has more than one parent")
            parents[e.child] = e.parent
        for node_id, node in self.nodes.items():
            if node.kind is NodeKind.OBJECT:
                if node_id in parents:
                    raise GraphInvariantError(f"object node {node_id} must be a root")
                continue
            if node_id not in parents:
                continue  # an unattached fine node is allowed, just not part of a tree
            hops = 0
            cur = node_id
            while cur in parents:
                cur = parents[cur]
                hops += 1
                if hops > 2:
                    raise GraphInvariantError(f"node {node_id} is deeper than 2 hops")
            if self.nodes[cur].kind is not NodeKind.OBJECT:
                raise GraphInvariantError(f"node {node_id} does not root at an object")

    def to_jsonable(self) -> dict:
        return {
            "nodes": [n.to_jsonable() for n in self.nodes.values()],
            "edges": [e.to_jsonable() for e in self.edges],
            "provenance": [
                {"parent": p, "child": c, "score": float(s)}
                for (p, c), s in self.provenance.items()
            ],
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "SceneGraph":
        graph = cls()
        for n in obj["nodes"]:
            node = MapNode.from_jsonable(n)
            graph.nodes[node.id] = node
        graph.edges = [Edge.from_jsonable(e) for e in obj["edges"]]
        graph.provenance = {
            (str(p["parent"]), str(p["child"])): float(p["score"]) for p in obj["provenance"]
        }
        return graph


@dataclass(eq=False)
class EdgeBelief:
    """Per-fine-node association state over its candidate parent objects.

    ``logodds`` accumulates logit-transformed per-frame support scores,
    ``z`` is the soft assignment over candidates (kept on the simplex) and
    ``obs_frames`` records which frames contributed evidence per candidate.
    """

    fine_id: str
    candidates: list[str] = field(default_factory=list)
    logodds: dict[str, float] = field(default_factory=dict)
    z: dict[str, float] = field(default_factory=dict)
    z_prev: dict[str, float] = field(default_factory=dict)
    obs_frames: dict[str, set[int]] = field(default_factory=dict)

    def observed_frames(self) -> set[int]:
        frames: set[int] = set()
        for s in self.obs_frames.values():
            frames |= s
        return frames

    def check_simplex(self) -> None:
        for dist in (self.z, self.z_prev):
            if not dist:
                continue
            total = sum(dist.values())
            if abs(total - 1.0) > SIMPLEX_TOL or any(v < 0 for v in dist.values()):
                raise ValueError(f"assignment distribution off the simplex: {dist}")
