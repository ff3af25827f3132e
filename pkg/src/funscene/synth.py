"""Ground-truth scene recipes and noisy packet-stream rendering.

Scenes are box-world: every node is an axis-aligned 3D box, fine-grained
boxes nest inside their object's box (so projected containment holds from
any viewpoint), and a camera orbits the scene.  Streams are rendered with
controllable detection dropout, centroid noise, box jitter and support-score
misdirection, all driven by one splittable seeded generator.

Masks are rendered as projected-box rectangles; containment ratios are all
the downstream geometry needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from funscene import geometry
from funscene.masks import RleMask
from funscene.model import (
    Detection2D,
    EdgeCandidate2D,
    FramePacket,
    InteractabilityMap,
    Intrinsics,
    NodeKind,
)
from funscene.serialize import atomic_write_text, dumps_canonical

TRUE_EDGE_MEAN = 0.8
WRONG_EDGE_MEAN = 0.6
DETECTION_CONFIDENCE = 0.9
APPEARANCE_BINS = 16
EMBEDDING_DIM = 16
ORBIT_STEPS = 360


class RecipeError(ValueError):
    pass


def builtin_imap() -> InteractabilityMap:
    """The built-in object -> carrier/unit category table used by recipes."""
    carriers_of = {
        "cabinet": frozenset({"drawer", "door"}),
        "oven": frozenset({"door", "control panel"}),
        "dishwasher": frozenset({"door", "control panel"}),
        "pot": frozenset({"lid"}),
    }
    units_of = {
        "cabinet": frozenset({"handle", "knob"}),
        "oven": frozenset({"handle", "knob", "switch"}),
        "dishwasher": frozenset({"handle", "switch"}),
        "pot": frozenset({"knob", "handle"}),
        "kettle": frozenset({"handle"}),
        "pan": frozenset({"handle"}),
        "bottle": frozenset({"cap"}),
    }
    prior = {
        ("drawer", "handle"): 1.0,
        ("drawer", "knob"): 1.0,
        ("door", "handle"): 1.0,
        ("control panel", "knob"): 1.0,
        ("control panel", "switch"): 1.0,
        ("lid", "knob"): 1.0,
    }
    return InteractabilityMap(
        objects=frozenset(carriers_of) | frozenset(units_of),
        carriers_of=carriers_of,
        units_of=units_of,
        prior=prior,
    )


@dataclass(frozen=True)
class NoiseProfile:
    dropout_p: float = 0.0
    centroid_sigma: float = 0.0
    bbox_jitter: float = 0.0
    score_flip_p: float = 0.0
    score_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("dropout_p", "score_flip_p"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name} must lie in [0, 1)")
        for name in ("centroid_sigma", "bbox_jitter", "score_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class GtNode:
    id: str
    kind: NodeKind
    category: str
    box_min: tuple[float, float, float]
    box_max: tuple[float, float, float]
    tags: tuple[str, ...] = ()

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.box_min) + np.asarray(self.box_max)) / 2.0

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "category": self.category,
            "box_min": list(self.box_min),
            "box_max": list(self.box_max),
            "tags": list(self.tags),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GtNode":
        return cls(
            id=str(obj["id"]),
            kind=NodeKind(obj["kind"]),
            category=str(obj["category"]),
            box_min=tuple(float(v) for v in obj["box_min"]),
            box_max=tuple(float(v) for v in obj["box_max"]),
            tags=tuple(obj.get("tags", [])),
        )


@dataclass(frozen=True)
class GtTriplet:
    object: str
    carrier: str | None
    unit: str
    tags: tuple[str, ...] = ()

    @property
    def is_pair(self) -> bool:
        return self.carrier is None

    def to_jsonable(self) -> dict:
        return {
            "object": self.object,
            "carrier": self.carrier,
            "unit": self.unit,
            "tags": list(self.tags),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GtTriplet":
        return cls(
            object=str(obj["object"]),
            carrier=None if obj.get("carrier") is None else str(obj["carrier"]),
            unit=str(obj["unit"]),
            tags=tuple(obj.get("tags", [])),
        )


@dataclass(eq=False)
class GroundTruthScene:
    name: str
    seed: int
    nodes: list[GtNode]
    triplets: list[GtTriplet]
    trajectory: list[np.ndarray]
    intrinsics: Intrinsics
    imap: InteractabilityMap = field(default_factory=builtin_imap)

    def node_by_id(self, node_id: str) -> GtNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def edge_pairs(self) -> set[tuple[str, str]]:
        """All (parent, child) edges implied by the triplets and pairs."""
        pairs: set[tuple[str, str]] = set()
        for t in self.triplets:
            if t.is_pair:
                pairs.add((t.object, t.unit))
            else:
                pairs.add((t.object, t.carrier))
                pairs.add((t.carrier, t.unit))
        return pairs

    def parent_of_fine(self, fine_id: str) -> str | None:
        """The object a fine node functionally belongs to (pre-hierarchy)."""
        for t in self.triplets:
            if t.unit == fine_id or t.carrier == fine_id:
                return t.object
        return None

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "nodes": [n.to_jsonable() for n in self.nodes],
            "triplets": [t.to_jsonable() for t in self.triplets],
            "trajectory": [[[float(v) for v in row] for row in p] for p in self.trajectory],
            "intrinsics": self.intrinsics.to_jsonable(),
            "imap": self.imap.to_jsonable(),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GroundTruthScene":
        return cls(
            name=str(obj["name"]),
            seed=int(obj["seed"]),
            nodes=[GtNode.from_jsonable(n) for n in obj["nodes"]],
            triplets=[GtTriplet.from_jsonable(t) for t in obj["triplets"]],
            trajectory=[np.asarray(p, dtype=np.float64) for p in obj["trajectory"]],
            intrinsics=Intrinsics.from_jsonable(obj["intrinsics"]),
            imap=InteractabilityMap.from_jsonable(obj["imap"]),
        )


def write_scene(path: str, scene: GroundTruthScene) -> None:
    atomic_write_text(path, dumps_canonical(scene.to_jsonable()) + "\n")


def read_scene(path: str) -> GroundTruthScene:
    with open(path, "r", encoding="utf-8") as fh:
        return GroundTruthScene.from_jsonable(json.load(fh))


# ----------------------------------------------------------------------
# scene building blocks
# ----------------------------------------------------------------------

def _box(center, size) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    c = np.asarray(center, dtype=np.float64)
    s = np.asarray(size, dtype=np.float64) / 2.0
    return tuple((c - s).tolist()), tuple((c + s).tolist())


class _SceneBuilder:
    def __init__(self):
        self.nodes: list[GtNode] = []
        self.triplets: list[GtTriplet] = []

    def add(self, kind: NodeKind, category: str, center, size, tags=()) -> str:
        node_id = f"g{len(self.nodes):03d}"
        box_min, box_max = _box(center, size)
        self.nodes.append(
            GtNode(id=node_id, kind=kind, category=category,
                   box_min=box_min, box_max=box_max, tags=tuple(tags))
        )
        return node_id

    def triplet(self, obj: str, carrier: str, unit: str, tags=()) -> None:
        self.triplets.append(GtTriplet(object=obj, carrier=carrier, unit=unit, tags=tuple(tags)))

    def pair(self, obj: str, unit: str, tags=()) -> None:
        self.triplets.append(GtTriplet(object=obj, carrier=None, unit=unit, tags=tuple(tags)))


def _add_drawer_cabinet(b: _SceneBuilder, origin=(0.0, 0.55, 0.75)) -> str:
    """A sideboard cabinet with three side-by-side drawers, handles inset."""
    ox, oy, oz = origin
    cab = b.add(NodeKind.OBJECT, "cabinet", (ox, oy, oz), (1.2, 0.5, 1.5))
    for i, dx in enumerate((-0.38, 0.0, 0.38)):
        drawer = b.add(NodeKind.CARRIER, "drawer", (ox + dx, oy - 0.0, oz + 0.40), (0.34, 0.44, 0.33))
        handle = b.add(NodeKind.UNIT, "handle", (ox + dx, oy - 0.195, oz + 0.40), (0.12, 0.03, 0.04))
        b.triplet(cab, drawer, handle, tags=("hierarchical",))
    return cab


def _add_panel_appliance(
    b: _SceneBuilder, category: str, unit_category: str, origin, n_units: int = 2
) -> str:
    """Appliance whose control panel sits on the door (nested carriers)."""
    ox, oy, oz = origin
    obj = b.add(NodeKind.OBJECT, category, (ox, oy, oz), (0.6, 0.55, 0.9))
    door = b.add(NodeKind.CARRIER, "door", (ox, oy - 0.22, oz - 0.07), (0.5, 0.08, 0.55))
    panel = b.add(NodeKind.CARRIER, "control panel", (ox, oy - 0.22, oz + 0.13), (0.44, 0.06, 0.12))
    handle = b.add(NodeKind.UNIT, "handle", (ox, oy - 0.225, oz - 0.28), (0.3, 0.03, 0.04))
    b.triplet(obj, door, handle, tags=("hierarchical",))
    spread = (-0.12, 0.12) if n_units == 2 else tuple(np.linspace(-0.15, 0.15, n_units))
    for dx in spread:
        unit = b.add(NodeKind.UNIT, unit_category, (ox + dx, oy - 0.225, oz + 0.13), (0.05, 0.035, 0.05))
        b.triplet(obj, panel, unit, tags=("hierarchical",))
    return obj


def _add_pot(b: _SceneBuilder, origin, tags=("tabletop",)) -> str:
    ox, oy, oz = origin
    pot = b.add(NodeKind.OBJECT, "pot", (ox, oy, oz), (0.26, 0.26, 0.18), tags)
    lid = b.add(NodeKind.CARRIER, "lid", (ox, oy, oz + 0.066), (0.14, 0.14, 0.03), tags)
    knob = b.add(NodeKind.UNIT, "knob", (ox, oy, oz + 0.066), (0.035, 0.035, 0.028), tags)
    # side handle low on the body, clearly outside the lid's proximity scale
    handle = b.add(NodeKind.UNIT, "handle", (ox + 0.10, oy, oz - 0.065), (0.05, 0.12, 0.04), tags)
    b.triplet(pot, lid, knob, tags=("hierarchical",) + tuple(tags))
    b.pair(pot, handle, tags=tags)
    return pot


def _add_handled_item(b: _SceneBuilder, category: str, origin, size, handle_center, handle_size,
                      tags=("tabletop",)) -> str:
    obj = b.add(NodeKind.OBJECT, category, origin, size, tags)
    handle = b.add(NodeKind.UNIT, "handle", handle_center, handle_size, tags)
    b.pair(obj, handle, tags=tags)
    return obj


def _add_bottle(b: _SceneBuilder, origin, tags=("tabletop",), size_scale=1.0) -> str:
    ox, oy, oz = origin
    s = size_scale
    bottle = b.add(NodeKind.OBJECT, "bottle", (ox, oy, oz), (0.09 * s, 0.09 * s, 0.26 * s), tags)
    cap = b.add(NodeKind.UNIT, "cap", (ox, oy, oz + 0.105 * s),
                (0.05 * s, 0.05 * s, 0.05 * s), tags)
    b.pair(bottle, cap, tags=tags)
    return bottle


def _recipe_cabinet_3drawer(b: _SceneBuilder) -> None:
    _add_drawer_cabinet(b)


def _recipe_bottle(b: _SceneBuilder) -> None:
    _add_bottle(b, (0.0, 0.0, 0.82))


def _recipe_pot(b: _SceneBuilder) -> None:
    _add_pot(b, (0.0, 0.0, 0.80))


def _recipe_oven_panel(b: _SceneBuilder) -> None:
    _add_panel_appliance(b, "oven", "knob", (0.0, 0.3, 0.45))


def _recipe_twin_cabinet(b: _SceneBuilder) -> None:
    """Two interpenetrating same-category objects sharing one handle.

    The handle sits in the intersection volume, so both objects contain it
    from every viewpoint: the stress fixture for attribution flipping.
    """
    cab_a = b.add(NodeKind.OBJECT, "cabinet", (-0.25, 0.0, 0.75), (1.0, 0.5, 1.5))
    b.add(NodeKind.OBJECT, "cabinet", (0.25, 0.0, 0.75), (1.0, 0.5, 1.5))
    handle = b.add(NodeKind.UNIT, "handle", (0.0, -0.2, 0.9), (0.12, 0.03, 0.04))
    b.pair(cab_a, handle)


def _recipe_kitchen_small(b: _SceneBuilder) -> None:
    """Hutch cabinet with drawers and an open shelf of tabletop items, plus
    two panel-on-door appliances.  The shelf items sit inside the cabinet's
    hull, so their units stay geometrically ambiguous between the item and
    the cabinet from every viewpoint."""
    _add_drawer_cabinet(b, origin=(0.0, 0.55, 0.75))
    _add_panel_appliance(b, "oven", "knob", (1.0, 0.5, 0.45))
    _add_panel_appliance(b, "dishwasher", "switch", (-1.0, 0.5, 0.45))
    # shelf inside the cabinet hull (z band below the drawers)
    _add_pot(b, (-0.30, 0.55, 0.62))
    # kettle and pan handles protrude from their objects but stay inside the
    # cabinet, costing the true edge containment from oblique views
    _add_handled_item(
        b, "kettle", (0.10, 0.55, 0.62), (0.24, 0.24, 0.22),
        handle_center=(0.295, 0.55, 0.66), handle_size=(0.15, 0.04, 0.05),
    )
    _add_handled_item(
        b, "pan", (0.42, 0.55, 0.58), (0.24, 0.2, 0.10),
        handle_center=(0.42, 0.70, 0.58), handle_size=(0.05, 0.16, 0.04),
    )
    _add_bottle(b, (-0.52, 0.55, 0.64))
    _add_bottle(b, (-0.36, 0.55, 0.64))
    # compact spice row: adjacent same-category instances whose noisy boxes
    # overlap, stressing identity under dense packing
    for k in range(3):
        _add_bottle(b, (-0.50 + 0.075 * k, 0.40, 0.88), size_scale=0.62)


RECIPES = {
    "cabinet-3drawer": _recipe_cabinet_3drawer,
    "bottle": _recipe_bottle,
    "pot": _recipe_pot,
    "oven-panel": _recipe_oven_panel,
    "twin-cabinet": _recipe_twin_cabinet,
    "kitchen-small": _recipe_kitchen_small,
}

DEFAULT_INTRINSICS = Intrinsics(fx=525.0, fy=525.0, cx=320.0, cy=240.0, width=640, height=480)


def generate_scene(recipe: str, seed: int) -> GroundTruthScene:
    """Instantiate a recipe: nodes, triplets and a dense orbit trajectory."""
    if recipe not in RECIPES:
        raise RecipeError(f"unknown recipe {recipe!r}; available: {sorted(RECIPES)}")
    builder = _SceneBuilder()
    RECIPES[recipe](builder)
    imap = builtin_imap()
    for node in builder.nodes:
        if node.kind is NodeKind.OBJECT and node.category not in imap.objects:
            raise RecipeError(f"category {node.category!r} missing from the built-in table")
    centers = np.array([n.center for n in builder.nodes])
    target = centers.mean(axis=0)
    spread = float(np.linalg.norm(centers - target, axis=1).max())
    radius = max(2.4, 2.0 * spread + 1.6)
    height = target[2] + 1.1
    trajectory = []
    for k in range(ORBIT_STEPS):
        angle = 2.0 * np.pi * k / ORBIT_STEPS
        eye = np.array([target[0] + radius * np.cos(angle),
                        target[1] + radius * np.sin(angle),
                        height])
        trajectory.append(geometry.look_at(eye, target))
    return GroundTruthScene(
        name=recipe,
        seed=seed,
        nodes=builder.nodes,
        triplets=builder.triplets,
        trajectory=trajectory,
        intrinsics=DEFAULT_INTRINSICS,
        imap=imap,
    )


# ----------------------------------------------------------------------
# stream rendering
# ----------------------------------------------------------------------

def node_appearance(scene: GroundTruthScene, node_index: int) -> np.ndarray:
    """Per-instance sparse color histogram, deterministic in (scene.seed, node)."""
    rng = np.random.default_rng(np.random.SeedSequence([scene.seed, node_index, 11]))
    hist = rng.dirichlet(np.full(APPEARANCE_BINS, 0.3))
    return hist / hist.sum()


def category_embedding(category: str) -> np.ndarray:
    """Category-level unit embedding (same category -> same vector)."""
    digest = sum((i + 1) * ord(c) for i, c in enumerate(category))
    rng = np.random.default_rng(np.random.SeedSequence([digest, 23]))
    v = rng.normal(size=EMBEDDING_DIM)
    return v / np.linalg.norm(v)


def _corners(node: GtNode) -> np.ndarray:
    lo, hi = np.asarray(node.box_min), np.asarray(node.box_max)
    return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


def _projected_rect(node: GtNode, pose, intr) -> tuple[float, float, float, float] | None:
    uv, valid = geometry.project_points(_corners(node), pose, intr, min_depth=0.25)
    if not valid.all():
        return None
    x0, y0 = uv.min(axis=0)
    x1, y1 = uv.max(axis=0)
    if x1 - x0 < 1.0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1.0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    # clip to the image, requiring some visible area
    cx0, cy0 = max(0.0, x0), max(0.0, y0)
    cx1, cy1 = min(float(intr.width), x1), min(float(intr.height), y1)
    if cx1 - cx0 < 1.0 or cy1 - cy0 < 1.0:
        return None
    return (cx0, cy0, cx1, cy1)


def render_stream(
    scene: GroundTruthScene, profile: NoiseProfile, n_frames: int
) -> list[FramePacket]:
    """Render a packet stream from a scene under a noise profile.

    Per frame: visible nodes become detections (subject to dropout and
    centroid/box noise); every imap-permitted (object, fine) pair whose
    rendered masks pass the containment pre-filter becomes a scored
    candidate.  True edges draw around the high support mean; other pairs
    draw around the low mean, except that with probability ``score_flip_p``
    a frame's draws favor one wrong neighbor instead.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    from funscene.anchor2d import TAU_DET, TAU_GEO, default_dilation

    intr = scene.intrinsics
    delta = default_dilation(intr.width).delta
    pose_idx = np.linspace(0, len(scene.trajectory) - 1, n_frames).round().astype(int)
    root = np.random.SeedSequence([profile.seed, scene.seed, 3])
    frame_seeds = root.spawn(n_frames)
    appearances = [node_appearance(scene, i) for i in range(len(scene.nodes))]
    embeddings = {n.category: category_embedding(n.category) for n in scene.nodes}
    true_parent = {n.id: scene.parent_of_fine(n.id) for n in scene.nodes}

    packets: list[FramePacket] = []
    for f in range(n_frames):
        rng = np.random.default_rng(frame_seeds[f])
        pose = scene.trajectory[pose_idx[f]]
        detections: list[Detection2D] = []
        det_index: dict[str, int] = {}
        rects: dict[str, tuple[float, float, float, float]] = {}
        for i, node in enumerate(scene.nodes):
            rect = _projected_rect(node, pose, intr)
            dropped = profile.dropout_p > 0 and rng.random() < profile.dropout_p
            if rect is None or dropped:
                continue
            if profile.bbox_jitter > 0:
                jit = rng.normal(0.0, profile.bbox_jitter, size=4)
                x0, y0, x1, y1 = rect
                x0, x1 = sorted((x0 + jit[0], x1 + jit[1]))
                y0, y1 = sorted((y0 + jit[2], y1 + jit[3]))
                rect = (
                    max(0.0, x0), max(0.0, y0),
                    min(float(intr.width), max(x0 + 1.0, x1)),
                    min(float(intr.height), max(y0 + 1.0, y1)),
                )
            centroid = node.center
            if profile.centroid_sigma > 0:
                # masked-depth centroids err mostly along the viewing ray;
                # lateral error (mask centring) is a fraction of that
                ray = centroid - pose[:3, 3]
                ray = ray / np.linalg.norm(ray)
                lateral = rng.normal(0.0, profile.centroid_sigma / 4.0, size=3)
                centroid = (
                    centroid
                    + ray * rng.normal(0.0, profile.centroid_sigma)
                    + (lateral - ray * np.dot(lateral, ray))
                )
            mask = RleMask.from_rect(
                int(np.floor(rect[0])), int(np.floor(rect[1])),
                int(np.ceil(rect[2])), int(np.ceil(rect[3])),
                intr.width, intr.height,
            )
            det_index[node.id] = len(detections)
            rects[node.id] = rect
            detections.append(
                Detection2D(
                    frame_id=f,
                    bbox=rect,
                    category=node.category,
                    confidence=DETECTION_CONFIDENCE,
                    mask=mask,
                    appearance=appearances[i],
                    embedding=embeddings[node.category],
                    centroid3d=centroid,
                    kind=node.kind,
                )
            )

        candidates: list[EdgeCandidate2D] = []
        for fine in scene.nodes:
            if not fine.kind.is_fine or fine.id not in det_index:
                continue
            containing: list[str] = []
            for obj in scene.nodes:
                if obj.kind is not NodeKind.OBJECT or obj.id not in det_index:
                    continue
                if not scene.imap.allows_fine(fine.category, obj.category):
                    continue
                g = _rect_contain(rects[fine.id], rects[obj.id], delta, intr)
                if g > TAU_GEO and DETECTION_CONFIDENCE > TAU_DET:
                    containing.append(obj.id)
            if not containing:
                continue
            truth = true_parent[fine.id]
            favored_wrong = None
            wrongs = [o for o in containing if o != truth]
            if truth in containing and wrongs and profile.score_flip_p > 0:
                if rng.random() < profile.score_flip_p:
                    favored_wrong = wrongs[rng.integers(len(wrongs))]
            for obj_id in containing:
                if obj_id == truth:
                    mean = WRONG_EDGE_MEAN if favored_wrong is not None else TRUE_EDGE_MEAN
                elif obj_id == favored_wrong:
                    mean = TRUE_EDGE_MEAN
                else:
                    mean = WRONG_EDGE_MEAN
                s = mean if profile.score_sigma == 0 else rng.normal(mean, profile.score_sigma)
                s = float(min(1.0, max(0.02, s)))
                candidates.append(
                    EdgeCandidate2D(
                        frame_id=f,
                        object_idx=det_index[obj_id],
                        fine_idx=det_index[fine.id],
                        s_det=DETECTION_CONFIDENCE,
                        g_camc=_rect_contain(rects[fine.id], rects[obj_id], delta, intr),
                        s_2d=s,
                    )
                )
        candidates.sort(key=lambda c: (c.object_idx, c.fine_idx))
        packets.append(
            FramePacket(
                frame_id=f,
                timestamp=f / 30.0,
                pose=pose,
                intrinsics=intr,
                detections=detections,
                edge_candidates=candidates,
                imap=scene.imap,
            )
        )
    return packets


def _rect_contain(fine_rect, obj_rect, delta, intr) -> float:
    fx0, fy0, fx1, fy1 = fine_rect
    fx0, fy0 = np.floor(fx0), np.floor(fy0)
    fx1, fy1 = np.ceil(fx1), np.ceil(fy1)
    ox0, oy0, ox1, oy1 = obj_rect
    dx0 = max(0.0, np.floor(ox0) - delta)
    dy0 = max(0.0, np.floor(oy0) - delta)
    dx1 = min(float(intr.width), np.ceil(ox1) + delta)
    dy1 = min(float(intr.height), np.ceil(oy1) + delta)
    ix0, iy0 = max(fx0, dx0), max(fy0, dy0)
    ix1, iy1 = min(fx1, dx1), min(fy1, dy1)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    area = (fx1 - fx0) * (fy1 - fy0)
    return float((ix1 - ix0) * (iy1 - iy0) / area)
