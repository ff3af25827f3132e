"""Incremental fusion engine: packets in, hierarchical scene graph out.

Per processed frame: validate the packet's scored edge candidates, associate
detections with map nodes (update matched, spawn unmatched), then fold edge
evidence into per-fine-node beliefs and re-derive each touched belief's
decision.  After the last frame, hierarchy shaping rewrites object<-unit
edges into object<-carrier<-unit chains.

The engine is a single writer; all mutation happens in ``step``.  Ablation
modes swap one mechanism each and are selected by configuration:

* ``assoc-baseline``   coarse 3D-IoU + semantic-cosine association
* ``no-go-count``      edge decisions by observation-count arg-max
* ``hierarchy-2d-off`` pairing from per-frame 2D containment co-occurrence
"""

from __future__ import annotations

from dataclasses import dataclass, field

from funscene import anchor2d, associate, edgeopt, hierarchy
from funscene.config import EngineConfig
from funscene.model import (
    Detection2D,
    Edge,
    EdgeBelief,
    FrameOrderError,
    FramePacket,
    InteractabilityMap,
    MapNode,
    NodeKind,
    SceneGraph,
)


@dataclass
class PendingDetection:
    det: Detection2D
    frames_left: int


@dataclass
class FusionEngine:
    config: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        self.nodes: dict[str, MapNode] = {}
        self.beliefs: dict[str, EdgeBelief] = {}
        self.events: list[dict] = []
        self.pending: list[PendingDetection] = []
        self.imap: InteractabilityMap | None = None
        self.last_frame_id: int | None = None
        self.decisions: dict[str, str] = {}
        self._containment_counts: dict[tuple[str, str], int] = {}
        self._next_node = 0

    # ------------------------------------------------------------------
    def step(self, packet: FramePacket) -> None:
        """Ingest one packet (frames must arrive with increasing ids)."""
        if self.last_frame_id is not None and packet.frame_id <= self.last_frame_id:
            raise FrameOrderError(
                f"frame {packet.frame_id} arrived after frame {self.last_frame_id}"
            )
        self.last_frame_id = packet.frame_id
        self.imap = (
            packet.imap if self.imap is None else self.imap.merged_with(packet.imap)
        )
        self._age_pending()

        det_to_node = self._associate(packet)
        self._ingest_edges(packet, det_to_node)
        if self.config.ablation == "hierarchy-2d-off":
            self._count_containments(packet, det_to_node)

    def _age_pending(self) -> None:
        for p in self.pending:
            p.frames_left -= 1
        self.pending = [p for p in self.pending if p.frames_left > 0]

    # ------------------------------------------------------------------
    def _associate(self, packet: FramePacket) -> dict[int, str]:
        cfg = self.config
        dets = packet.detections
        node_list = list(self.nodes.values())
        patches = [
            associate.backproject_mask(d, packet.pose, packet.intrinsics, cfg.fusion.patch_side)
            for d in dets
        ]

        if cfg.ablation == "assoc-baseline":
            boxes = [
                (p.min(axis=0), p.max(axis=0)) if len(p) else None for p in patches
            ]
            result = associate.greedy_match_frame(
                dets, node_list, boxes, cfg.gates.tau_ass
            )
        else:
            result = associate.match_frame(
                dets, node_list, cfg.weights, cfg.gates, packet.pose, packet.intrinsics,
            )

        det_to_node: dict[int, str] = {}
        for di, nj in result.matches:
            node = node_list[nj]
            associate.update_node(
                node, dets[di], packet.frame_id,
                points=patches[di],
                voxel=cfg.fusion.voxel_size,
                alpha=cfg.fusion.ema_alpha,
            )
            det_to_node[di] = node.id
            self.events.append(
                {"event": "match", "frame": packet.frame_id, "det": di, "node": node.id}
            )
        for di in result.unmatched_dets:
            det = dets[di]
            if det.centroid3d is None:
                self.pending.append(PendingDetection(det, self.config.fusion.pending_ttl))
                self.events.append(
                    {"event": "pending", "frame": packet.frame_id, "det": di}
                )
                continue
            node_id = f"n{self._next_node:04d}"
            self._next_node += 1
            node = associate.spawn_node(
                det, node_id, packet.frame_id,
                points=patches[di], voxel=cfg.fusion.voxel_size,
            )
            self.nodes[node_id] = node
            det_to_node[di] = node_id
            self.events.append(
                {"event": "spawn", "frame": packet.frame_id, "det": di, "node": node_id}
            )
        return det_to_node

    # ------------------------------------------------------------------
    def _ingest_edges(self, packet: FramePacket, det_to_node: dict[int, str]) -> None:
        cfg = self.config
        touched: set[str] = set()
        seen_pairs: set[tuple[str, str]] = set()
        for cand in packet.edge_candidates:
            if not anchor2d.admissible(cand, packet):
                continue
            if cand.object_idx not in det_to_node or cand.fine_idx not in det_to_node:
                continue
            obj_id = det_to_node[cand.object_idx]
            fine_id = det_to_node[cand.fine_idx]
            if fine_id == obj_id or (fine_id, obj_id) in seen_pairs:
                # many-to-one association (ablation mode) can alias two
                # detections onto one node; only the first evidence counts
                continue
            seen_pairs.add((fine_id, obj_id))
            obj_node = self.nodes[obj_id]
            if len(obj_node.points) < cfg.fusion.min_object_points:
                continue  # object 3D state not established yet
            belief = self.beliefs.get(fine_id)
            if belief is None:
                belief = EdgeBelief(fine_id=fine_id)
                self.beliefs[fine_id] = belief
            edgeopt.accumulate(belief, obj_id, cand.s_2d, packet.frame_id, cfg.edgeopt)
            touched.add(fine_id)
            self.events.append(
                {
                    "event": "evidence",
                    "frame": packet.frame_id,
                    "fine": fine_id,
                    "object": obj_id,
                    "s2d": float(cand.s_2d),
                }
            )
        # beliefs are re-optimized only on frames that brought new evidence
        for fine_id in sorted(touched):
            belief = self.beliefs[fine_id]
            if cfg.ablation == "no-go-count":
                choice = edgeopt.count_argmax(belief)
                score = float(len(belief.obs_frames[choice])) if choice else 0.0
                if len(belief.observed_frames()) < cfg.edgeopt.min_obs:
                    choice = None
            else:
                edgeopt.optimize_step(belief, cfg.edgeopt)
                choice = edgeopt.select_edge(belief, cfg.edgeopt)
                score = edgeopt.decision_score(belief).get(choice, 0.0) if choice else 0.0
            if choice is not None:
                self.decisions[fine_id] = choice
                self.events.append(
                    {
                        "event": "decision",
                        "frame": packet.frame_id,
                        "fine": fine_id,
                        "object": choice,
                        "score": score,
                    }
                )

    # ------------------------------------------------------------------
    def _count_containments(self, packet: FramePacket, det_to_node: dict[int, str]) -> None:
        """Per-frame 2D pairing votes: each unit votes for one containing carrier.

        The vote goes to the carrier with the highest containment this frame
        (ties to the earliest carrier detection), which is all the evidence a
        single frame offers.
        """
        imap = self.imap
        carrier_cats = set().union(*imap.carriers_of.values()) if imap.carriers_of else set()
        unit_cats = set().union(*imap.units_of.values()) if imap.units_of else set()
        delta = anchor2d.default_dilation(packet.intrinsics.width)
        fines = [
            (i, d) for i, d in enumerate(packet.detections)
            if d.kind.is_fine and i in det_to_node
        ]
        carriers = [(i, d) for i, d in fines if d.category in carrier_cats]
        for ui, udet in fines:
            if udet.category not in unit_cats or udet.mask.is_empty():
                continue
            best_ci, best_g = None, anchor2d.TAU_GEO
            for ci, cdet in carriers:
                if ci == ui:
                    continue
                g = anchor2d.mask_containment(udet.mask, cdet.mask, delta)
                if g > best_g:
                    best_ci, best_g = ci, g
            if best_ci is not None:
                key = (det_to_node[best_ci], det_to_node[ui])
                self._containment_counts[key] = self._containment_counts.get(key, 0) + 1

    # ------------------------------------------------------------------
    def finalize(self) -> SceneGraph:
        """Build the graph from the latest decisions and shape the hierarchy."""
        graph = SceneGraph()
        for node_id, node in self.nodes.items():
            graph.nodes[node_id] = node
        for fine_id, belief in self.beliefs.items():
            if self.config.ablation == "no-go-count":
                choice = edgeopt.count_argmax(belief)
                if len(belief.observed_frames()) < self.config.edgeopt.min_obs:
                    choice = None
                score = float(len(belief.obs_frames[choice])) if choice else 0.0
            else:
                choice = edgeopt.select_edge(belief, self.config.edgeopt)
                score = edgeopt.decision_score(belief).get(choice, 0.0) if choice else 0.0
            if choice is None:
                continue
            graph.edges.append(Edge(parent=choice, child=fine_id, relation="functional"))
            graph.provenance[(choice, fine_id)] = score

        if self.imap is not None:
            objects = [n for n in graph.nodes.values() if n.kind is NodeKind.OBJECT]
            for obj in objects:
                if self.config.ablation == "hierarchy-2d-off":
                    assignment = self._pair_from_counts(obj, graph)
                    carrier_ids = {
                        e.child for e in graph.edges
                        if e.parent == obj.id and self.imap.role_c(
                            graph.nodes[e.child].category, obj.category
                        )
                    }
                    hierarchy.apply_pairing(obj, graph, assignment, carrier_ids)
                else:
                    assignment = hierarchy.shape_hierarchy(
                        obj, graph, self.imap, self.config.hierarchy
                    )
                for u, c in sorted(assignment.items()):
                    self.events.append(
                        {"event": "chain", "object": obj.id, "carrier": c, "unit": u}
                    )
        for e in graph.edges:
            self.events.append(
                {
                    "event": "final_edge",
                    "parent": e.parent,
                    "child": e.child,
                    "relation": e.relation,
                    "score": graph.provenance.get((e.parent, e.child), 0.0),
                }
            )
        graph.validate()
        return graph

    def _pair_from_counts(self, obj: MapNode, graph: SceneGraph) -> dict[str, str]:
        """Greedy per-frame-evidence pairing (no 3D refinement)."""
        children = [graph.nodes[e.child] for e in graph.edges if e.parent == obj.id]
        carriers, units = hierarchy.partition_roles(obj, children, self.imap)
        carrier_ids = [c.id for c in carriers]
        assignment: dict[str, str] = {}
        for u in units:
            best, best_count = None, 0
            for cid in carrier_ids:
                if cid == u.id:
                    continue
                count = self._containment_counts.get((cid, u.id), 0)
                if count > best_count:
                    best, best_count = cid, count
            if best is not None:
                assignment[u.id] = best
        return hierarchy._resolve_dual_roles(
            assignment, set(carrier_ids), {u.id for u in units}
        )


def run_pipeline(packets, config: EngineConfig | None = None):
    """Run the engine over an iterable of packets at the configured stride.

    Returns (graph, events).  Frames are processed in arrival order; every
    stride-th packet (starting with the first) is ingested.
    """
    engine = FusionEngine(config or EngineConfig())
    for i, packet in enumerate(packets):
        if i % engine.config.stride == 0:
            engine.step(packet)
        else:
            if engine.last_frame_id is not None and packet.frame_id <= engine.last_frame_id:
                raise FrameOrderError(
                    f"frame {packet.frame_id} arrived after frame {engine.last_frame_id}"
                )
            engine.last_frame_id = packet.frame_id
    graph = engine.finalize()
    return graph, engine.events
