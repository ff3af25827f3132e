"""Global hierarchy shaping: rewrite object<-unit edges into chains.

After the sequence ends, each object's fine children are split into carrier
and unit candidates by role feasibility.  Units are paired to carriers to
maximise semantic compatibility plus geometric proximity, each unit taking
at most one carrier; paired units are re-parented under their carrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from funscene.model import Edge, InteractabilityMap, MapNode, SceneGraph

PAIRING_FLOOR = 0.5
PROXIMITY_SCALE = 0.25


@dataclass(frozen=True)
class HierarchyParams:
    pairing_floor: float = PAIRING_FLOOR
    proximity_scale: float = PROXIMITY_SCALE


@dataclass(frozen=True)
class PairingScore:
    c_prior: float
    g_near: float

    @property
    def total(self) -> float:
        return self.c_prior + self.g_near


def partition_roles(
    obj: MapNode, children: list[MapNode], imap: InteractabilityMap
) -> tuple[list[MapNode], list[MapNode]]:
    """Split an object's children into carrier and unit candidate sets.

    A child whose category is feasible for both roles appears in both sets;
    a category unknown to the map for this object lands in neither.
    """
    carriers = [f for f in children if imap.role_c(f.category, obj.category)]
    units = [f for f in children if imap.role_u(f.category, obj.category)]
    return carriers, units


def geometric_proximity(
    carrier: MapNode, unit: MapNode, scale: float = PROXIMITY_SCALE
) -> float:
    """Gaussian in centroid distance, normalised by the carrier's size."""
    d = float(np.linalg.norm(carrier.centroid - unit.centroid))
    width = scale * carrier.diag
    if width <= 0:
        return 1.0 if d == 0 else 0.0
    return math.exp(-(d * d) / (2.0 * width * width))


def pairing_scores(
    carriers: list[MapNode],
    units: list[MapNode],
    imap: InteractabilityMap,
    params: HierarchyParams,
) -> dict[tuple[str, str], PairingScore]:
    scores: dict[tuple[str, str], PairingScore] = {}
    for c in carriers:
        for u in units:
            if c.id == u.id:
                continue
            scores[(c.id, u.id)] = PairingScore(
                c_prior=imap.compatibility(c.category, u.category),
                g_near=geometric_proximity(c, u, params.proximity_scale),
            )
    return scores


def solve_pairing(
    carriers: list[MapNode],
    units: list[MapNode],
    scores: dict[tuple[str, str], PairingScore],
    floor: float,
) -> dict[str, str]:
    """Assign each unit to at most one carrier, maximising the total score.

    With only a per-unit constraint the objective separates, so the per-unit
    arg-max (ties to the earliest carrier) is the exact optimum; pairs whose
    score falls below the floor are not made.
    """
    assignment: dict[str, str] = {}
    for u in units:
        best, best_score = None, -math.inf
        for c in carriers:
            key = (c.id, u.id)
            if key not in scores:
                continue
            s = scores[key].total
            if s > best_score:
                best, best_score = c.id, s
        if best is not None and best_score >= floor:
            assignment[u.id] = best
    return assignment


def _resolve_dual_roles(
    assignment: dict[str, str], carrier_ids: set[str], unit_ids: set[str]
) -> dict[str, str]:
    """Nodes feasible in both roles act as carrier only if they received a unit.

    A dual-role node that receives units keeps its carrier role, so its own
    pairing as a unit is vetoed.  Vetoes can cascade (a receipt may vanish),
    so iterate to a fixpoint; each pass only removes assignments.
    """
    assignment = dict(assignment)
    dual = carrier_ids & unit_ids
    while True:
        received: set[str] = set(assignment.values())
        vetoed = [u for u in assignment if u in dual and u in received]
        if not vetoed:
            return assignment
        for u in vetoed:
            del assignment[u]


def shape_hierarchy(
    obj: MapNode,
    graph: SceneGraph,
    imap: InteractabilityMap,
    params: HierarchyParams | None = None,
) -> dict[str, str]:
    """Rewrite the graph's edges under one object; returns the unit->carrier pairing.

    Paired units lose their direct object edge and gain a carrier edge; the
    object<-carrier edge is retained, unpaired units keep their direct edge.
    Only edges are touched, never the node set.
    """
    params = params or HierarchyParams()
    children = [
        graph.nodes[e.child] for e in graph.edges if e.parent == obj.id
    ]
    carriers, units = partition_roles(obj, children, imap)
    scores = pairing_scores(carriers, units, imap, params)
    assignment = solve_pairing(carriers, units, scores, params.pairing_floor)
    assignment = _resolve_dual_roles(
        assignment, {c.id for c in carriers}, {u.id for u in units}
    )
    apply_pairing(obj, graph, assignment, {c.id for c in carriers})
    return assignment


def apply_pairing(
    obj: MapNode, graph: SceneGraph, assignment: dict[str, str], carrier_ids: set[str]
) -> None:
    rewritten: list[Edge] = []
    for e in graph.edges:
        if e.parent != obj.id:
            rewritten.append(e)
            continue
        if e.child in assignment:
            rewritten.append(Edge(parent=assignment[e.child], child=e.child, relation="unit-of"))
        elif e.child in carrier_ids and (e.child in assignment.values()):
            rewritten.append(Edge(parent=obj.id, child=e.child, relation="carrier-of"))
        else:
            rewritten.append(e)
    graph.edges[:] = rewritten
    for u, c in assignment.items():
        if (obj.id, u) in graph.provenance:
            graph.provenance[(c, u)] = graph.provenance.pop((obj.id, u))
