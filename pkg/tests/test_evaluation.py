"""Retrieval evaluation: label similarity, one-to-one matching, triplet recall."""

import numpy as np

from funscene import evaluation, synth
from funscene.engine import run_pipeline
from funscene.evaluation import EvalParams, evaluate, label_similarity, match_nodes
from funscene.model import Edge, MapNode, NodeKind, SceneGraph
from funscene.synth import GroundTruthScene, GtNode, GtTriplet


class TestLabelSimilarity:
    def test_identity(self):
        assert label_similarity("handle", "handle") == 1.0

    def test_token_overlap_with_synonym_lift(self):
        overlap = len({"handle"} & {"drawer", "handle"}) / len({"drawer", "handle"})
        assert overlap == 0.5
        s = label_similarity("handle", "drawer handle")
        assert s >= 0.5
        assert s >= 0.75  # the shipped synonym table lifts the pair

    def test_disjoint(self):
        assert label_similarity("handle", "window") == 0.0

    def test_symmetry(self):
        pairs = [("handle", "drawer handle"), ("Control Panel", "panel"), ("a b", "b c")]
        for a, b in pairs:
            assert label_similarity(a, b) == label_similarity(b, a)

    def test_normalization(self):
        assert label_similarity("Drawer  Handle", "handle drawer") == 1.0


def gt_scene(nodes, triplets):
    return GroundTruthScene(
        name="fixture", seed=0, nodes=nodes, triplets=triplets,
        trajectory=[np.eye(4)],
        intrinsics=synth.DEFAULT_INTRINSICS,
    )


def gt_node(node_id, kind, category, center, size=0.2, tags=()):
    c = np.asarray(center, dtype=float)
    s = np.full(3, size / 2)
    return GtNode(id=node_id, kind=kind, category=category,
                  box_min=tuple((c - s).tolist()), box_max=tuple((c + s).tolist()),
                  tags=tuple(tags))


def pred_node(node_id, kind, category, center, size=0.2):
    c = np.asarray(center, dtype=float)
    h = size / 2
    offsets = np.array([[-h, -h, -h], [h, h, h], [h, -h, h], [-h, h, -h]])
    return MapNode(id=node_id, kind=kind, category=category, points=c + offsets,
                   appearance=np.full(4, 0.25), obs_count=5, last_seen=10)


def graph_of(nodes, edges=()):
    graph = SceneGraph()
    for n in nodes:
        graph.nodes[n.id] = n
    graph.edges = [Edge(p, c, "functional") for p, c in edges]
    return graph


class TestMatchNodes:
    def test_exact_prediction_full_recall(self):
        gt = gt_scene(
            [gt_node("g0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0),
             gt_node("g1", NodeKind.UNIT, "handle", (0.2, 0, 0), 0.05)],
            [GtTriplet("g0", None, "g1")],
        )
        graph = graph_of(
            [pred_node("p0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0),
             pred_node("p1", NodeKind.UNIT, "handle", (0.2, 0, 0), 0.05)],
            [("p0", "p1")],
        )
        report = evaluate(gt, graph)
        assert report.node_recall["overall"] == 1.0
        assert report.triplet_recall["overall"] == 1.0

    def test_two_gt_one_prediction_half_recall(self):
        # one predicted drawer covering two identical ground-truth drawers
        # must hit exactly once
        gt = gt_scene(
            [gt_node("g0", NodeKind.CARRIER, "drawer", (0.0, 0, 0), 0.3),
             gt_node("g1", NodeKind.CARRIER, "drawer", (0.4, 0, 0), 0.3)],
            [],
        )
        graph = graph_of([pred_node("p0", NodeKind.CARRIER, "drawer", (0.2, 0, 0), 0.9)])
        report = evaluate(gt, graph)
        assert report.node_counts["carriers"] == (1, 2)
        assert report.node_recall["carriers"] == 0.5
        assert report.node_recall["overall"] == 0.5

    def test_empty_predictions(self):
        gt = gt_scene([gt_node("g0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)], [])
        report = evaluate(gt, SceneGraph())
        assert report.node_recall["overall"] == 0.0

    def test_one_to_one_audit(self):
        gt = gt_scene(
            [gt_node(f"g{k}", NodeKind.UNIT, "handle", (0.3 * k, 0, 0), 0.1) for k in range(3)],
            [],
        )
        graph = graph_of(
            [pred_node(f"p{k}", NodeKind.UNIT, "handle", (0.3 * k + 0.01, 0, 0), 0.1)
             for k in range(3)]
        )
        matches = match_nodes(gt, graph)
        assert len({m.gt_id for m in matches}) == len(matches)
        assert len({m.pred_id for m in matches}) == len(matches)

    def test_symmetric_fixture(self):
        nodes = [("cabinet", (0, 0, 0), 1.0), ("handle", (0.3, 0, 0), 0.06)]
        gt = gt_scene(
            [gt_node(f"g{k}", NodeKind.OBJECT if k == 0 else NodeKind.UNIT, c, p, s)
             for k, (c, p, s) in enumerate(nodes)],
            [],
        )
        graph = graph_of(
            [pred_node(f"p{k}", NodeKind.OBJECT if k == 0 else NodeKind.UNIT, c, p, s)
             for k, (c, p, s) in enumerate(nodes)]
        )
        report = evaluate(gt, graph)
        assert report.node_recall["overall"] == 1.0

    def test_monotone_adding_correct_node(self):
        gt = gt_scene(
            [gt_node("g0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0),
             gt_node("g1", NodeKind.UNIT, "handle", (0.2, 0, 0), 0.05)],
            [],
        )
        partial = graph_of([pred_node("p0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)])
        full = graph_of(
            [pred_node("p0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0),
             pred_node("p1", NodeKind.UNIT, "handle", (0.2, 0, 0), 0.05)]
        )
        r_partial = evaluate(gt, partial)
        r_full = evaluate(gt, full)
        for level in ("objects", "units", "overall"):
            a = r_partial.node_recall[level]
            b = r_full.node_recall[level]
            if a is not None and b is not None:
                assert b >= a


class TestTripletRecall:
    def chain_fixture(self, flat=False):
        gt = gt_scene(
            [gt_node("g0", NodeKind.OBJECT, "oven", (0, 0, 0), 0.8),
             gt_node("g1", NodeKind.CARRIER, "control panel", (0.1, 0, 0.3), 0.3),
             gt_node("g2", NodeKind.UNIT, "knob", (0.1, 0, 0.3), 0.05)],
            [GtTriplet("g0", "g1", "g2", tags=("hierarchical",))],
        )
        nodes = [pred_node("p0", NodeKind.OBJECT, "oven", (0, 0, 0), 0.8),
                 pred_node("p1", NodeKind.CARRIER, "control panel", (0.1, 0, 0.3), 0.3),
                 pred_node("p2", NodeKind.UNIT, "knob", (0.1, 0, 0.3), 0.05)]
        if flat:
            edges = [("p0", "p1"), ("p0", "p2")]
        else:
            edges = [("p0", "p1"), ("p1", "p2")]
        return gt, graph_of(nodes, edges)

    def test_chain_hit(self):
        gt, graph = self.chain_fixture()
        report = evaluate(gt, graph)
        assert report.triplet_recall["hierarchical"] == 1.0

    def test_flat_prediction_misses_chain(self):
        gt, graph = self.chain_fixture(flat=True)
        report = evaluate(gt, graph)
        assert report.triplet_recall["hierarchical"] == 0.0

    def test_three_of_four(self):
        gt_nodes, triplets, preds, edges = [], [], [], []
        for k in range(4):
            base = 1.0 * k
            gt_nodes += [
                gt_node(f"o{k}", NodeKind.OBJECT, "cabinet", (base, 0, 0), 0.6),
                gt_node(f"c{k}", NodeKind.CARRIER, "drawer", (base + 0.1, 0, 0.2), 0.25),
                gt_node(f"u{k}", NodeKind.UNIT, "handle", (base + 0.1, 0, 0.25), 0.05),
            ]
            triplets.append(GtTriplet(f"o{k}", f"c{k}", f"u{k}", tags=("hierarchical",)))
            preds += [
                pred_node(f"po{k}", NodeKind.OBJECT, "cabinet", (base, 0, 0), 0.6),
                pred_node(f"pc{k}", NodeKind.CARRIER, "drawer", (base + 0.1, 0, 0.2), 0.25),
                pred_node(f"pu{k}", NodeKind.UNIT, "handle", (base + 0.1, 0, 0.25), 0.05),
            ]
            edges.append((f"po{k}", f"pc{k}"))
            # break the fourth chain: the unit hangs off the object directly
            edges.append((f"pc{k}", f"pu{k}") if k < 3 else (f"po{k}", f"pu{k}"))
        report = evaluate(gt_scene(gt_nodes, triplets), graph_of(preds, edges))
        assert report.triplet_recall["overall"] == 0.75

    def test_pair_requires_direct_edge(self):
        gt = gt_scene(
            [gt_node("g0", NodeKind.OBJECT, "bottle", (0, 0, 0), 0.1),
             gt_node("g1", NodeKind.UNIT, "cap", (0, 0, 0.08), 0.04)],
            [GtTriplet("g0", None, "g1", tags=("tabletop",))],
        )
        hit = graph_of(
            [pred_node("p0", NodeKind.OBJECT, "bottle", (0, 0, 0), 0.1),
             pred_node("p1", NodeKind.UNIT, "cap", (0, 0, 0.08), 0.04)],
            [("p0", "p1")],
        )
        miss = graph_of(
            [pred_node("p0", NodeKind.OBJECT, "bottle", (0, 0, 0), 0.1),
             pred_node("p1", NodeKind.UNIT, "cap", (0, 0, 0.08), 0.04)],
        )
        assert evaluate(gt, hit).triplet_recall["tabletop"] == 1.0
        assert evaluate(gt, miss).triplet_recall["tabletop"] == 0.0


class TestRankCriterion:
    def test_rank_hit_for_close_synonym(self):
        gt = gt_scene(
            [gt_node("g0", NodeKind.UNIT, "handle", (0, 0, 0), 0.05),
             gt_node("g1", NodeKind.UNIT, "window", (3, 0, 0), 0.05)],
            [],
        )
        graph = graph_of([pred_node("p0", NodeKind.UNIT, "drawer handle", (0, 0, 0), 0.05)])
        report = evaluate(gt, graph, EvalParams(criterion="rank"))
        assert report.node_counts["units"][0] == 1


class TestReportOutput:
    def test_csv_structure(self):
        gt = gt_scene([gt_node("g0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)], [])
        graph = graph_of([pred_node("p0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)])
        report = evaluate(gt, graph)
        csv = evaluation.report_to_csv(report)
        lines = csv.strip().splitlines()
        assert lines[0].startswith("section,objects,carriers,units,tabletop,overall")
        assert len(lines) == 2

    def test_json_round_trip_values(self):
        gt = gt_scene([gt_node("g0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)], [])
        graph = graph_of([pred_node("p0", NodeKind.OBJECT, "cabinet", (0, 0, 0), 1.0)])
        report = evaluate(gt, graph)
        obj = report.to_jsonable()
        assert obj["nodes"]["recall"]["objects"] == 1.0
        assert obj["nodes"]["recall"]["carriers"] is None


class TestPipelineIntegration:
    def test_identical_graph_and_gt_all_ones(self):
        scene = synth.generate_scene("oven-panel", 2)
        packets = synth.render_stream(scene, synth.NoiseProfile(), 40)
        graph, _ = run_pipeline(packets)
        report = evaluate(scene, graph)
        assert report.node_recall["overall"] == 1.0
        assert report.triplet_recall["overall"] == 1.0
        assert report.triplet_recall["hierarchical"] == 1.0
