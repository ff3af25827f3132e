"""Acceptance suite: one test per acceptance criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.  The noisy multi-seed runs are shared across criteria through
module-scoped fixtures.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from funscene import synth
from funscene.associate import max_weight_matching
from funscene.config import EngineConfig
from funscene.edgeopt import EdgeOptParams, accumulate, solve_assignment
from funscene.engine import FusionEngine, run_pipeline
from funscene.evaluation import evaluate
from funscene.hierarchy import HierarchyParams, pairing_scores, solve_pairing
from funscene.model import EdgeBelief, NodeKind

from tests.test_engine import graphs_equivalent
from tests.test_evaluation import graph_of, gt_node, gt_scene, pred_node
from tests.test_hierarchy import brute_force_pairing, kitchen_imap, make_node


def report(name: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} ({detail})")


NOISY = dict(dropout_p=0.3, centroid_sigma=0.03, score_flip_p=0.2)
SEEDS = range(10)


@pytest.fixture(scope="module")
def kitchen_scene():
    return synth.generate_scene("kitchen-small", 7)


@pytest.fixture(scope="module")
def noisy_runs(kitchen_scene):
    """Per-seed noisy kitchen runs for every engine mode plus stride 3."""
    out = {
        "full": [], "no-go-count": [], "assoc-baseline": [], "hierarchy-2d-off": [],
        "stride3": [],
    }
    full_seconds = 0.0
    for seed in SEEDS:
        profile = synth.NoiseProfile(seed=seed, **NOISY)
        t0 = time.perf_counter()
        packets = synth.render_stream(kitchen_scene, profile, 120)
        render_s = time.perf_counter() - t0

        t0 = time.perf_counter()
        graph, _ = run_pipeline(packets, EngineConfig())
        rep = evaluate(kitchen_scene, graph)
        full_seconds += render_s + (time.perf_counter() - t0)
        out["full"].append(rep)

        for mode in ("no-go-count", "assoc-baseline", "hierarchy-2d-off"):
            graph, _ = run_pipeline(packets, EngineConfig(ablation=mode))
            out[mode].append(evaluate(kitchen_scene, graph))

        graph, _ = run_pipeline(packets, EngineConfig(stride=3))
        out["stride3"].append(evaluate(kitchen_scene, graph))
    out["full_seconds"] = full_seconds
    return out


def test_matching_oracle():
    """500 random gated matrices up to 8x8: exact brute-force totals, < 5 s."""
    from tests.test_associate import brute_force_best

    rng = np.random.default_rng(42)
    cases = []
    for _ in range(500):
        r, c = rng.integers(1, 9, size=2)
        scores = rng.uniform(0.45, 1.0, (r, c))
        gated = rng.random((r, c)) < 0.55
        cases.append((np.where(gated, scores, 0.0), gated))
    t0 = time.perf_counter()
    totals = [max_weight_matching(s, g)[1] for s, g in cases]
    elapsed = time.perf_counter() - t0
    exact = sum(
        1 for (s, g), total in zip(cases, totals)
        if total == pytest.approx(brute_force_best(s, g), abs=1e-9)
    )
    passed = exact == 500 and elapsed < 5.0
    report("matching-oracle", passed, f"{exact}/500 exact, {elapsed:.2f}s")
    assert exact == 500
    assert elapsed < 5.0


def test_simplex_solver_oracle():
    """200 random 3-candidate problems vs dense grid search (step 1e-3)."""
    from tests.test_edgeopt import grid_search_2simplex, objective

    rng = np.random.default_rng(7)
    worst = 0.0
    softmax_worst = 0.0
    for _ in range(200):
        l_vec = rng.uniform(-5, 5, 3)
        z_prev = rng.dirichlet(np.ones(3))
        lh = float(rng.choice([0.5, 1.0, 2.0]))
        ld = float(rng.choice([0.5, 1.0, 2.0]))
        params = EdgeOptParams(lambda_h=lh, lambda_d=ld)
        z = solve_assignment(l_vec, z_prev, params)
        value = objective(z, l_vec, z_prev, lh, ld)
        grid_best, _ = grid_search_2simplex(l_vec, z_prev, lh, ld)
        worst = max(worst, abs(value - grid_best))

        z0 = solve_assignment(l_vec, z_prev, EdgeOptParams(lambda_h=lh, lambda_d=0.0))
        ref = np.exp(l_vec / lh - (l_vec / lh).max())
        softmax_worst = max(softmax_worst, float(np.abs(z0 - ref / ref.sum()).max()))
    passed = worst <= 1e-3 and softmax_worst <= 1e-6
    report("simplex-solver-oracle", passed,
           f"max objective gap {worst:.2e} (tol 1e-3), softmax gap {softmax_worst:.2e} (tol 1e-6)")
    assert worst <= 1e-3
    assert softmax_worst <= 1e-6


def test_log_odds_arithmetic():
    """Accumulation reproduces independently computed logit sums."""
    params = EdgeOptParams()
    belief = EdgeBelief(fine_id="f")
    accumulate(belief, "o", 0.73, 0, params)
    accumulate(belief, "o", 0.73, 1, params)
    two_obs_oracle = 2.0 * math.log(0.73 / 0.27)  # = 1.98925 (4 d.p.)
    two_ok = abs(belief.logodds["o"] - two_obs_oracle) <= 1e-4

    belief2 = EdgeBelief(fine_id="f")
    accumulate(belief2, "o", 1.0, 5, params)
    clamp_oracle = math.log((1.0 - 1e-6) / 1e-6)
    clamp_ok = (
        abs(belief2.logodds["o"] - clamp_oracle) <= 1e-3
        and abs(clamp_oracle - 13.8155) <= 1e-3
    )
    passed = two_ok and clamp_ok
    report("log-odds-arithmetic", passed,
           f"2x0.73 -> {belief.logodds['o']:.5f} (oracle {two_obs_oracle:.5f}), "
           f"clamped logit(1.0) -> {belief2.logodds['o']:.4f}")
    assert two_ok
    assert clamp_ok


def test_noiseless_completeness():
    """Zero-noise streams reproduce the ground truth exactly on every recipe."""
    failures = []
    for recipe in sorted(synth.RECIPES):
        scene = synth.generate_scene(recipe, 7)
        packets = synth.render_stream(scene, synth.NoiseProfile(), 90)
        graph, _ = run_pipeline(packets)
        rep = evaluate(scene, graph)
        node_r = rep.node_recall["overall"]
        trip_r = rep.triplet_recall["overall"]
        ok = (
            len(graph.nodes) == len(scene.nodes)
            and node_r == 1.0
            and (trip_r is None or trip_r == 1.0)
        )
        if not ok:
            failures.append((recipe, node_r, trip_r, len(graph.nodes), len(scene.nodes)))
    passed = not failures
    report("noiseless-completeness", passed,
           f"{len(synth.RECIPES)} recipes exact" if passed else f"failures: {failures}")
    assert not failures


def test_noisy_recovery(noisy_runs):
    """kitchen-small, dropout .3 / sigma .03 / flip .2, 120 frames, 10 seeds."""
    node_mean = float(np.mean([r.node_recall["overall"] for r in noisy_runs["full"]]))
    trip_mean = float(np.mean([r.triplet_recall["overall"] for r in noisy_runs["full"]]))
    seconds = noisy_runs["full_seconds"]
    passed = node_mean >= 0.95 and trip_mean >= 0.90 and seconds < 60.0
    report("noisy-recovery", passed,
           f"mean node {node_mean:.3f} >= 0.95, mean triplet {trip_mean:.3f} >= 0.90, "
           f"{seconds:.1f}s < 60s")
    assert node_mean >= 0.95
    assert trip_mean >= 0.90
    assert seconds < 60.0


def test_jitter_suppression():
    """Two-candidate flip stream: fewer decision switches than argmax switches."""
    scene = synth.generate_scene("twin-cabinet", 0)
    wins = 0
    details = []
    for seed in SEEDS:
        profile = synth.NoiseProfile(seed=seed, score_flip_p=0.3)
        packets = synth.render_stream(scene, profile, 100)
        inst = []
        for packet in packets:
            cands = packet.edge_candidates
            if len(cands) < 2:
                continue
            best = max(cands, key=lambda c: c.s_2d)
            inst.append(packet.detections[best.object_idx].centroid3d[0] < 0)
        inst_switches = sum(1 for a, b in zip(inst, inst[1:]) if a != b)
        engine = FusionEngine(EngineConfig())
        for packet in packets:
            engine.step(packet)
        decisions = [e["object"] for e in engine.events if e["event"] == "decision"]
        sel_switches = sum(1 for a, b in zip(decisions, decisions[1:]) if a != b)
        wins += sel_switches < inst_switches
        details.append((inst_switches, sel_switches))
    passed = wins >= 9
    report("jitter-suppression", passed, f"{wins}/10 seeds suppressed, pairs {details[:3]}...")
    assert wins >= 9


def test_ablation_direction(noisy_runs):
    """Full beats each ablation in the direction the variants predict."""
    full_trip = [r.triplet_recall["overall"] for r in noisy_runs["full"]]
    full_hier = [r.triplet_recall["hierarchical"] for r in noisy_runs["full"]]
    nogo = [r.triplet_recall["overall"] for r in noisy_runs["no-go-count"]]
    assoc = [r.triplet_recall["overall"] for r in noisy_runs["assoc-baseline"]]
    twod = [r.triplet_recall["hierarchical"] for r in noisy_runs["hierarchy-2d-off"]]
    beats_nogo = sum(a > b for a, b in zip(full_trip, nogo))
    beats_assoc = sum(a > b for a, b in zip(full_trip, assoc))
    beats_twod = sum(a > b for a, b in zip(full_hier, twod))
    passed = beats_nogo >= 8 and beats_assoc >= 8 and beats_twod >= 8
    report("ablation-direction", passed,
           f"full>no-go-count {beats_nogo}/10, full>assoc-baseline {beats_assoc}/10, "
           f"full>hierarchy-2d-off {beats_twod}/10 (all need >= 8)")
    assert beats_nogo >= 8
    assert beats_assoc >= 8
    assert beats_twod >= 8


def test_hierarchy_oracle():
    """Pairing equals exhaustive search on all |C|<=3, |U|<=4 fixtures."""
    imap = kitchen_imap()
    params = HierarchyParams()
    rng = np.random.default_rng(19)
    checked = mismatches = 0
    for n_c in (1, 2, 3):
        for n_u in (1, 2, 3, 4):
            for _ in range(10):
                carriers = [
                    make_node(f"c{k}", NodeKind.CARRIER, "drawer", rng.uniform(-0.4, 0.4, 3))
                    for k in range(n_c)
                ]
                units = [
                    make_node(f"u{k}", NodeKind.UNIT, "handle", rng.uniform(-0.4, 0.4, 3), 0.05)
                    for k in range(n_u)
                ]
                scores = pairing_scores(carriers, units, imap, params)
                got = solve_pairing(carriers, units, scores, params.pairing_floor)
                expected = brute_force_pairing(carriers, units, scores, params.pairing_floor)
                total_got = sum(scores[(c, u)].total for u, c in sorted(got.items()))
                total_exp = sum(scores[(c, u)].total for u, c in sorted(expected.items()))
                checked += 1
                if total_got != pytest.approx(total_exp, abs=0.0):
                    mismatches += 1
    passed = mismatches == 0
    report("hierarchy-oracle", passed, f"{checked} fixtures, {mismatches} mismatches (0 tolerance)")
    assert mismatches == 0


def test_evaluation_protocol_fixture():
    """Two identical GT drawers vs one covering prediction: recall exactly 0.5."""
    gt = gt_scene(
        [gt_node("g0", NodeKind.CARRIER, "drawer", (0.0, 0, 0), 0.3),
         gt_node("g1", NodeKind.CARRIER, "drawer", (0.4, 0, 0), 0.3)],
        [],
    )
    graph = graph_of([pred_node("p0", NodeKind.CARRIER, "drawer", (0.2, 0, 0), 0.9)])
    rep = evaluate(gt, graph)
    recall = rep.node_recall["overall"]
    passed = recall == 0.5
    report("evaluation-protocol-fixture", passed, f"recall {recall} (expected exactly 0.5)")
    assert recall == 0.5


def test_determinism(tmp_path):
    """Two CLI runs on identical inputs produce byte-identical outputs."""
    base = ["synth", "--recipe", "kitchen-small", "--seed", "3", "--frames", "30",
            "--dropout", "0.3", "--centroid-sigma", "0.03", "--score-flip", "0.2",
            "--out-dir", str(tmp_path)]
    subprocess.run([sys.executable, "-m", "funscene.cli", *base], check=True,
                   capture_output=True, cwd=str(tmp_path))
    blobs = []
    for tag in ("a", "b"):
        graph = tmp_path / f"graph_{tag}.json"
        evalp = tmp_path / f"eval_{tag}.json"
        subprocess.run(
            [sys.executable, "-m", "funscene.cli", "run", "kitchen-small.packets.jsonl",
             "--out", str(graph)],
            check=True, capture_output=True, cwd=str(tmp_path),
        )
        subprocess.run(
            [sys.executable, "-m", "funscene.cli", "eval", str(graph),
             "kitchen-small.gt.json", "--out", str(evalp)],
            check=True, capture_output=True, cwd=str(tmp_path),
        )
        blobs.append((graph.read_bytes(), evalp.read_bytes()))
    passed = blobs[0] == blobs[1]
    report("determinism", passed,
           f"graph bytes {'equal' if blobs[0][0] == blobs[1][0] else 'DIFFER'}, "
           f"eval bytes {'equal' if blobs[0][1] == blobs[1][1] else 'DIFFER'}")
    assert blobs[0] == blobs[1]


def test_downsampling_robustness(kitchen_scene, noisy_runs):
    """Stride 3 equals stride 1 noiseless; within 0.05 triplet recall noisy."""
    packets = synth.render_stream(kitchen_scene, synth.NoiseProfile(), 90)
    g1, _ = run_pipeline(packets, EngineConfig(stride=1))
    g3, _ = run_pipeline(packets, EngineConfig(stride=3))
    identical = graphs_equivalent(g1, g3)

    trip1 = float(np.mean([r.triplet_recall["overall"] for r in noisy_runs["full"]]))
    trip3 = float(np.mean([r.triplet_recall["overall"] for r in noisy_runs["stride3"]]))
    gap = abs(trip1 - trip3)
    passed = identical and gap <= 0.05
    report("downsampling-robustness", passed,
           f"noiseless stride-3 graph {'identical' if identical else 'DIFFERS'}, "
           f"noisy triplet gap {gap:.3f} <= 0.05")
    assert identical
    assert gap <= 0.05
