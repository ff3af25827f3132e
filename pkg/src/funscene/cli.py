"""Command-line entry point: synth, run, eval and export-dot subcommands.

Exit codes: 0 success, 2 usage, 3 input error, 4 internal invariant
violation.  All output files are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from funscene import engine as engine_mod
from funscene import evaluation, serialize, synth
from funscene.config import ConfigError, EngineConfig, apply_overrides, load_config
from funscene.model import FrameOrderError, GraphInvariantError, PacketError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funscene",
        description="Fuse per-frame detection packets into hierarchical functional scene graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a ground-truth scene and packet stream")
    p_synth.add_argument("--recipe", required=True, choices=sorted(synth.RECIPES))
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--frames", type=int, default=90)
    p_synth.add_argument("--out-dir", default=".")
    p_synth.add_argument("--prefix", default=None, help="output name (defaults to the recipe)")
    p_synth.add_argument("--dropout", type=float, default=0.0)
    p_synth.add_argument("--centroid-sigma", type=float, default=0.0)
    p_synth.add_argument("--bbox-jitter", type=float, default=0.0)
    p_synth.add_argument("--score-flip", type=float, default=0.0)
    p_synth.add_argument("--score-sigma", type=float, default=0.0)

    p_run = sub.add_parser("run", help="run the fusion pipeline over a packet stream")
    p_run.add_argument("packets", help="input .packets.jsonl file")
    p_run.add_argument("--config", default=None, help="key = value config file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
    p_run.add_argument("--out", default=None, help="output .graph.json (default: stem + .graph.json)")
    p_run.add_argument("--events", default=None, help="output events.jsonl path")

    p_eval = sub.add_parser("eval", help="evaluate a graph against ground truth")
    p_eval.add_argument("graph", help=".graph.json produced by run")
    p_eval.add_argument("gt", help=".gt.json produced by synth")
    p_eval.add_argument("--out", default="eval.json")
    p_eval.add_argument("--csv", default=None, help="also write a table-structured CSV")
    p_eval.add_argument("--criterion", choices=("similarity", "rank"), default="similarity")

    p_dot = sub.add_parser("export-dot", help="emit a DOT description of the graph")
    p_dot.add_argument("graph")
    p_dot.add_argument("--out", default=None, help="output path (default: stdout)")
    return parser


def cmd_synth(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    scene = synth.generate_scene(args.recipe, args.seed)
    profile = synth.NoiseProfile(
        dropout_p=args.dropout,
        centroid_sigma=args.centroid_sigma,
        bbox_jitter=args.bbox_jitter,
        score_flip_p=args.score_flip,
        score_sigma=args.score_sigma,
        seed=args.seed,
    )
    packets = synth.render_stream(scene, profile, args.frames)
    prefix = args.prefix or args.recipe
    gt_path = f"{args.out_dir}/{prefix}.gt.json"
    packet_path = f"{args.out_dir}/{prefix}.packets.jsonl"
    synth.write_scene(gt_path, scene)
    serialize.write_packets(packet_path, packets)
    print(f"wrote {gt_path} and {packet_path} ({args.frames} frames)")
    return EXIT_OK


def cmd_run(args) -> int:
    config = EngineConfig()
    if args.config:
        config = load_config(args.config)
    config = apply_overrides(config, args.overrides)
    packets = serialize.read_packets(args.packets)
    graph, events = engine_mod.run_pipeline(packets, config)
    out = args.out or _replace_suffix(args.packets, ".packets.jsonl", ".graph.json")
    serialize.write_graph(out, graph)
    if args.events:
        serialize.atomic_write_text(
            args.events,
            "".join(serialize.dumps_canonical(e) + "\n" for e in events),
        )
    print(f"wrote {out} ({len(graph.nodes)} nodes, {len(graph.edges)} edges)")
    return EXIT_OK


def cmd_eval(args) -> int:
    graph = serialize.read_graph(args.graph)
    gt = synth.read_scene(args.gt)
    params = evaluation.EvalParams(criterion=args.criterion)
    report = evaluation.evaluate(gt, graph, params)
    evaluation.write_report(args.out, report)
    if args.csv:
        serialize.atomic_write_text(args.csv, evaluation.report_to_csv(report))
    overall = report.node_recall.get("overall", 0.0)
    trip = report.triplet_recall.get("overall", 0.0)
    print(f"wrote {args.out} (node recall {overall:.3f}, triplet recall {trip:.3f})")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    graph = serialize.read_graph(args.graph)
    lines = ["digraph scene {"]
    for node in graph.nodes.values():
        label = f"{node.category}\\n{node.id}"
        lines.append(f'  "{node.id}" [label="{label}" shape=box];')
    for e in graph.edges:
        lines.append(f'  "{e.parent}" -> "{e.child}" [label="{e.relation}"];')
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if args.out:
        serialize.atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _replace_suffix(path: str, suffix: str, replacement: str) -> str:
    if path.endswith(suffix):
        return path[: -len(suffix)] + replacement
    return path + replacement


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "run": cmd_run,
        "eval": cmd_eval,
        "export-dot": cmd_export_dot,
    }
    try:
        return handlers[args.command](args)
    except (PacketError, FrameOrderError, ConfigError, synth.RecipeError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GraphInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
