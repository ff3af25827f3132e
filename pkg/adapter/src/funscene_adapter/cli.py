"""Adapter CLI: build packet streams from an RGB-D sequence directory."""

from __future__ import annotations

import argparse
import logging
import sys

from funscene_adapter.build import build_packets, write_packets
from funscene_adapter.cache import CacheMissError
from funscene_adapter.clients import AdapterConfig
from funscene_adapter.rgbd import read_sequence


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="funscene-adapter",
        description="Produce a .packets.jsonl stream from a posed RGB-D sequence.",
    )
    parser.add_argument("sequence", help="sequence directory (color/depth/pose per frame)")
    parser.add_argument("--cache", required=True, help="response cache directory")
    parser.add_argument("--out", required=True, help="output .packets.jsonl path")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    try:
        seq = read_sequence(args.sequence)
        config = AdapterConfig(cache_dir=args.cache)
        packets = build_packets(seq, config)  # replay only: no backend
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CacheMissError as exc:
        print(f"error: cache miss in replay mode: {exc}", file=sys.stderr)
        return 3
    write_packets(args.out, packets)
    print(f"wrote {args.out} ({len(packets)} packets)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
