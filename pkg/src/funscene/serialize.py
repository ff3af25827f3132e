"""Canonical JSON serialization for packets, graphs and reports.

Packet streams are JSONL (one packet per line, ``.packets.jsonl``); scene
graphs are single documents with ``nodes``, ``edges`` and ``provenance``
arrays (``.graph.json``).  Dumps are canonical (sorted keys, fixed
separators) so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Iterator

from funscene.model import FramePacket, PacketError, SceneGraph


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def packet_to_line(packet: FramePacket) -> str:
    return dumps_canonical(packet.to_jsonable())


def packet_from_line(line: str, record: int = 0, validate: bool = True) -> FramePacket:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PacketError(f"record {record}: not valid JSON ({exc})") from exc
    try:
        packet = FramePacket.from_jsonable(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise PacketError(f"record {record}: {exc}") from exc
    if validate:
        try:
            packet.validate()
        except PacketError as exc:
            raise PacketError(f"record {record}: {exc}") from exc
    return packet


def write_packets(path: str, packets: Iterable[FramePacket]) -> None:
    atomic_write_text(path, "".join(packet_to_line(p) + "\n" for p in packets))


def read_packets(path: str, validate: bool = True) -> Iterator[FramePacket]:
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if line.strip():
                yield packet_from_line(line, record=i, validate=validate)


def graph_to_json(graph: SceneGraph) -> str:
    return dumps_canonical(graph.to_jsonable())


def graph_from_json(text: str) -> SceneGraph:
    try:
        return SceneGraph.from_jsonable(json.loads(text))
    except (KeyError, TypeError, ValueError) as exc:
        raise PacketError(f"scene graph document: {exc}") from exc


def write_graph(path: str, graph: SceneGraph) -> None:
    atomic_write_text(path, graph_to_json(graph) + "\n")


def read_graph(path: str) -> SceneGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_json(fh.read())


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
