"""Packet producer for the scene-graph fusion engine.

Turns posed RGB-D sequences into `.packets.jsonl` streams.  Every model
call (interactability table, detector, segmenter, edge scorer) goes through
a response cache keyed by request content, so recorded fixtures replay
byte-identically with no model access.
"""

from funscene_adapter.cache import CacheMissError, ResponseCache

__version__ = "0.1.0"

__all__ = ["CacheMissError", "ResponseCache"]
