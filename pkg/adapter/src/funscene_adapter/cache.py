"""Content-addressed response cache for model calls."""

from __future__ import annotations

import hashlib
import json
import os


class CacheMissError(KeyError):
    """Raised in replay mode when a response was never recorded."""


class ResponseCache:
    """One JSON file per (model, request) pair under a cache directory.

    Keys are sha256 digests of the model name plus the canonical request
    JSON; values are arbitrary JSON documents.
    """

    def __init__(self, directory: str):
        self.directory = directory

    @staticmethod
    def key_for(model: str, request) -> str:
        payload = json.dumps({"model": model, "request": request},
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> str:
        return os.path.join(self.directory, f"{key}.json")

    def get(self, model: str, request):
        key = self.key_for(model, request)
        path = self._path(key)
        if not os.path.exists(path):
            raise CacheMissError(f"no recorded response for {model} request {key[:12]}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, model: str, request, response) -> None:
        os.makedirs(self.directory, exist_ok=True)
        with open(self._path(self.key_for(model, request)), "w", encoding="utf-8") as fh:
            json.dump(response, fh, sort_keys=True, separators=(",", ":"))

    def fetch(self, model: str, request, backend=None):
        """Replay from the cache, falling back to (and recording) a backend."""
        try:
            return self.get(model, request)
        except CacheMissError:
            if backend is None:
                raise
            response = backend(model, request)
            self.put(model, request, response)
            return response
