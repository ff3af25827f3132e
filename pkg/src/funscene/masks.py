"""Run-length encoded binary masks over an image grid.

Masks are stored row-major as alternating run lengths, starting with the
number of leading zero pixels.  Rectangular masks (the common case for
box-shaped segments) get an exact fast path so containment checks do not
need to materialise the raster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RleMask:
    """Binary raster over ``height`` x ``width``, run-length encoded."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask grid must be positive, got {self.width}x{self.height}")
        total = sum(self.counts)
        if total != self.width * self.height:
            raise ValueError(
                f"run lengths cover {total} pixels, grid has {self.width * self.height}"
            )
        if any(c < 0 for c in self.counts):
            raise ValueError("run lengths must be non-negative")

    @property
    def area(self) -> int:
        return sum(self.counts[1::2])

    def is_empty(self) -> bool:
        return self.area == 0

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RleMask":
        arr = np.asarray(arr, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("mask array must be 2-D")
        flat = arr.ravel()
        if flat.size == 0:
            raise ValueError("mask array must be non-empty")
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        boundaries = np.concatenate(([0], changes, [flat.size]))
        runs = np.diff(boundaries).tolist()
        if flat[0]:
            runs = [0] + runs
        return cls(width=arr.shape[1], height=arr.shape[0], counts=tuple(int(r) for r in runs))

    @classmethod
    def from_rect(cls, x0: int, y0: int, x1: int, y1: int, width: int, height: int) -> "RleMask":
        """Filled rectangle with half-open pixel bounds, clipped to the grid."""
        x0, y0 = max(0, int(x0)), max(0, int(y0))
        x1, y1 = min(width, int(x1)), min(height, int(y1))
        if x1 <= x0 or y1 <= y0:
            return cls(width=width, height=height, counts=(width * height,))
        w = x1 - x0
        counts = [y0 * width + x0]
        for _ in range(y1 - y0 - 1):
            counts.extend((w, width - w))
        counts.append(w)
        counts.append((width - x1) + (height - y1) * width)
        return cls(width=width, height=height, counts=tuple(counts))

    def to_array(self) -> np.ndarray:
        values = np.zeros(len(self.counts), dtype=bool)
        values[1::2] = True
        flat = np.repeat(values, np.asarray(self.counts, dtype=np.int64))
        return flat.reshape(self.height, self.width)

    def bbox(self) -> tuple[int, int, int, int] | None:
        """Half-open pixel bounds (x0, y0, x1, y1) of the set pixels, or None."""
        if self.is_empty():
            return None
        pos = 0
        y_min, y_max = self.height, -1
        x_min, x_max = self.width, -1
        for i, run in enumerate(self.counts):
            if i % 2 == 1 and run > 0:
                first, last = pos, pos + run - 1
                y_min = min(y_min, first // self.width)
                y_max = max(y_max, last // self.width)
                if last - first >= self.width - 1:
                    x_min, x_max = 0, self.width - 1
                else:
                    c0, c1 = first % self.width, last % self.width
                    if c0 <= c1:
                        x_min, x_max = min(x_min, c0), max(x_max, c1)
                    else:  # run wraps a row boundary
                        x_min, x_max = 0, self.width - 1
            pos += run
        return (x_min, y_min, x_max + 1, y_max + 1)

    def as_rect(self) -> tuple[int, int, int, int] | None:
        """Bounds if the mask is exactly a filled rectangle, else None."""
        box = self.bbox()
        if box is None:
            return None
        x0, y0, x1, y1 = box
        if self.area == (x1 - x0) * (y1 - y0):
            return box
        return None

    def to_jsonable(self) -> dict:
        return {"width": self.width, "height": self.height, "counts": list(self.counts)}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "RleMask":
        return cls(
            width=int(obj["width"]),
            height=int(obj["height"]),
            counts=tuple(int(c) for c in obj["counts"]),
        )
