"""Finite-box geometry: vertices, interior/boundary split, rectangles, adjacency.

The box of side ``n`` has vertices on the integer grid ``[0, n-1]^2``.  The
frame (outermost ring) is the boundary; everything else is interior.  Primal
adjacency is 4-neighbor, dual adjacency is 8-neighbor; both are clipped to
the box.  All objects here are immutable after construction and safe to
share between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HORIZONTAL",
    "VERTICAL",
    "BoxLattice",
    "Rect",
    "build_box",
    "primal_neighbors",
    "dual_neighbors",
    "crossing_geometry",
]

HORIZONTAL = "horizontal"
VERTICAL = "vertical"

_PRIMAL_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_DUAL_STEPS = _PRIMAL_STEPS + ((1, 1), (1, -1), (-1, 1), (-1, -1))

Vertex = tuple[int, int]


class BoxLattice:
    """Square box of side ``n`` with interior/boundary classification."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"box side must be >= 1, got {n}")
        self.n = int(n)
        self.vertices = tuple((x, y) for x in range(n) for y in range(n))
        if n <= 2:
            self.interior: tuple[Vertex, ...] = ()
        else:
            self.interior = tuple(
                (x, y) for x in range(1, n - 1) for y in range(1, n - 1)
            )
        interior_set = set(self.interior)
        self.boundary = tuple(v for v in self.vertices if v not in interior_set)
        c = (n - 1) // 2
        self.origin: Vertex = (c, c)
        self.interior_index = {v: i for i, v in enumerate(self.interior)}
        self._interior_set = interior_set

    def __repr__(self):
        return f"BoxLattice(n={self.n})"

    def contains(self, v: Vertex) -> bool:
        x, y = v
        return 0 <= x < self.n and 0 <= y < self.n

    def is_interior(self, v: Vertex) -> bool:
        return v in self._interior_set

    def require_vertex(self, v: Vertex) -> None:
        if not self.contains(v):
            raise ValueError(f"vertex {v} outside box of side {self.n}")

    def ring(self, radius: int) -> tuple[Vertex, ...]:
        """Vertices at Chebyshev distance exactly `radius` from the origin."""
        ox, oy = self.origin
        return tuple(
            v
            for v in self.vertices
            if max(abs(v[0] - ox), abs(v[1] - oy)) == radius
        )


def build_box(n: int) -> BoxLattice:
    """Box of side `n` (vertices per side); rejects n < 1."""
    return BoxLattice(n)


def primal_neighbors(box: BoxLattice, v: Vertex) -> list[Vertex]:
    """4-adjacent neighbors of `v`, clipped to the box."""
    box.require_vertex(v)
    x, y = v
    return [(x + dx, y + dy) for dx, dy in _PRIMAL_STEPS if box.contains((x + dx, y + dy))]


def dual_neighbors(box: BoxLattice, v: Vertex) -> list[Vertex]:
    """8-adjacent neighbors of `v`, clipped to the box."""
    box.require_vertex(v)
    x, y = v
    return [(x + dx, y + dy) for dx, dy in _DUAL_STEPS if box.contains((x + dx, y + dy))]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle with inclusive integer corners.

    A rect with zero extent in either axis (``x0 == x1`` or ``y0 == y1``)
    has zero geometric area and is treated as degenerate by the crossing
    queries.
    """

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"bad rectangle corners {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def is_degenerate(self) -> bool:
        return self.x0 == self.x1 or self.y0 == self.y1

    def vertices(self):
        for x in range(self.x0, self.x1 + 1):
            for y in range(self.y0, self.y1 + 1):
                yield (x, y)

    def require_inside(self, box: BoxLattice) -> None:
        if self.x0 < 0 or self.y0 < 0 or self.x1 >= box.n or self.y1 >= box.n:
            raise ValueError(f"{self} leaves box of side {box.n}")

    def label(self) -> str:
        return f"{self.x0},{self.x1},{self.y0},{self.y1}"


def crossing_geometry(w: int) -> tuple[BoxLattice, Rect]:
    """2:1 crossing rectangle of `w` rows by `2w` columns of interior vertices.

    The rect is translated one step off the frame so that the zero-valued
    boundary cannot carry a crossing path.  Long side horizontal: crossing
    it ("hard" direction) spans 2w columns, crossing the short side ("easy",
    vertical) spans w rows.
    """
    if w < 1:
        raise ValueError("crossing scale must be >= 1")
    box = build_box(2 * w + 2)
    rect = Rect(1, 2 * w, 1, w)
    return box, rect


def chebyshev(u: Vertex, v: Vertex) -> int:
    return max(abs(u[0] - v[0]), abs(u[1] - v[1]))
