"""Thresholded fields and their connectivity/crossing/cluster/dual queries.

A LevelSet is the boolean configuration ``open(v) <=> phi_v >= h`` over all
box vertices, with the zero-boundary convention (frame and killed vertices
carry phi = 0, so they are open exactly when h <= 0).  Open-set queries use
4-adjacency; the dual ("star") queries use 8-adjacency on the closed set.

Connectivity is union-find backed: a numba kernel labels components once
per grid and queries read the labels.  Crossing queries relabel inside the
rectangle because crossing paths must not leave it.  Disjoint-crossing
counts come from a unit-vertex-capacity max flow (Menger's count).
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .field import FieldSample
from .lattice import HORIZONTAL, VERTICAL, BoxLattice, Rect, Vertex, chebyshev

__all__ = [
    "GeometryWarning",
    "LevelSet",
    "ClusterReport",
    "threshold",
    "connected",
    "crossing",
    "dual_crossing",
    "cluster_of",
    "dual_connected",
    "count_disjoint_crossings",
    "levelset_to_text",
    "levelset_from_text",
]


class GeometryWarning(UserWarning):
    """Raised-as-warning flag for degenerate query geometry."""


@njit(cache=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


@njit(cache=True)
def _uf_union(parent, rank, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra == rb:
        return
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1


@njit(cache=True)
def _label_cells(open_flat, nx, ny, diagonal):
    """Union-find component labels of True cells; -1 on False cells.

    Flat index convention: cell (x, y) sits at x * ny + y.
    """
    n = open_flat.size
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int32)
    for x in range(nx):
        base = x * ny
        for y in range(ny):
            i = base + y
            if not open_flat[i]:
                continue
            if y + 1 < ny and open_flat[i + 1]:
                _uf_union(parent, rank, i, i + 1)
            if x + 1 < nx and open_flat[i + ny]:
                _uf_union(parent, rank, i, i + ny)
            if diagonal:
                if x + 1 < nx and y + 1 < ny and open_flat[i + ny + 1]:
                    _uf_union(parent, rank, i, i + ny + 1)
                if x + 1 < nx and y - 1 >= 0 and open_flat[i + ny - 1]:
                    _uf_union(parent, rank, i, i + ny - 1)
    labels = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if open_flat[i]:
            labels[i] = _uf_find(parent, i)
    return labels


def _grid_labels(grid: np.ndarray, diagonal: bool) -> np.ndarray:
    nx, ny = grid.shape
    flat = np.ascontiguousarray(grid).ravel()
    return _label_cells(flat, nx, ny, diagonal).reshape(nx, ny)


class LevelSet:
    """Boolean configuration over the box at height ``h``."""

    def __init__(self, box: BoxLattice, h: float, open_grid: np.ndarray):
        if open_grid.shape != (box.n, box.n):
            raise ValueError("open grid shape does not match box")
        self.box = box
        self.h = float(h)
        self.open = np.ascontiguousarray(open_grid, dtype=bool)
        self.open.setflags(write=False)
        self._primal_labels: np.ndarray | None = None
        self._dual_labels: np.ndarray | None = None

    def is_open(self, v: Vertex) -> bool:
        self.box.require_vertex(v)
        return bool(self.open[v])

    def primal_labels(self) -> np.ndarray:
        if self._primal_labels is None:
            self._primal_labels = _grid_labels(self.open, diagonal=False)
        return self._primal_labels

    def dual_labels(self) -> np.ndarray:
        if self._dual_labels is None:
            self._dual_labels = _grid_labels(~self.open, diagonal=True)
        return self._dual_labels


@dataclass(frozen=True)
class ClusterReport:
    """Maximal open 4-connected component of a seed vertex."""

    seed: Vertex
    vertices: tuple[Vertex, ...]
    size: int
    radius: int  # max Chebyshev distance from the seed; 0 for empty/singleton


def threshold(field: FieldSample, h: float) -> LevelSet:
    """Level set {phi >= h}; vertices outside the field sample carry phi = 0."""
    box = field.box
    phi = np.zeros((box.n, box.n))
    if field.vertices:
        coords = np.asarray(field.vertices)
        phi[coords[:, 0], coords[:, 1]] = field.values
    return LevelSet(box, h, phi >= h)


def connected(ls: LevelSet, x: Vertex, y: Vertex) -> bool:
    """True iff an open 4-connected path joins x and y."""
    ls.box.require_vertex(x)
    ls.box.require_vertex(y)
    labels = ls.primal_labels()
    lx = labels[x]
    return lx >= 0 and lx == labels[y]


def _check_rect(ls: LevelSet, rect: Rect, direction: str) -> bool:
    """Shared validation; returns True when the rect is degenerate (flagged)."""
    rect.require_inside(ls.box)
    if direction not in (HORIZONTAL, VERTICAL):
        raise ValueError(f"unknown direction {direction!r}")
    if rect.is_degenerate():
        warnings.warn(f"degenerate rectangle {rect}", GeometryWarning, stacklevel=3)
        return True
    return False


def _side_labels(labels: np.ndarray, direction: str) -> tuple[np.ndarray, np.ndarray]:
    if direction == VERTICAL:
        return labels[:, 0], labels[:, -1]
    return labels[0, :], labels[-1, :]


def _rect_crossing(grid: np.ndarray, rect: Rect, direction: str, diagonal: bool) -> bool:
    sub = grid[rect.x0:rect.x1 + 1, rect.y0:rect.y1 + 1]
    labels = _grid_labels(sub, diagonal)
    a, b = _side_labels(labels, direction)
    a = a[a >= 0]
    if a.size == 0:
        return False
    b = b[b >= 0]
    if b.size == 0:
        return False
    return bool(np.intersect1d(a, b).size)


def crossing(ls: LevelSet, rect: Rect, direction: str) -> bool:
    """Open 4-connected crossing of `rect` between the sides named by `direction`.

    The path must stay inside the rectangle.
    """
    if _check_rect(ls, rect, direction):
        return False
    return _rect_crossing(ls.open, rect, direction, diagonal=False)


def dual_crossing(ls: LevelSet, rect: Rect, direction: str) -> bool:
    """Closed 8-connected ("star") crossing of `rect`; the planar dual query."""
    if _check_rect(ls, rect, direction):
        return False
    return _rect_crossing(~ls.open, rect, direction, diagonal=True)


def cluster_of(ls: LevelSet, x: Vertex) -> ClusterReport:
    """Maximal open 4-connected component containing x (empty if x closed)."""
    ls.box.require_vertex(x)
    if not ls.open[x]:
        return ClusterReport(x, (), 0, 0)
    labels = ls.primal_labels()
    xs, ys = np.nonzero(labels == labels[x])
    radius = int(np.max(np.maximum(np.abs(xs - x[0]), np.abs(ys - x[1]))))
    vertices = tuple(zip(xs.tolist(), ys.tolist()))
    return ClusterReport(x, vertices, len(vertices), radius)


def cluster_radius(ls: LevelSet, x: Vertex) -> int:
    """Max Chebyshev reach of the open cluster of x; -1 if x is closed."""
    ls.box.require_vertex(x)
    if not ls.open[x]:
        return -1
    labels = ls.primal_labels()
    xs, ys = np.nonzero(labels == labels[x])
    return int(np.max(np.maximum(np.abs(xs - x[0]), np.abs(ys - x[1]))))


def dual_connected(ls: LevelSet, u: Vertex, v: Vertex) -> bool:
    """True iff an 8-connected path of closed vertices joins u and v."""
    ls.box.require_vertex(u)
    ls.box.require_vertex(v)
    labels = ls.dual_labels()
    lu = labels[u]
    return lu >= 0 and lu == labels[v]


def count_disjoint_crossings(ls: LevelSet, rect: Rect, direction: str) -> int:
    """Maximum number of vertex-disjoint open crossing paths of `rect`.

    Unit vertex capacities, so by Menger's theorem the max flow equals the
    disjoint-path count.
    """
    if _check_rect(ls, rect, direction):
        return 0
    sub = ls.open[rect.x0:rect.x1 + 1, rect.y0:rect.y1 + 1]
    return _max_disjoint_paths(sub, direction)


def _max_disjoint_paths(sub: np.ndarray, direction: str) -> int:
    w, hgt = sub.shape
    cells = [(x, y) for x in range(w) for y in range(hgt) if sub[x, y]]
    if not cells:
        return 0
    idx = {c: i for i, c in enumerate(cells)}
    m = len(cells)
    # node split: in(i) = 2i, out(i) = 2i + 1; source and sink appended
    source, sink = 2 * m, 2 * m + 1
    graph: list[list[int]] = [[] for _ in range(2 * m + 2)]
    to: list[int] = []
    cap: list[int] = []

    def add_edge(a: int, b: int, c: int) -> None:
        graph[a].append(len(to)); to.append(b); cap.append(c)
        graph[b].append(len(to)); to.append(a); cap.append(0)

    for (x, y), i in idx.items():
        add_edge(2 * i, 2 * i + 1, 1)
        for nx_, ny_ in ((x + 1, y), (x, y + 1)):
            j = idx.get((nx_, ny_))
            if j is not None:
                add_edge(2 * i + 1, 2 * j, 1)
                add_edge(2 * j + 1, 2 * i, 1)
    if direction == VERTICAL:
        side_a = [idx[c] for c in cells if c[1] == 0]
        side_b = [idx[c] for c in cells if c[1] == hgt - 1]
    else:
        side_a = [idx[c] for c in cells if c[0] == 0]
        side_b = [idx[c] for c in cells if c[0] == w - 1]
    for i in side_a:
        add_edge(source, 2 * i, 1)
    for i in side_b:
        add_edge(2 * i + 1, sink, 1)

    # Edmonds-Karp; flow is bounded by the rect width so few augmentations
    flow = 0
    while True:
        prev_edge = [-1] * len(graph)
        prev_edge[source] = -2
        queue = deque([source])
        while queue:
            u = queue.popleft()
            if u == sink:
                break
            for e in graph[u]:
                v = to[e]
                if cap[e] > 0 and prev_edge[v] == -1:
                    prev_edge[v] = e
                    queue.append(v)
        if prev_edge[sink] == -1:
            return flow
        v = sink
        while v != source:
            e = prev_edge[v]
            cap[e] -= 1
            cap[e ^ 1] += 1
            v = to[e ^ 1]
        flow += 1


def levelset_to_text(ls: LevelSet) -> str:
    """Portable fixture format: one row per y (bottom row first), chars 0/1."""
    lines = []
    for y in range(ls.box.n):
        lines.append("".join("1" if ls.open[x, y] else "0" for x in range(ls.box.n)))
    return "\n".join(lines) + "\n"


def levelset_from_text(box: BoxLattice, text: str, h: float = 0.0) -> LevelSet:
    rows = [line for line in text.strip().splitlines()]
    if len(rows) != box.n or any(len(r) != box.n for r in rows):
        raise ValueError("text grid does not match box size")
    grid = np.zeros((box.n, box.n), dtype=bool)
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            grid[x, y] = ch == "1"
    return LevelSet(box, h, grid)
