"""Zero-boundary Gaussian free field on a box: covariance, factorization, sampling.

The covariance is the Green's function of the simple random walk killed on
the frame (and on any extra killed vertices): G = (I - P)^-1 with P the
walk's transition matrix restricted to the live interior.  Entries are
expected visit counts of the discrete-time walk, jump rate 1.  Samples are
exact: phi = L z with L the Cholesky factor of G and z i.i.d. standard
normal from an explicit stream key.

Boundary convention: the field is 0 on the frame and on killed vertices
("zero" / Dirichlet boundary).  Every consumer of a FieldSample inherits
that convention.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .lattice import BoxLattice, Vertex, primal_neighbors
from .rng import StreamKey, next_standard_normals, normal_matrix

__all__ = [
    "DEFAULT_MAX_INTERIOR",
    "GreenOperator",
    "FieldSample",
    "FactorizationError",
    "build_green",
    "sample",
    "sample_batch",
    "conditional_sample",
    "harmonic_extension",
    "green_to_csv",
]

# Dense factorization only; keeps the lab at desk scale (~ box side 66).
DEFAULT_MAX_INTERIOR = 4096

_FACTOR_TOL = 1e-10


class FactorizationError(RuntimeError):
    """The covariance failed its positive-definiteness check (construction bug)."""


@dataclass(frozen=True)
class FieldSample:
    """One field realization on a set of live vertices (0 elsewhere)."""

    box: BoxLattice
    vertices: tuple[Vertex, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.vertices) != self.values.shape[0]:
            raise ValueError("vertex/value length mismatch")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def value_at(self, v: Vertex) -> float:
        """Field value at any box vertex; 0 on boundary/killed vertices."""
        try:
            i = self.vertices.index(v)
        except ValueError:
            self.box.require_vertex(v)
            return 0.0
        return float(self.values[i])


class GreenOperator:
    """Killed-walk Green's function on the live interior plus its Cholesky factor."""

    def __init__(self, box: BoxLattice, vertices: tuple[Vertex, ...],
                 G: np.ndarray, L: np.ndarray):
        self.box = box
        self.vertices = vertices
        self.index = {v: i for i, v in enumerate(vertices)}
        self.G = G
        self.L = L

    @property
    def dim(self) -> int:
        return len(self.vertices)

    def variance(self, v: Vertex) -> float:
        return float(self.G[self.index[v], self.index[v]])


def _transition_matrix(box: BoxLattice, live: tuple[Vertex, ...]) -> np.ndarray:
    """SRW transition matrix restricted to `live`; mass exiting is killed."""
    index = {v: i for i, v in enumerate(live)}
    d = len(live)
    P = np.zeros((d, d))
    for v in live:
        i = index[v]
        for u in primal_neighbors(box, v):
            j = index.get(u)
            if j is not None:
                P[i, j] = 0.25
    return P


def build_green(box: BoxLattice, killed: frozenset[Vertex] | set[Vertex] = frozenset(),
                max_interior: int = DEFAULT_MAX_INTERIOR) -> GreenOperator:
    """Green operator of the walk killed on the frame and on `killed`.

    `killed` must be a subset of the interior; those vertices join the
    boundary (field pinned to 0 there).
    """
    killed = frozenset(killed)
    for v in killed:
        if not box.is_interior(v):
            raise ValueError(f"killed vertex {v} is not interior")
    live = tuple(v for v in box.interior if v not in killed)
    if not live:
        raise ValueError("box has no live interior vertices")
    if len(live) > max_interior:
        raise ValueError(
            f"live interior has {len(live)} vertices, above the cap {max_interior}"
        )
    P = _transition_matrix(box, live)
    A = np.eye(len(live)) - P
    G = np.linalg.solve(A, np.eye(len(live)))
    G = 0.5 * (G + G.T)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance not positive definite: {exc}") from exc
    err = np.max(np.abs(L @ L.T - G)) / np.max(np.abs(G))
    if err > _FACTOR_TOL:
        raise FactorizationError(f"factor residual {err:.3e} above {_FACTOR_TOL}")
    return GreenOperator(box, live, G, L)


def sample(green: GreenOperator, key: StreamKey) -> FieldSample:
    """One exact N(0, G) sample; phi = L z with z from `key`."""
    z = next_standard_normals(key, green.dim)
    return FieldSample(green.box, green.vertices, green.L @ z)


def sample_batch(green: GreenOperator, key: StreamKey, count: int,
                 start: int = 0) -> np.ndarray:
    """Rows i = 0..count-1 are the samples for substreams derive(key, start + i).

    Bit-identical to calling ``sample(green, derive(key, start + i))`` per
    row; the batched matrix product only groups the BLAS work.
    """
    Z = normal_matrix(key, count, green.dim, start=start)
    return Z @ green.L.T


def _harmonic_part(green: GreenOperator, k_idx: np.ndarray, rest_idx: np.ndarray,
                   phi_K: np.ndarray) -> np.ndarray:
    GKK = green.G[np.ix_(k_idx, k_idx)]
    GrK = green.G[np.ix_(rest_idx, k_idx)]
    return GrK @ np.linalg.solve(GKK, phi_K)


def harmonic_extension(green: GreenOperator, K, phi_K) -> FieldSample:
    """Deterministic part of the conditional law: the Gaussian conditional
    mean, which is harmonic off K with values phi_K on K and 0 on the
    boundary."""
    K = [tuple(v) for v in K]
    phi_K = np.asarray(phi_K, dtype=float)
    for v in K:
        if v not in green.index:
            raise ValueError(f"conditioning vertex {v} is not a live interior vertex")
    rest = tuple(v for v in green.vertices if v not in set(K))
    if not rest:
        return FieldSample(green.box, (), np.empty(0))
    if not K:
        return FieldSample(green.box, rest, np.zeros(len(rest)))
    k_idx = np.array([green.index[v] for v in K])
    rest_idx = np.array([green.index[v] for v in rest])
    return FieldSample(green.box, rest,
                       _harmonic_part(green, k_idx, rest_idx, phi_K))


def conditional_sample(green: GreenOperator, K, phi_K, key: StreamKey) -> FieldSample:
    """Sample the field on the live vertices outside `K`, given values on `K`.

    Law: conditional mean (the harmonic extension of `phi_K` with 0 on the
    boundary) plus an independent zero-boundary field whose covariance is
    the Schur complement of G on the complement of K.
    """
    K = list(K)
    phi_K = np.asarray(phi_K, dtype=float)
    if len(K) != phi_K.shape[0]:
        raise ValueError("K and phi_K length mismatch")
    if phi_K.size and not np.all(np.isfinite(phi_K)):
        raise ValueError("phi_K must be finite")
    for v in K:
        if v not in green.index:
            raise ValueError(f"conditioning vertex {v} is not a live interior vertex")
    k_set = set(K)
    if len(k_set) != len(K):
        raise ValueError("duplicate vertices in K")
    rest = tuple(v for v in green.vertices if v not in k_set)
    if not rest:
        return FieldSample(green.box, (), np.empty(0))
    if not K:
        return sample(green, key)
    k_idx = np.array([green.index[v] for v in K])
    rest_idx = np.array([green.index[v] for v in rest])
    mean = _harmonic_part(green, k_idx, rest_idx, phi_K)
    GKK = green.G[np.ix_(k_idx, k_idx)]
    GrK = green.G[np.ix_(rest_idx, k_idx)]
    Grr = green.G[np.ix_(rest_idx, rest_idx)]
    cov = Grr - GrK @ np.linalg.solve(GKK, GrK.T)
    cov = 0.5 * (cov + cov.T)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"conditional covariance not PD: {exc}") from exc
    z = next_standard_normals(key, len(rest))
    return FieldSample(green.box, rest, mean + L @ z)


def green_to_csv(green: GreenOperator, path: str) -> None:
    """Dump G as (row, col, value) triples for cross-checking."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        for i in range(green.dim):
            for j in range(green.dim):
                writer.writerow([i, j, repr(float(green.G[i, j]))])
    os.replace(tmp, path)
