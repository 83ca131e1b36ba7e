"""Clique sampling for randomized elimination.

Eliminating vertex ``k`` of a Laplacian replaces its star with the weighted
clique on its neighbors. :func:`sample_clique` keeps ``n - 1`` reweighted
edges of that clique that form a spanning tree and match the clique in
expectation; :func:`exact_clique` returns all of it.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import MatrixFormatError
from .sparse import SparseSym

RngStream = np.random.Generator

DEG_RTOL = 1e-12


def make_rng(seed: int, *stream: int) -> RngStream:
    """Deterministic stream for ``(seed, *stream)``.

    Distinct ``stream`` tuples give statistically independent generators, so
    parallel tasks can each own one without coordination.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


@dataclass(frozen=True, eq=False)
class Star:
    """Vertex ``k`` with its neighbors, edge weights and degree."""

    k: int
    ids: np.ndarray
    weights: np.ndarray
    deg: float

    def __post_init__(self) -> None:
        if self.ids.shape != self.weights.shape:
            raise MatrixFormatError("ids and weights differ in length", context="Star")
        if np.any(~(self.weights > 0.0)):
            raise MatrixFormatError("star weights must be positive", context="Star")
        if np.unique(self.ids).size != self.ids.size or np.any(self.ids == self.k):
            raise MatrixFormatError(
                "neighbor ids must be distinct and differ from k", context="Star"
            )
        total = float(self.weights.sum())
        if abs(self.deg - total) > DEG_RTOL * max(abs(total), abs(self.deg)):
            raise MatrixFormatError(
                f"degree {self.deg!r} does not match weight sum {total!r}",
                context="Star",
            )

    @classmethod
    def of(cls, k: int, neighbors: dict[int, float] | list[tuple[int, float]]) -> "Star":
        """Build from a neighbor->weight mapping, degree taken as the weight sum."""
        items = list(neighbors.items()) if isinstance(neighbors, dict) else list(neighbors)
        ids = np.array([i for i, _ in items], dtype=np.int64)
        w = np.array([x for _, x in items], dtype=np.float64)
        return cls(k, ids, w, float(w.sum()))

    @property
    def size(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True, eq=False)
class EdgeList:
    """Weighted undirected edges ``(i[e], j[e], w[e])``.

    Semantically the graph Laplacian ``sum w_e b_e b_e^T``.
    """

    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    @classmethod
    def empty(cls) -> "EdgeList":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), np.zeros(0, dtype=np.float64))

    @classmethod
    def concat(cls, parts: list["EdgeList"]) -> "EdgeList":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.i for p in parts]),
            np.concatenate([p.j for p in parts]),
            np.concatenate([p.w for p in parts]),
        )

    def __len__(self) -> int:
        return int(self.w.size)

    def merged(self) -> "EdgeList":
        """Sum duplicate unordered pairs; output sorted by (min, max) endpoint."""
        if not len(self):
            return EdgeList.empty()
        lo = np.minimum(self.i, self.j)
        hi = np.maximum(self.i, self.j)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], self.w[order]
        start = np.flatnonzero(np.r_[True, (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])])
        return EdgeList(lo[start], hi[start], np.add.reduceat(w, start))

    def laplacian(self, n: int) -> SparseSym:
        """Graph Laplacian on ``n`` vertices."""
        adj = sp.csr_array((self.w, (self.i, self.j)), shape=(n, n))
        adj = adj + adj.T
        lap = sp.diags_array(np.asarray(adj.sum(axis=1)).ravel()) - adj
        return SparseSym.from_scipy(lap, check=False)

    def dense_laplacian(self, n: int) -> np.ndarray:
        """Dense Laplacian; duplicates are accumulated."""
        out = np.zeros((n, n))
        np.add.at(out, (self.i, self.j), -self.w)
        np.add.at(out, (self.j, self.i), -self.w)
        np.add.at(out, (self.i, self.i), self.w)
        np.add.at(out, (self.j, self.j), self.w)
        return out


def _sample(
    ids: np.ndarray, w: np.ndarray, deg: float, rng: RngStream
) -> EdgeList:
    n = ids.size
    if n < 2:
        return EdgeList.empty()
    # ascending weight, ties by vertex id
    order = np.lexsort((ids, w))
    ids, w = ids[order], w[order]
    cum = np.cumsum(w)
    # remaining mass after removing each of the first n-1 neighbors
    suffix = np.cumsum(w[::-1])[::-1][1:]
    u = rng.random(n - 1)
    pick = np.searchsorted(cum, cum[:-1] + u * suffix, side="right")
    pick = np.clip(pick, np.arange(1, n), n - 1)
    return EdgeList(ids[:-1].copy(), ids[pick], suffix * w[:-1] / deg)


def sample_clique(star: Star, rng: RngStream) -> EdgeList:
    """Sample a reweighted spanning tree of the clique on ``star``'s neighbors.

    Neighbors are visited in ascending weight order. Each visited neighbor
    ``i`` is joined to one heavier remaining neighbor ``j``, picked with
    probability proportional to ``w_j``, with weight ``S * w_i / deg`` where
    ``S`` is the weight still remaining after ``i`` is removed.

    Args:
        star: The star being eliminated.
        rng: Random stream; exactly ``max(n - 1, 0)`` uniforms are drawn.

    Returns:
        ``max(n - 1, 0)`` edges, no unordered pair repeated.
    """
    return _sample(star.ids, star.weights, star.deg, rng)


def exact_clique(star: Star) -> EdgeList:
    """All clique edges, weight ``w_i * w_j / deg``."""
    n = star.size
    if n < 2:
        return EdgeList.empty()
    a, b = np.triu_indices(n, k=1)
    return EdgeList(
        star.ids[a].copy(),
        star.ids[b].copy(),
        star.weights[a] * star.weights[b] / star.deg,
    )
