"""Sequential randomized Cholesky factorization.

The Schur complement is held as a weighted graph (:class:`ElimGraph`).
Eliminating vertex ``k`` emits column ``k`` of ``G``, deletes ``k``'s star
and inserts a sampled spanning tree of the clique on its neighbors, so the
remaining matrix stays a Laplacian at every step.
"""

import logging
import math
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .classify import DEFAULT_TOL, classify, extend_sddm
from .exceptions import ClassificationError, DimensionMismatchError, FactorizationError
from .models import FactorMeta, MatrixKind, OrderingSpec
from .ordering import compute_ordering
from .sampling import EdgeList, RngStream, _sample, make_rng
from .sparse import LowerTri, Perm, SparseSym, permute_sym

logger = logging.getLogger(__name__)

DROP_RTOL = 1e-14
FINAL_PIVOT_RTOL = 1e-8


class ElimGraph:
    """Mutable weighted graph holding the evolving Schur complement.

    ``adj[v]`` maps each neighbor of ``v`` to the edge weight ``-l_uv > 0``;
    ``deg[v]`` caches the diagonal ``l_vv``. Vertices are arbitrary integer
    keys, so a parallel task can hold just the part of the graph it owns.
    """

    def __init__(self) -> None:
        self.adj: dict[int, dict[int, float]] = {}
        self.deg: dict[int, float] = {}
        self.alive: set[int] = set()
        self.num_edges = 0
        self.merged = 0
        self.dropped = 0

    @classmethod
    def from_laplacian(cls, lap: SparseSym) -> "ElimGraph":
        """Graph of a Laplacian's off-diagonal entries.

        Raises:
            ClassificationError: If a positive off-diagonal is present.
        """
        coo = lap.csc.tocoo()
        upper = coo.row < coo.col
        if np.any(coo.data[upper] > 0.0):
            raise ClassificationError(
                "positive off-diagonal in a Laplacian", context="ElimGraph"
            )
        g = cls()
        g.add_vertices(range(lap.n))
        g.add_edges(coo.row[upper], coo.col[upper], -coo.data[upper])
        return g

    def add_vertices(self, vertices: Iterable[int]) -> None:
        for v in vertices:
            v = int(v)
            if v not in self.adj:
                self.adj[v] = {}
                self.deg[v] = 0.0
                self.alive.add(v)

    def add_edges(self, i: np.ndarray, j: np.ndarray, w: np.ndarray) -> None:
        """Insert edges, summing into existing pairs."""
        adj, deg = self.adj, self.deg
        for a, b, x in zip(i.tolist(), j.tolist(), w.tolist(), strict=True):
            if a not in adj:
                self.add_vertices((a,))
            if b not in adj:
                self.add_vertices((b,))
            row = adj[a]
            deg[a] += x
            deg[b] += x
            old = row.get(b)
            if old is None:
                row[b] = x
                adj[b][a] = x
                self.num_edges += 1
                continue
            total = old + x
            self.merged += 1
            if total <= DROP_RTOL * max(deg[a], deg[b]):
                del row[b]
                del adj[b][a]
                deg[a] -= total
                deg[b] -= total
                self.num_edges -= 1
                self.dropped += 1
            else:
                row[b] = total
                adj[b][a] = total

    def insert(self, edges: EdgeList) -> None:
        self.add_edges(edges.i, edges.j, edges.w)

    def pop_star(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Remove vertex ``k`` and its incident edges.

        Returns:
            Neighbor ids (ascending) and the matching weights.
        """
        nbrs = self.adj.pop(k)
        self.deg.pop(k)
        self.alive.discard(k)
        ids = np.fromiter(nbrs.keys(), dtype=np.int64, count=len(nbrs))
        w = np.fromiter(nbrs.values(), dtype=np.float64, count=len(nbrs))
        order = np.argsort(ids)
        ids, w = ids[order], w[order]
        adj, deg = self.adj, self.deg
        for v, x in zip(ids.tolist(), w.tolist(), strict=True):
            del adj[v][k]
            deg[v] -= x
        self.num_edges -= ids.size
        return ids, w

    def check(self, rtol: float = 1e-10) -> None:
        """Assert symmetry and the degree cache; used by the invariant tests."""
        for v, row in self.adj.items():
            for u, x in row.items():
                assert self.adj[u][v] == x, f"asymmetric edge ({v}, {u})"
                assert x > 0.0, f"nonpositive weight on ({v}, {u})"
            total = math.fsum(row.values())
            assert abs(self.deg[v] - total) <= rtol * max(total, 1.0), (
                f"degree cache of {v} is {self.deg[v]!r}, edges sum to {total!r}"
            )


def schur_edge_count(g: ElimGraph) -> int:
    """Edge count in the sense of the elimination ledger.

    Each step removes a star of ``n`` edges and inserts ``n - 1`` sampled
    edges. A sampled edge that lands on an existing pair is merged into it;
    merged and dropped edges are counted here as retired, so the value
    drops by exactly one per elimination.
    """
    return g.num_edges + g.merged + g.dropped


@dataclass(frozen=True, eq=False)
class CholFactor:
    """Approximate Cholesky factor ``P^T A P ~ G G^T``.

    For a Laplacian build the last column of ``G`` is empty. For an SDDM build
    ``G`` is the leading block of the extended factor and ``ext_row`` holds the
    extension row.
    """

    perm: Perm
    g: LowerTri
    laplacian: bool
    meta: FactorMeta
    ext_row: np.ndarray | None = None
    _cache: dict[str, LowerTri] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def fill(self) -> int:
        """Twice the nonzeros of ``G``, extension row included."""
        ext = 0 if self.ext_row is None else int(np.count_nonzero(self.ext_row))
        return 2 * (self.g.nnz + ext)

    def solve_block(self) -> LowerTri:
        """The part of ``G`` used by triangular solves."""
        if "block" not in self._cache:
            self._cache["block"] = (
                self.g.leading(self.g.n - 1) if self.laplacian and self.g.n else self.g
            )
        return self._cache["block"]


def assemble_lower(n: int, columns: dict[int, tuple[np.ndarray, np.ndarray]]) -> LowerTri:
    """Build ``G`` from per-column (rows, values); missing columns are empty."""
    counts = np.zeros(n, dtype=np.int64)
    for k, (rows, _) in columns.items():
        counts[k] = rows.size
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=col_ptr[1:])
    row_idx = np.empty(col_ptr[-1], dtype=np.int64)
    values = np.empty(col_ptr[-1], dtype=np.float64)
    for k, (rows, vals) in columns.items():
        row_idx[col_ptr[k] : col_ptr[k + 1]] = rows
        values[col_ptr[k] : col_ptr[k + 1]] = vals
    return LowerTri(n, col_ptr, row_idx, values)


def eliminate(
    g: ElimGraph,
    k: int,
    rng: RngStream,
    columns: dict[int, tuple[np.ndarray, np.ndarray]],
) -> EdgeList:
    """One step of randomized elimination; returns the sampled edges.

    The caller decides where the sampled edges go.

    Raises:
        FactorizationError: If ``k`` has no neighbors or a nonpositive pivot.
    """
    ids, w = g.pop_star(k)
    if ids.size == 0:
        raise FactorizationError(
            f"vertex {k} has no neighbors before the last step (reducible input)",
            context="rchol",
            details={"vertex": k},
        )
    pivot = float(w.sum())
    if not pivot > 0.0:
        raise FactorizationError(
            f"nonpositive pivot {pivot!r} at vertex {k}", context="rchol"
        )
    root = math.sqrt(pivot)
    columns[k] = (
        np.concatenate(([k], ids)),
        np.concatenate(([root], -w / root)),
    )
    return _sample(ids, w, pivot, rng)


def rchol_laplacian(
    lap: SparseSym,
    p: Perm,
    rng: RngStream | int,
    *,
    check: bool = True,
    on_step: Callable[[int, ElimGraph], None] | None = None,
) -> CholFactor:
    """Randomized Cholesky factor of an irreducible Laplacian.

    Args:
        lap: Irreducible Laplacian.
        p: Elimination order; vertex ``p.inverse[k]`` is eliminated at step ``k``.
        rng: Random stream, or an integer seed.
        check: Classify the input first.
        on_step: Called after every elimination with the step count and graph.

    Returns:
        CholFactor: ``G`` in permuted coordinates; its last column is empty.

    Raises:
        ClassificationError: If ``lap`` is not an irreducible Laplacian.
        FactorizationError: If elimination breaks down.
        DimensionMismatchError: If ``p`` does not match ``lap``.
    """
    if p.n != lap.n:
        raise DimensionMismatchError(
            f"permutation of size {p.n} for matrix of size {lap.n}", context="rchol"
        )
    if check:
        cls = classify(lap)
        if cls.kind != MatrixKind.LAPLACIAN or not cls.irreducible:
            raise ClassificationError(
                "rchol_laplacian needs an irreducible Laplacian",
                context="rchol",
                details=cls.model_dump(mode="json"),
            )
    seed = rng if isinstance(rng, int) else None
    stream = make_rng(rng) if isinstance(rng, int) else rng
    start = time.perf_counter()
    n = lap.n
    graph = ElimGraph.from_laplacian(permute_sym(lap, p))
    columns: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k in range(n - 1):
        graph.insert(eliminate(graph, k, stream, columns))
        if on_step is not None:
            on_step(k + 1, graph)
    final = graph.deg.get(n - 1, 0.0) if n else 0.0
    max_diag = float(lap.diagonal().max()) if n else 0.0
    if abs(final) > FINAL_PIVOT_RTOL * max_diag:
        logger.warning("final pivot %.3e exceeds %.0e * maxdiag", final, FINAL_PIVOT_RTOL)
    g = assemble_lower(n, columns)
    meta = FactorMeta(
        n=n,
        seed=seed,
        nnz_g=g.nnz,
        nnz_a=lap.nnz,
        dropped_edges=graph.dropped,
        final_pivot=final,
        max_diag=max_diag,
        t_f=time.perf_counter() - start,
    )
    logger.debug("rchol on n=%d: nnz(G)=%d, merged=%d", n, g.nnz, graph.merged)
    return CholFactor(p, g, True, meta)


def sddm_from_extended(ext: CholFactor, a: SparseSym) -> CholFactor:
    """Cut the SDDM factor out of a factor of the bordered Laplacian.

    The extension vertex must be eliminated last, so ``G1`` is the leading
    ``n`` x ``n`` block and ``G2`` the last row. Both count towards the fill.
    """
    n = a.n
    if ext.perm.inverse[-1] != n:
        raise FactorizationError(
            "extension vertex is not ordered last", context="rchol_sddm"
        )
    g1 = ext.g.leading(n)
    tail = sp.csr_array(ext.g.csc)[[n], :n].toarray().ravel()
    perm = Perm.from_order(ext.perm.inverse[:n])
    nnz_g = g1.nnz + int(np.count_nonzero(tail))
    meta = ext.meta.model_copy(
        update={"n": n, "nnz_g": nnz_g, "nnz_a": a.nnz, "kind": "sddm"}
    )
    return CholFactor(perm, g1, False, meta, ext_row=tail)


def rchol_sddm(
    a: SparseSym,
    ordering: OrderingSpec,
    rng: RngStream | int,
    tol: float = DEFAULT_TOL,
) -> CholFactor:
    """Randomized Cholesky preconditioner for an SDDM matrix.

    Borders ``a`` into a Laplacian, orders ``a`` with ``ordering`` and pins the
    extension vertex last, factors, and keeps the leading block.

    Raises:
        ClassificationError: If ``a`` is not SDDM.
    """
    ext = extend_sddm(a, tol)
    t0 = time.perf_counter()
    perm, _ = compute_ordering(a, ordering)
    t_p = time.perf_counter() - t0
    factor = rchol_laplacian(ext, perm.append(1), rng, check=False)
    out = sddm_from_extended(factor, a)
    out.meta.t_p = t_p
    out.meta.ordering = ordering.label()
    if ordering.kind.value == "nd":
        out.meta.nd_levels = ordering.levels
    return out
