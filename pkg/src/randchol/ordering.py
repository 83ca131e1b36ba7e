"""Fill-reducing orderings and the nested-dissection tree.

Minimum degree runs on a quotient graph: eliminated vertices become
elements, indistinguishable variables are merged into supervariables, and
degrees are recomputed exactly for the variables an elimination touches.
Nested dissection bisects with BFS level structures from a pseudo-peripheral
vertex and orders each leaf by minimum degree.
"""

import heapq
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import shortest_path

from .exceptions import OrderingError
from .models import OrderingKind, OrderingSpec
from .sampling import make_rng
from .sparse import Perm, SparseSym

logger = logging.getLogger(__name__)

PERIPHERAL_SWEEPS = 5


def _pattern(a: SparseSym) -> sp.csr_array:
    """Off-diagonal sparsity pattern with unit values."""
    off = sp.csr_array(a.offdiag())
    off.data[:] = 1.0
    return off


class _QuotientGraph:
    """Quotient-graph state for exact minimum degree."""

    def __init__(self, pattern: sp.csr_array) -> None:
        n = pattern.shape[0]
        ptr, idx = pattern.indptr, pattern.indices
        self.var_adj: dict[int, set[int]] = {
            v: set(idx[ptr[v] : ptr[v + 1]].tolist()) for v in range(n)
        }
        self.elem_adj: dict[int, set[int]] = {v: set() for v in range(n)}
        self.elem_vars: dict[int, set[int]] = {}
        self.weight: dict[int, int] = dict.fromkeys(range(n), 1)
        self.members: dict[int, list[int]] = {v: [v] for v in range(n)}
        self.remaining = n

    def reach(self, u: int) -> set[int]:
        out = set(self.var_adj[u])
        for e in self.elem_adj[u]:
            out |= self.elem_vars[e]
        out.discard(u)
        return out

    def degree(self, u: int) -> int:
        return sum(self.weight[v] for v in self.reach(u))

    def eliminate(self, p: int) -> set[int]:
        """Turn supervariable ``p`` into an element; returns its variables."""
        le = self.reach(p)
        absorbed = self.elem_adj.pop(p)
        for e in absorbed:
            del self.elem_vars[e]
        for u in self.var_adj.pop(p):
            self.var_adj[u].discard(p)
        self.elem_vars[p] = le
        for u in le:
            self.elem_adj[u] -= absorbed
            self.elem_adj[u].add(p)
            # edges inside the new element are implied by it
            self.var_adj[u] -= le
        self.remaining -= self.weight.pop(p)
        return le

    def merge_indistinguishable(self, le: set[int]) -> None:
        groups: dict[tuple[frozenset[int], frozenset[int]], list[int]] = {}
        for u in sorted(le):
            key = (frozenset(self.elem_adj[u]), frozenset(self.var_adj[u]))
            groups.setdefault(key, []).append(u)
        for group in groups.values():
            rep = group[0]
            for w in group[1:]:
                self.weight[rep] += self.weight.pop(w)
                self.members[rep].extend(self.members.pop(w))
                for e in self.elem_adj.pop(w):
                    self.elem_vars[e].discard(w)
                for x in self.var_adj.pop(w):
                    self.var_adj[x].discard(w)
                le.discard(w)


def mindeg_order(a: SparseSym) -> Perm:
    """Exact minimum-degree ordering.

    Repeatedly eliminates a supervariable of minimum external degree, ties
    broken by the smallest vertex id. Once the remaining graph is a clique
    its supervariables follow in ascending order of representative.

    Args:
        a: Symmetric matrix; only its off-diagonal pattern is used.

    Returns:
        Perm: ``inverse`` is the elimination order.
    """
    n = a.n
    q = _QuotientGraph(_pattern(a))
    deg = {v: len(q.var_adj[v]) for v in range(n)}
    heap = [(d, v) for v, d in deg.items()]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        d, p = heapq.heappop(heap)
        if p not in q.weight or deg[p] != d:
            continue
        if d == q.remaining - q.weight[p]:
            for rep in sorted(q.weight):
                order.extend(sorted(q.members[rep]))
            break
        order.extend(sorted(q.members.pop(p)))
        le = q.eliminate(p)
        q.merge_indistinguishable(le)
        for u in le:
            deg[u] = q.degree(u)
            heapq.heappush(heap, (deg[u], u))
    logger.debug("minimum degree ordered %d vertices", len(order))
    return Perm.from_order(order)


def _peripheral_root(adj: sp.csr_array) -> tuple[int, np.ndarray]:
    """Pseudo-peripheral vertex of a connected graph and its BFS distances."""
    degrees = np.diff(adj.indptr)
    root = int(np.argmin(degrees))
    dist = shortest_path(adj, unweighted=True, indices=root)
    ecc = dist.max()
    for _ in range(PERIPHERAL_SWEEPS):
        far = np.flatnonzero(dist == ecc)
        cand = int(far[np.argmin(degrees[far])])
        cand_dist = shortest_path(adj, unweighted=True, indices=cand)
        if cand_dist.max() <= ecc:
            break
        root, dist, ecc = cand, cand_dist, cand_dist.max()
    return root, dist


def _split_candidates(dist: np.ndarray, balance: float) -> list[int]:
    n = dist.size
    levels = np.bincount(dist.astype(np.int64))
    bounds = np.cumsum(levels)[:-1]
    lo, hi = (1.0 - balance) * n, balance * n
    cands = {int(m) for m in bounds if lo <= m <= hi}
    cands.add(n // 2)
    return sorted(m for m in cands if 1 <= m <= n - 1)


def _separate(
    adj: sp.csr_array, in_left: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coo = sp.triu(adj, k=1).tocoo()
    cut = in_left[coo.row] != in_left[coo.col]
    ends = np.concatenate([coo.row[cut], coo.col[cut]])
    left_ends = np.unique(ends[in_left[ends]])
    right_ends = np.unique(ends[~in_left[ends]])
    sep = left_ends if left_ends.size < right_ends.size else right_ends
    side = np.where(in_left, 0, 1)
    side[sep] = 2
    # move separator vertices that touch only one side into that side
    for s in sep.tolist():
        nbrs = adj.indices[adj.indptr[s] : adj.indptr[s + 1]]
        touch = set(side[nbrs].tolist()) - {2}
        if touch == {0}:
            side[s] = 0
        elif touch == {1}:
            side[s] = 1
        elif not touch:
            side[s] = 0 if (side == 0).sum() <= (side == 1).sum() else 1
    return (
        np.flatnonzero(side == 0),
        np.flatnonzero(side == 1),
        np.flatnonzero(side == 2),
    )


def _bisect_connected(
    adj: sp.csr_array, balance: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = adj.shape[0]
    if n <= 1:
        return np.arange(n), np.zeros(0, np.int64), np.zeros(0, np.int64)
    _, dist = _peripheral_root(adj)
    order = np.lexsort((np.arange(n), dist))
    best = None
    best_key = None
    for m in _split_candidates(dist, balance):
        in_left = np.zeros(n, dtype=bool)
        in_left[order[:m]] = True
        left, right, sep = _separate(adj, in_left)
        big = max(left.size, right.size)
        key = (
            big > balance * (left.size + right.size),
            sep.size,
            abs(left.size - right.size),
            m,
        )
        if best_key is None or key < best_key:
            best, best_key = (left, right, sep), key
    assert best is not None
    return best


def bisect(
    adj: sp.csr_array, balance: float = 0.6
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a graph into two sides and a vertex separator.

    No edge joins the two sides. Disconnected graphs are first split along
    components, largest first onto the lighter side; a component too large
    for ``balance`` is itself bisected. When no BFS split meets ``balance``
    the most balanced one with the smallest separator is returned.

    Args:
        adj: Symmetric adjacency pattern (CSR, no diagonal).
        balance: Target bound on ``max(|left|, |right|) / (|left| + |right|)``.

    Returns:
        Sorted ``(left, right, separator)`` index arrays.
    """
    n = adj.shape[0]
    adj = sp.csr_array(adj)
    if n <= 1:
        return _bisect_connected(adj, balance)
    ncomp, labels = _cc(adj, directed=False)
    if ncomp <= 1:
        return _bisect_connected(adj, balance)
    _, first = np.unique(labels, return_index=True)
    comps = [np.flatnonzero(labels == c) for c in np.argsort(first)]
    comps.sort(key=lambda c: -c.size)
    sides: list[list[np.ndarray]] = [[], []]
    sizes = [0, 0]
    sep = np.zeros(0, np.int64)
    largest = comps[0]
    if largest.size > balance * n:
        sub = adj[largest, :][:, largest]
        left, right, s = _bisect_connected(sp.csr_array(sub), balance)
        sides[0].append(largest[left])
        sides[1].append(largest[right])
        sizes = [left.size, right.size]
        sep = largest[s]
        comps = comps[1:]
    for comp in comps:
        k = 0 if sizes[0] <= sizes[1] else 1
        sides[k].append(comp)
        sizes[k] += comp.size

    def joined(parts: list[np.ndarray]) -> np.ndarray:
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, np.int64)

    return joined(sides[0]), joined(sides[1]), np.sort(sep)


@dataclass(frozen=True, eq=False)
class NDTree:
    """Full binary nested-dissection tree in heap numbering.

    Node 0 is the root and node ``i`` has children ``2i + 1`` and ``2i + 2``.
    Internal nodes hold separators (ascending ids), leaves hold their indices
    in minimum-degree order.
    """

    levels: int
    n: int
    blocks: tuple[np.ndarray, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.blocks)

    def is_leaf(self, node: int) -> bool:
        return 2 * node + 1 >= self.num_nodes

    def children(self, node: int) -> tuple[int, int] | None:
        if self.is_leaf(node):
            return None
        return 2 * node + 1, 2 * node + 2

    def leaves(self) -> list[int]:
        first = 2**self.levels - 1
        return list(range(first, self.num_nodes))

    def postorder(self) -> list[int]:
        out: list[int] = []

        def visit(node: int) -> None:
            kids = self.children(node)
            if kids is not None:
                visit(kids[0])
                visit(kids[1])
            out.append(node)

        visit(0)
        return out

    def owner(self) -> np.ndarray:
        """Node id owning each index."""
        out = np.full(self.n, -1, dtype=np.int64)
        for node, block in enumerate(self.blocks):
            out[block] = node
        return out

    def with_extension(self, extra: int = 1) -> "NDTree":
        """Tree over ``n + extra`` indices with the new ones ending the root separator."""
        tail = np.arange(self.n, self.n + extra, dtype=np.int64)
        blocks = (np.concatenate([self.blocks[0], tail]), *self.blocks[1:])
        return NDTree(self.levels, self.n + extra, blocks)

    def validate(self, a: SparseSym) -> None:
        """Check the partition and that no edge joins unrelated nodes.

        Raises:
            OrderingError: If the tree does not fit ``a``.
        """
        if a.n != self.n:
            raise OrderingError(
                f"tree over {self.n} indices for matrix of size {a.n}", context="NDTree"
            )
        counts = np.zeros(self.n, dtype=np.int64)
        for block in self.blocks:
            np.add.at(counts, block, 1)
        if np.any(counts != 1):
            raise OrderingError("tree blocks do not partition the indices", context="NDTree")
        owner = self.owner()
        coo = sp.triu(a.offdiag(), k=1).tocoo()
        for x, y in {(int(p), int(q)) for p, q in zip(owner[coo.row], owner[coo.col])}:
            if x == y:
                continue
            if not (_is_ancestor(x, y) or _is_ancestor(y, x)):
                raise OrderingError(
                    f"edge joins unrelated tree nodes {x} and {y}", context="NDTree"
                )


def _is_ancestor(anc: int, node: int) -> bool:
    while node > anc:
        node = (node - 1) // 2
    return node == anc


def build_nd_tree(a: SparseSym, levels: int, balance: float = 0.6) -> NDTree:
    """Nested dissection to depth ``levels`` with minimum degree in the leaves.

    Raises:
        OrderingError: If ``levels < 1`` or ``2**levels > n``.
    """
    if levels < 1:
        raise OrderingError("levels must be at least 1", context="build_nd_tree")
    if 2**levels > a.n:
        raise OrderingError(
            f"{2**levels} leaves requested for {a.n} indices", context="build_nd_tree"
        )
    adj = _pattern(a)
    blocks: list[np.ndarray] = [np.zeros(0, np.int64)] * (2 ** (levels + 1) - 1)

    def visit(node: int, index: np.ndarray, depth: int) -> None:
        if depth == levels:
            if index.size:
                sub = SparseSym.from_scipy(a.csc[index, :][:, index], check=False)
                blocks[node] = index[mindeg_order(sub).inverse]
            else:
                blocks[node] = index
            return
        left, right, sep = bisect(adj[index, :][:, index], balance)
        blocks[node] = index[sep]
        visit(2 * node + 1, index[left], depth + 1)
        visit(2 * node + 2, index[right], depth + 1)

    visit(0, np.arange(a.n, dtype=np.int64), 0)
    tree = NDTree(levels, a.n, tuple(blocks))
    logger.debug(
        "nd tree with %d levels, root separator %d", levels, tree.blocks[0].size
    )
    return tree


def tree_to_perm(t: NDTree) -> Perm:
    """Elimination order: node blocks concatenated in post-order."""
    return Perm.from_order(np.concatenate([t.blocks[v] for v in t.postorder()]))


def compute_ordering(a: SparseSym, spec: OrderingSpec) -> tuple[Perm, NDTree | None]:
    """Ordering requested by ``spec``; the tree is returned for ``nd``.

    Raises:
        OrderingError: For an invalid permutation file or tree depth.
    """
    if spec.perm_file is not None:
        from .io import read_perm

        perm = read_perm(spec.perm_file)
        if perm.n != a.n:
            raise OrderingError(
                f"permutation file has {perm.n} entries, matrix has {a.n}",
                context="compute_ordering",
            )
        return perm, None
    if spec.kind == OrderingKind.NATURAL:
        return Perm.identity(a.n), None
    if spec.kind == OrderingKind.RANDOM:
        return Perm.from_order(make_rng(spec.seed).permutation(a.n)), None
    if spec.kind == OrderingKind.MINDEG:
        return mindeg_order(a), None
    tree = build_nd_tree(a, spec.levels, spec.balance)
    return tree_to_perm(tree), tree
