"""Task-tree parallel randomized Cholesky.

Indices are relabelled so each tree node owns a contiguous range, ordered
leaves first and root last. A node task merges the Schur edges shipped up
by its children, eliminates its own range with a private random stream and
ships the sampled edges that only its ancestors need.
"""

import logging
import math
import os
import time
from collections.abc import Callable
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .classify import DEFAULT_TOL, classify, extend_sddm
from .exceptions import ClassificationError
from .factor import (
    CholFactor,
    ElimGraph,
    assemble_lower,
    eliminate,
    schur_edge_count,
    sddm_from_extended,
)
from .models import FactorMeta, MatrixKind
from .ordering import NDTree, build_nd_tree, tree_to_perm
from .sampling import EdgeList, make_rng
from .sparse import SparseSym, permute_sym

logger = logging.getLogger(__name__)

Backend = Literal["process", "thread"]


def separate_edges(block: tuple[int, int], c: EdgeList) -> tuple[EdgeList, EdgeList]:
    """Split edges by whether they touch ``block``.

    Args:
        block: Half-open index range ``[lo, hi)`` owned by the current node.
        c: Edges to split.

    Returns:
        ``(c1, c2)``: edges with an endpoint in the block, and the rest.
    """
    lo, hi = block
    inside = ((c.i >= lo) & (c.i < hi)) | ((c.j >= lo) & (c.j < hi))
    return (
        EdgeList(c.i[inside], c.j[inside], c.w[inside]),
        EdgeList(c.i[~inside], c.j[~inside], c.w[~inside]),
    )


@dataclass(frozen=True)
class TaskInput:
    """Everything a node task needs; picklable for process pools."""

    node: int
    block: tuple[int, int]
    local: EdgeList
    children: tuple[EdgeList, ...]
    seed: int
    last: int


@dataclass
class TaskResult:
    """Output of one node task.

    ``shipped`` is the node's Schur buffer: merged edges with no endpoint in
    its block. The counters let callers check the edge ledger per task.
    """

    node: int
    columns: dict[int, tuple[np.ndarray, np.ndarray]]
    shipped: EdgeList
    elapsed: float
    final_pivot: float = 0.0
    counts: dict[str, int] = field(default_factory=dict)


def run_task(task: TaskInput) -> TaskResult:
    """Eliminate one tree node's block."""
    start = time.perf_counter()
    lo, hi = task.block
    incoming = EdgeList.concat(list(task.children)).merged()
    keep, passing = separate_edges(task.block, incoming)
    graph = ElimGraph()
    graph.add_vertices(range(lo, hi))
    graph.insert(task.local)
    graph.insert(keep)
    rng = make_rng(task.seed, task.node)
    columns: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    shipped: list[EdgeList] = [passing]
    kept = sent = stars = eliminated = 0
    for k in range(lo, hi):
        if k == task.last:
            continue
        before = graph.num_edges
        sampled = eliminate(graph, k, rng, columns)
        stars += before - graph.num_edges
        c1, c2 = separate_edges(task.block, sampled)
        graph.insert(c1)
        shipped.append(c2)
        kept += len(c1)
        sent += len(c2)
        eliminated += 1
    final = graph.deg.get(task.last, 0.0) if lo <= task.last < hi else 0.0
    return TaskResult(
        node=task.node,
        columns=columns,
        shipped=EdgeList.concat(shipped).merged(),
        elapsed=time.perf_counter() - start,
        final_pivot=final,
        counts={
            "local": len(task.local),
            "received": len(keep),
            "passed": len(passing),
            "eliminated": eliminated,
            "star_edges": stars,
            "sampled_kept": kept,
            "sampled_shipped": sent,
            "ledger": schur_edge_count(graph),
            "alive_edges": graph.num_edges,
            "dropped": graph.dropped,
        },
    )


def task_schedule(t: NDTree, workers: int) -> list[list[tuple[int, int]]]:
    """Static execution plan: waves of ``(node, worker slot)`` pairs.

    Tree levels run deepest first, so every child finishes in an earlier
    wave than its parent. A level wider than ``workers`` is split into
    several waves; slots are handed out round-robin within a wave.
    """
    workers = max(1, workers)
    plan: list[list[tuple[int, int]]] = []
    for depth in range(t.levels, -1, -1):
        nodes = list(range(2**depth - 1, 2 ** (depth + 1) - 1))
        for start in range(0, len(nodes), workers):
            wave = nodes[start : start + workers]
            plan.append([(node, slot % workers) for slot, node in enumerate(wave)])
    return plan


def effective_workers(workers: int) -> int:
    """Largest power of two not above ``workers``."""
    return 2 ** int(math.floor(math.log2(max(1, workers))))


def _pin(cores: list[int]) -> None:
    if hasattr(os, "sched_setaffinity"):
        os.sched_setaffinity(0, cores)


def _executor(workers: int, backend: Backend, pin_cores: bool) -> Executor:
    if backend == "thread":
        return ThreadPoolExecutor(max_workers=workers)
    if pin_cores and hasattr(os, "sched_setaffinity"):
        cores = sorted(os.sched_getaffinity(0))[:workers]
        return ProcessPoolExecutor(max_workers=workers, initializer=_pin, initargs=(cores,))
    return ProcessPoolExecutor(max_workers=workers)


def _node_ranges(t: NDTree) -> dict[int, tuple[int, int]]:
    ranges = {}
    offset = 0
    for node in t.postorder():
        size = t.blocks[node].size
        ranges[node] = (offset, offset + size)
        offset += size
    return ranges


def _owned_edges(
    lp: SparseSym, ranges: dict[int, tuple[int, int]]
) -> dict[int, EdgeList]:
    coo = sp.triu(lp.csc, k=1).tocoo()
    i, j, w = coo.row.astype(np.int64), coo.col.astype(np.int64), -coo.data
    nodes = sorted(ranges, key=lambda v: ranges[v])
    starts = np.array([ranges[v][0] for v in nodes])
    slot = np.searchsorted(starts, i, side="right") - 1
    out = {}
    for pos, node in enumerate(nodes):
        mask = slot == pos
        out[node] = EdgeList(i[mask], j[mask], w[mask])
    return out


def par_rchol(
    lap: SparseSym,
    t: NDTree,
    seed: int,
    workers: int = 1,
    *,
    backend: Backend = "process",
    pin_cores: bool = False,
    check: bool = True,
    on_result: Callable[[TaskResult], None] | None = None,
) -> CholFactor:
    """Randomized Cholesky factor computed over a nested-dissection task tree.

    Each node's stream is seeded by ``(seed, node)`` and children are merged
    left before right, so the factor depends only on ``(lap, t, seed)``.

    Args:
        lap: Irreducible Laplacian.
        t: Tree valid for ``lap``.
        seed: Global sampling seed.
        workers: Pool size, rounded down to a power of two; 1 runs inline.
        backend: ``"process"`` or ``"thread"`` pool.
        pin_cores: Restrict process workers to the first ``workers`` cores.
        check: Classify the input first.
        on_result: Called with every finished task result, in plan order.

    Returns:
        CholFactor: ``G`` under ``tree_to_perm(t)``.

    Raises:
        ClassificationError: If ``lap`` is not an irreducible Laplacian.
        OrderingError: If the tree does not fit ``lap``.
    """
    if check:
        cls = classify(lap)
        if cls.kind != MatrixKind.LAPLACIAN or not cls.irreducible:
            raise ClassificationError(
                "par_rchol needs an irreducible Laplacian",
                context="par_rchol",
                details=cls.model_dump(mode="json"),
            )
    t.validate(lap)
    workers = effective_workers(workers)
    start = time.perf_counter()
    perm = tree_to_perm(t)
    lp = permute_sym(lap, perm)
    ranges = _node_ranges(t)
    owned = _owned_edges(lp, ranges)
    last = lap.n - 1
    results: dict[int, TaskResult] = {}

    def inputs(node: int) -> TaskInput:
        kids = t.children(node)
        buffers = () if kids is None else tuple(results[c].shipped for c in kids)
        return TaskInput(node, ranges[node], owned[node], buffers, seed, last)

    plan = task_schedule(t, workers)
    if workers == 1:
        for wave in plan:
            for node, _ in wave:
                results[node] = run_task(inputs(node))
    else:
        with _executor(workers, backend, pin_cores) as pool:
            for wave in plan:
                futures = [pool.submit(run_task, inputs(node)) for node, _ in wave]
                for fut in futures:
                    res = fut.result()
                    results[res.node] = res
    if on_result is not None:
        for wave in plan:
            for node, _ in wave:
                on_result(results[node])

    columns: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for res in results.values():
        columns.update(res.columns)
    g = assemble_lower(lap.n, columns)
    leaf_times = [results[v].elapsed for v in t.leaves()]
    sep_times = [results[v].elapsed for v in range(2**t.levels - 1)]
    meta = FactorMeta(
        n=lap.n,
        seed=seed,
        ordering=f"nd{t.levels}",
        nd_levels=t.levels,
        nnz_g=g.nnz,
        nnz_a=lap.nnz,
        dropped_edges=sum(r.counts["dropped"] for r in results.values()),
        final_pivot=results[0].final_pivot,
        max_diag=float(lap.diagonal().max()),
        t_f=time.perf_counter() - start,
        t_leaf=max(leaf_times),
        t_separator=sum(sep_times),
        workers=workers,
    )
    logger.info(
        "par_rchol: %d levels on %d %s workers, nnz(G)=%d",
        t.levels,
        workers,
        backend,
        g.nnz,
    )
    return CholFactor(perm, g, True, meta)


def par_rchol_sddm(
    a: SparseSym,
    levels: int,
    seed: int,
    workers: int = 1,
    *,
    backend: Backend = "process",
    pin_cores: bool = False,
    balance: float = 0.6,
    tol: float = DEFAULT_TOL,
    tree: NDTree | None = None,
) -> CholFactor:
    """Parallel factor of an SDDM matrix through its bordered Laplacian.

    The tree is built on ``a`` unless one is passed in; the extension vertex
    joins the root separator, so it is still eliminated last.

    Raises:
        ClassificationError: If ``a`` is not SDDM.
        OrderingError: If ``2**levels`` exceeds ``n``.
    """
    ext = extend_sddm(a, tol)
    t0 = time.perf_counter()
    if tree is None:
        tree = build_nd_tree(a, levels, balance)
    tree = tree.with_extension(1)
    t_p = time.perf_counter() - t0
    factor = par_rchol(
        ext, tree, seed, workers, backend=backend, pin_cores=pin_cores, check=False
    )
    out = sddm_from_extended(factor, a)
    out.meta.t_p = t_p
    return out
