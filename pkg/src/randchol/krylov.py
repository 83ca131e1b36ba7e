"""Preconditioned conjugate gradient and the end-to-end SDD solve drivers."""

import logging
import math
import time
from collections.abc import Callable

import numpy as np

from .classify import (
    classify,
    compensate_diagonal,
    double_sdd,
    drop_small_positives,
    sign_flip_reduction,
)
from .exceptions import (
    ClassificationError,
    DimensionMismatchError,
    IndefinitePreconditionerError,
    ZeroPivotError,
)
from .factor import CholFactor, rchol_laplacian, rchol_sddm
from .models import MatrixKind, OrderingKind, SolverOptions, SolveStats
from .ordering import build_nd_tree, compute_ordering
from .parallel import effective_workers, par_rchol, par_rchol_sddm
from .sparse import SparseSym, matvec, solve_lower, solve_upper

logger = logging.getLogger(__name__)

Preconditioner = Callable[[np.ndarray], np.ndarray]


def _project(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def pcg(
    a: SparseSym,
    b: np.ndarray,
    precond: Preconditioner | None = None,
    tol: float = 1e-10,
    maxit: int = 2500,
    project_ones: bool = False,
    *,
    stagnation_window: int = 50,
    stagnation_rtol: float = 1e-3,
) -> tuple[np.ndarray, SolveStats]:
    """Preconditioned conjugate gradient from a zero initial guess.

    Stops when the true relative residual ``||b - Ax|| / ||b||`` reaches
    ``tol``; when the recursive residual claims convergence early it is
    replaced by the true one and iteration continues. If the best residual
    fails to improve by ``stagnation_rtol`` over ``stagnation_window``
    iterations, the best iterate is returned with ``stagnated`` set.

    Args:
        a: SPD matrix, or a singular Laplacian with ``project_ones``.
        b: Right-hand side.
        precond: Preconditioner ``r -> z``; identity when ``None``.
        tol: Relative residual target.
        maxit: Iteration cap.
        project_ones: Keep ``b`` and every iterate orthogonal to the ones vector.
        stagnation_window: Iterations without progress before stopping.
        stagnation_rtol: Relative improvement counted as progress.

    Returns:
        The solution and its SolveStats; ``res`` is recomputed from ``x``.

    Raises:
        DimensionMismatchError: If ``len(b) != n``.
        IndefinitePreconditionerError: If ``z^T r <= 0`` or ``p^T A p <= 0``.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.n,):
        raise DimensionMismatchError(
            f"right-hand side of shape {b.shape} for matrix of size {a.n}", context="pcg"
        )
    if project_ones:
        b = _project(b)
    apply = precond if precond is not None else np.copy
    start = time.perf_counter()
    x = np.zeros(a.n)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, SolveStats(residuals=[0.0], converged=True, t_s=time.perf_counter() - start)

    def precondition(r: np.ndarray) -> tuple[np.ndarray, float]:
        z = apply(r)
        if project_ones:
            z = _project(z)
        rz = float(r @ z)
        if not rz > 0.0:
            raise IndefinitePreconditionerError(
                f"preconditioner gave z^T r = {rz!r}", context="pcg"
            )
        return z, rz

    r = b.copy()
    z, rz = precondition(r)
    p = z.copy()
    history = [1.0]
    best, best_x, best_it = 1.0, x.copy(), 0
    stagnated = False
    it = 0
    while it < maxit:
        it += 1
        q = matvec(a, p)
        pq = float(p @ q)
        if not pq > 0.0:
            raise IndefinitePreconditionerError(
                f"search direction has p^T A p = {pq!r}", context="pcg"
            )
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if project_ones:
            x = _project(x)
        rel = float(np.linalg.norm(r)) / bnorm
        if rel <= tol:
            true_r = b - matvec(a, x)
            if project_ones:
                true_r = _project(true_r)
            true_rel = float(np.linalg.norm(true_r)) / bnorm
            history.append(true_rel)
            if true_rel <= tol:
                best, best_x = true_rel, x.copy()
                break
            r, rel = true_r, true_rel
        else:
            history.append(rel)
        if rel < best * (1.0 - stagnation_rtol):
            best, best_x, best_it = rel, x.copy(), it
        elif it - best_it >= stagnation_window:
            stagnated = True
            logger.info("pcg stagnated at iteration %d, best residual %.3e", it, best)
            break
        z, rz_new = precondition(r)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if stagnated or best < history[-1]:
        x = best_x
    final = b - matvec(a, x)
    if project_ones:
        final = _project(final)
    res = float(np.linalg.norm(final)) / bnorm
    stats = SolveStats(
        iterations=it,
        residuals=history,
        res=res,
        converged=res <= tol,
        stagnated=stagnated,
        t_s=time.perf_counter() - start,
    )
    logger.debug("pcg: %d iterations, res=%.3e", it, res)
    return x, stats


def apply_factor(f: CholFactor, r: np.ndarray) -> np.ndarray:
    """Apply ``P (G G^T)^{-1} P^T`` to ``r``.

    For a Laplacian factor only the leading ``n - 1`` block is solved and the
    last permuted coordinate is set to zero; the caller projects out the ones
    vector.

    Raises:
        DimensionMismatchError: If ``len(r) != n``.
        ZeroPivotError: If a solved column has a nonpositive diagonal.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (f.n,):
        raise DimensionMismatchError(
            f"vector of shape {r.shape} for factor of size {f.n}", context="apply_factor"
        )
    y = r[f.perm.inverse]
    block = f.solve_block()
    u = solve_upper(block, solve_lower(block, y[: block.n]))
    if block.n < f.n:
        u = np.concatenate([u, np.zeros(f.n - block.n)])
    return u[f.perm.forward]


def factor_preconditioner(f: CholFactor) -> Preconditioner:
    def apply(r: np.ndarray) -> np.ndarray:
        return apply_factor(f, r)

    return apply


def jacobi(a: SparseSym) -> Preconditioner:
    """Diagonal preconditioner.

    Raises:
        ZeroPivotError: If a diagonal entry is not positive.
    """
    d = a.diagonal()
    bad = np.flatnonzero(~(d > 0.0))
    if bad.size:
        raise ZeroPivotError(
            f"nonpositive diagonal at row {int(bad[0])}", context="jacobi"
        )
    inv = 1.0 / d

    def apply(r: np.ndarray) -> np.ndarray:
        return inv * r

    return apply


def _parallel_levels(opts: SolverOptions, n: int) -> int | None:
    """ND depth for a parallel build, or ``None`` to stay sequential."""
    if opts.threads <= 1:
        return None
    if opts.ordering.kind == OrderingKind.ND and opts.ordering.perm_file is None:
        levels = opts.ordering.levels
    else:
        levels = int(math.log2(effective_workers(opts.threads)))
    if 2**levels > n:
        logger.warning("%d levels too deep for n=%d, factoring sequentially", levels, n)
        return None
    return levels


def build_factor(a: SparseSym, kind: MatrixKind, opts: SolverOptions) -> CholFactor:
    """Randomized factor of a Laplacian or SDDM matrix under ``opts``.

    Raises:
        ClassificationError: For any other kind.
    """
    levels = _parallel_levels(opts, a.n)
    if kind == MatrixKind.SDDM:
        if levels is not None:
            return par_rchol_sddm(
                a,
                levels,
                opts.seed,
                opts.threads,
                backend=opts.backend,
                pin_cores=opts.pin_cores,
                balance=opts.ordering.balance,
                tol=opts.classify_tol,
            )
        return rchol_sddm(a, opts.ordering, opts.seed, opts.classify_tol)
    if kind != MatrixKind.LAPLACIAN:
        raise ClassificationError(
            f"cannot factor a {kind.value} matrix directly", context="build_factor"
        )
    t0 = time.perf_counter()
    if levels is not None:
        tree = build_nd_tree(a, levels, opts.ordering.balance)
        t_p = time.perf_counter() - t0
        f = par_rchol(
            a,
            tree,
            opts.seed,
            opts.threads,
            backend=opts.backend,
            pin_cores=opts.pin_cores,
            check=False,
        )
    else:
        perm, _ = compute_ordering(a, opts.ordering)
        t_p = time.perf_counter() - t0
        f = rchol_laplacian(a, perm, opts.seed, check=False)
        f.meta.ordering = opts.ordering.label()
    f.meta.t_p = t_p
    return f


def _with_factor(stats: SolveStats, f: CholFactor, path: str) -> SolveStats:
    return stats.model_copy(
        update={
            "fill_ratio": f.meta.fill_ratio,
            "t_p": f.meta.t_p,
            "t_f": f.meta.t_f,
            "path": path,
            "ordering": f.meta.ordering,
            "workers": f.meta.workers,
        }
    )


def solve_laplacian(
    lap: SparseSym, b: np.ndarray, options: SolverOptions | None = None
) -> tuple[np.ndarray, SolveStats]:
    """Solve a connected Laplacian system in the least-squares sense.

    ``b`` is projected onto the complement of the ones vector and the
    returned solution has zero mean.

    Raises:
        ClassificationError: If ``lap`` is not an irreducible Laplacian.
    """
    opts = options or SolverOptions()
    cls = classify(lap, opts.classify_tol)
    if cls.kind != MatrixKind.LAPLACIAN or not cls.irreducible:
        raise ClassificationError(
            "expected an irreducible Laplacian",
            context="solve_laplacian",
            details=cls.model_dump(mode="json"),
        )
    f = build_factor(lap, MatrixKind.LAPLACIAN, opts)
    x, stats = pcg(
        lap,
        b,
        factor_preconditioner(f),
        opts.tol,
        opts.maxit,
        project_ones=True,
        stagnation_window=opts.stagnation_window,
        stagnation_rtol=opts.stagnation_rtol,
    )
    return x, _with_factor(stats, f, "laplacian")


def solve_sddm(
    a: SparseSym, b: np.ndarray, tol: float | None = None, options: SolverOptions | None = None
) -> tuple[np.ndarray, SolveStats]:
    """Solve ``Ax = b`` for SDDM ``A`` with a randomized Cholesky preconditioner.

    PCG runs directly on ``A`` with ``G1 G1^T``, which is equivalent to
    solving the bordered Laplacian system and projecting back.

    Raises:
        ClassificationError: If ``a`` is not SDDM.
    """
    opts = options or SolverOptions()
    tol = opts.tol if tol is None else tol
    cls = classify(a, opts.classify_tol)
    if cls.kind != MatrixKind.SDDM:
        raise ClassificationError(
            f"expected sddm input, got {cls.kind.value}",
            context="solve_sddm",
            details=cls.model_dump(mode="json"),
        )
    f = build_factor(a, MatrixKind.SDDM, opts)
    x, stats = pcg(
        a,
        b,
        factor_preconditioner(f),
        tol,
        opts.maxit,
        stagnation_window=opts.stagnation_window,
        stagnation_rtol=opts.stagnation_rtol,
    )
    return x, _with_factor(stats, f, "sddm")


def _solve_nonpositive(
    a: SparseSym, b: np.ndarray, tol: float, opts: SolverOptions
) -> tuple[np.ndarray, SolveStats]:
    """Solve a system whose off-diagonals are all nonpositive."""
    kind = classify(a, opts.classify_tol).kind
    if kind == MatrixKind.LAPLACIAN:
        return solve_laplacian(a, b, opts.model_copy(update={"tol": tol}))
    return solve_sddm(a, b, tol, opts)


def solve_sdd(
    a: SparseSym, b: np.ndarray, tol: float | None = None, options: SolverOptions | None = None
) -> tuple[np.ndarray, SolveStats]:
    """Solve an SDD system that has positive off-diagonals.

    First tries the sign-flip reduction; if the doubled graph is connected,
    solves the ``2n`` system with right-hand side ``[b; -b]`` and returns
    the average of the first half and the negated second half.

    Raises:
        ClassificationError: If ``a`` is not sdd-mixed.
    """
    opts = options or SolverOptions()
    tol = opts.tol if tol is None else tol
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.n,):
        raise DimensionMismatchError(
            f"right-hand side of shape {b.shape} for matrix of size {a.n}",
            context="solve_sdd",
        )
    flip = sign_flip_reduction(a, opts.classify_tol)
    if flip is not None:
        s = flip.signs()
        y, stats = _solve_nonpositive(flip.matrix, s * b, tol, opts)
        x = s * y
        path = "sign-flip"
    else:
        doubled = double_sdd(a, opts.classify_tol)
        xt, stats = _solve_nonpositive(doubled, np.concatenate([b, -b]), tol, opts)
        x = 0.5 * (xt[: a.n] - xt[a.n :])
        path = "doubled"
    bnorm = float(np.linalg.norm(b))
    res = float(np.linalg.norm(b - matvec(a, x))) / bnorm if bnorm else 0.0
    logger.info("solve_sdd via %s path: res=%.3e", path, res)
    return x, stats.model_copy(
        update={"res": res, "converged": res <= tol, "path": f"{path}/{stats.path}"}
    )


def prepare(a: SparseSym, options: SolverOptions) -> SparseSym:
    """Apply the optional positive-drop and diagonal compensation steps."""
    if options.drop_positive is not None:
        a = drop_small_positives(a, options.drop_positive)
    if options.compensate:
        a = compensate_diagonal(a)
    return a


def solve(
    a: SparseSym, b: np.ndarray, options: SolverOptions | None = None
) -> tuple[np.ndarray, SolveStats]:
    """Route ``Ax = b`` to the solver for ``a``'s class.

    Raises:
        ClassificationError: If ``a`` is not SDD after preparation.
    """
    opts = options or SolverOptions()
    a = prepare(a, opts)
    cls = classify(a, opts.classify_tol)
    logger.info("matrix class %s (%s), n=%d", cls.kind.value, cls.scenario.value, cls.n)
    if cls.kind == MatrixKind.LAPLACIAN:
        return solve_laplacian(a, b, opts)
    if cls.kind == MatrixKind.SDDM:
        return solve_sddm(a, b, opts.tol, opts)
    if cls.kind == MatrixKind.SDD_MIXED:
        return solve_sdd(a, b, opts.tol, opts)
    raise ClassificationError(
        "matrix is not diagonally dominant or has a singular block",
        context="solve",
        details=cls.model_dump(mode="json"),
    )
