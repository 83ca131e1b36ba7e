"""Benchmark sweeps producing one row per configuration."""

import csv
import json
import logging
import math
import time
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TextIO

import numpy as np

from .classify import classify
from .factor import CholFactor
from .io import read_matrix_market
from .krylov import build_factor, factor_preconditioner, pcg, prepare, solve
from .models import BenchRow, GridSpec, MatrixKind, OrderingKind, OrderingSpec, SolverOptions
from .ordering import build_nd_tree
from .parallel import effective_workers, par_rchol_sddm
from .problems import poisson7, poisson_var, random_rhs
from .sparse import SparseSym

logger = logging.getLogger(__name__)

SWEEPS = ("orderings", "contrasts", "threads", "trials", "files")


def _row(
    sweep: str,
    label: str,
    a: SparseSym,
    opts: SolverOptions,
    f: CholFactor,
    b: np.ndarray,
    laplacian: bool,
    n_it_cg: int | None = None,
) -> BenchRow:
    _, stats = pcg(
        a,
        b,
        factor_preconditioner(f),
        opts.tol,
        opts.maxit,
        project_ones=laplacian,
        stagnation_window=opts.stagnation_window,
        stagnation_rtol=opts.stagnation_rtol,
    )
    return BenchRow(
        sweep=sweep,
        label=label,
        n=a.n,
        nnz=a.nnz,
        fill_ratio=f.meta.fill_ratio,
        t_p=f.meta.t_p,
        t_f=f.meta.t_f,
        t_s=stats.t_s,
        n_it=stats.iterations,
        res=stats.res,
        converged=stats.converged,
        seed=opts.seed,
        threads=f.meta.workers,
        t_leaf=f.meta.t_leaf,
        t_separator=f.meta.t_separator,
        n_it_cg=n_it_cg,
    )


def run_config(
    sweep: str,
    label: str,
    a: SparseSym,
    opts: SolverOptions,
    b: np.ndarray | None = None,
    baseline: bool = False,
) -> BenchRow:
    """Factor and solve ``a`` once under ``opts``.

    Args:
        sweep: Sweep name stored in the row.
        label: Configuration label stored in the row.
        a: System matrix.
        opts: Solver options.
        b: Right-hand side; standard-uniform from ``opts.seed`` when omitted.
        baseline: Also count unpreconditioned CG iterations.

    Raises:
        ClassificationError: If ``a`` is not SDD.
    """
    a = prepare(a, opts)
    b = random_rhs(a.n, opts.seed) if b is None else b
    kind = classify(a, opts.classify_tol).kind
    n_it_cg = None
    if baseline:
        _, cg = pcg(a, b, None, opts.tol, opts.maxit, project_ones=kind == MatrixKind.LAPLACIAN)
        n_it_cg = cg.iterations
    if kind in (MatrixKind.LAPLACIAN, MatrixKind.SDDM):
        f = build_factor(a, kind, opts)
        return _row(sweep, label, a, opts, f, b, kind == MatrixKind.LAPLACIAN, n_it_cg)
    _, stats = solve(a, b, opts)
    return BenchRow(
        sweep=sweep,
        label=label,
        n=a.n,
        nnz=a.nnz,
        fill_ratio=stats.fill_ratio,
        t_p=stats.t_p,
        t_f=stats.t_f,
        t_s=stats.t_s,
        n_it=stats.iterations,
        res=stats.res,
        converged=stats.converged,
        seed=opts.seed,
        threads=opts.threads,
        n_it_cg=n_it_cg,
    )


def sweep_orderings(a: SparseSym, opts: SolverOptions, levels: int = 2) -> list[BenchRow]:
    """One row each for natural, random, minimum-degree and nested-dissection orders."""
    rows = []
    for kind in OrderingKind:
        spec = OrderingSpec(kind=kind, levels=levels, seed=opts.seed, balance=opts.ordering.balance)
        cfg = opts.model_copy(update={"ordering": spec, "threads": 1})
        rows.append(run_config("orderings", spec.label(), a, cfg))
        logger.info("ordering %s: n_it=%d", spec.label(), rows[-1].n_it)
    return rows


def sweep_contrasts(
    n: int, contrasts: Sequence[float], opts: SolverOptions, grid_seed: int = 0
) -> list[BenchRow]:
    """Variable-coefficient Poisson at each contrast ratio."""
    rows = []
    for rho in contrasts:
        a = poisson_var(GridSpec(n=n, contrast=rho, seed=grid_seed))
        rows.append(run_config("contrasts", f"rho={rho:g}", a, opts))
    return rows


def sweep_threads(
    sizes: Sequence[int], threads: Sequence[int], opts: SolverOptions
) -> list[BenchRow]:
    """Parallel factorization over worker counts, for each grid size.

    Every worker count of one size shares a tree with
    ``log2(max(threads))`` levels, so rows differ only in scheduling.
    """
    rows = []
    levels = max(1, int(math.log2(effective_workers(max(threads)))))
    for n in sizes:
        a = poisson7(n)
        b = random_rhs(a.n, opts.seed)
        t0 = time.perf_counter()
        tree = build_nd_tree(a, levels, opts.ordering.balance)
        t_p = time.perf_counter() - t0
        for p in threads:
            f = par_rchol_sddm(
                a,
                levels,
                opts.seed,
                p,
                backend=opts.backend,
                pin_cores=opts.pin_cores,
                tol=opts.classify_tol,
                tree=tree,
            )
            f.meta.t_p = t_p
            rows.append(_row("threads", f"n={n},p={p}", a, opts, f, b, False))
    return rows


def sweep_trials(a: SparseSym, opts: SolverOptions, trials: int) -> list[BenchRow]:
    """Repeat with ``trials`` consecutive seeds on the same matrix and ordering."""
    rows = []
    for k in range(trials):
        cfg = opts.model_copy(update={"seed": opts.seed + k})
        b = random_rhs(a.n, opts.seed)
        rows.append(run_config("trials", f"seed={cfg.seed}", a, cfg, b=b))
    return rows


def sweep_files(paths: Iterable[str | Path], opts: SolverOptions) -> list[BenchRow]:
    """Benchmark Matrix Market files, with an unpreconditioned CG column."""
    rows = []
    for path in paths:
        a = read_matrix_market(path)
        rows.append(run_config("files", Path(path).name, a, opts, baseline=True))
    return rows


def write_rows(rows: Sequence[BenchRow], fmt: str, out: TextIO) -> None:
    """Write rows as ``csv`` or ``json``."""
    docs = [row.model_dump(mode="json") for row in rows]
    if fmt == "json":
        out.write(json.dumps(docs, indent=2))
        out.write("\n")
        return
    writer = csv.DictWriter(out, fieldnames=list(BenchRow.model_fields))
    writer.writeheader()
    writer.writerows(docs)
