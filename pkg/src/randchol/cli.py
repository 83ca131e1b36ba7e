"""Command-line interface: ``randchol gen|check|factor|solve|bench``.

Data (Matrix Market, JSON, CSV) goes to stdout and logs go to stderr.
Exit codes: 0 success or converged, 1 not converged, 2 unreadable input or
bad options, 3 matrix of the wrong class.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from . import __version__
from .archive import load_factor, load_matrix, save_factor
from .bench import (
    SWEEPS,
    sweep_contrasts,
    sweep_files,
    sweep_orderings,
    sweep_threads,
    sweep_trials,
    write_rows,
)
from .classify import classify
from .config import load_options
from .exceptions import ClassificationError, RandcholError
from .io import parse_matrix_market, read_matrix_market, read_vector, write_matrix_market
from .krylov import build_factor, factor_preconditioner, pcg, prepare, solve
from .models import GridSpec, MatrixKind, SolverOptions, SolveReport
from .problems import contrast_field, poisson7, poisson_var, random_rhs, write_field
from .sparse import SparseSym

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_BAD_INPUT = 2
EXIT_WRONG_CLASS = 3


def _add_ordering_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--ordering", choices=["natural", "random", "mindeg", "nd"], help="Fill-reducing ordering"
    )
    p.add_argument("--nd-levels", type=int, help="Nested-dissection levels")
    p.add_argument("--perm-file", type=Path, help="1-based elimination order, one per line")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    _add_ordering_flags(p)
    p.add_argument("--seed", type=int, help="Sampling seed (default: $RANDCHOL_SEED or 0)")
    p.add_argument("--threads", type=int, help="Parallel factorization workers")
    p.add_argument("--backend", choices=["process", "thread"], help="Executor for --threads")
    p.add_argument("--pin-cores", action="store_true", default=None, help="Pin workers to cores")
    p.add_argument("--tol", type=float, help="Relative residual target")
    p.add_argument("--maxit", type=int, help="PCG iteration cap")
    p.add_argument(
        "--compensate",
        action="store_true",
        default=None,
        help="Raise diagonals to the absolute off-diagonal sum",
    )
    p.add_argument(
        "--drop-positive", type=float, help="Drop positive off-diagonals below this fraction"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randchol", description="Randomized Cholesky preconditioners for SDD systems"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging")
    parser.add_argument("--config", type=Path, help="YAML file with solver options")
    sub = parser.add_subparsers(dest="command", help="Available commands")

    gen = sub.add_parser("gen", help="Generate a 3-D Poisson matrix")
    gen.add_argument("--n", type=int, required=True, help="Grid points per dimension")
    gen.add_argument("--contrast", type=float, default=1.0, help="Coefficient contrast ratio")
    gen.add_argument("--seed", type=int, default=0, help="Coefficient field seed")
    gen.add_argument(
        "--face-average", choices=["arithmetic", "harmonic"], default="arithmetic"
    )
    gen.add_argument("--out", default="-", help="Output Matrix Market file")
    gen.add_argument("--field-out", type=Path, help="Raw float64 coefficient field")

    check = sub.add_parser("check", help="Classify a matrix")
    check.add_argument("matrix", help="Matrix Market file or -")
    check.add_argument("--tol", type=float, default=1e-12, help="Relative row tolerance")

    fac = sub.add_parser("factor", help="Build and save a randomized Cholesky factor")
    fac.add_argument("matrix", nargs="?", default="-", help="Matrix Market file or -")
    _add_solver_flags(fac)
    fac.add_argument("--out", type=Path, default=Path("randchol-factor"), help="Archive dir")
    fac.add_argument("--f32-factor", action="store_true", help="Store G in 32-bit floats")

    sol = sub.add_parser("solve", help="Solve Ax = b")
    sol.add_argument(
        "matrix", nargs="?", default="-", help="Matrix Market file, factor archive or -"
    )
    _add_solver_flags(sol)
    sol.add_argument("--rhs", default="random", help="Right-hand side file or 'random'")
    sol.add_argument("--factor", type=Path, help="Reuse a saved factor archive")
    sol.add_argument("--x-out", type=Path, help="Write the solution, one value per line")

    bench = sub.add_parser("bench", help="Run a benchmark sweep")
    bench.add_argument("files", nargs="*", help="Matrix Market files for --sweep files")
    bench.add_argument("--sweep", choices=SWEEPS, required=True)
    _add_solver_flags(bench)
    bench.add_argument("--n", type=int, nargs="+", default=[16], help="Grid sizes")
    bench.add_argument(
        "--contrasts", type=float, nargs="+", default=[1.0, 10.0, 100.0, 1000.0]
    )
    bench.add_argument("--thread-counts", type=int, nargs="+", default=[1, 2, 4])
    bench.add_argument("--trials", type=int, default=5, help="Seeds for --sweep trials")
    bench.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _options(args: argparse.Namespace) -> SolverOptions:
    ordering: dict[str, Any] = {
        "kind": args.ordering,
        "levels": args.nd_levels,
        "perm_file": args.perm_file,
    }
    return load_options(
        args.config,
        seed=args.seed,
        threads=args.threads,
        backend=args.backend,
        pin_cores=args.pin_cores,
        tol=args.tol,
        maxit=args.maxit,
        compensate=args.compensate,
        drop_positive=args.drop_positive,
        ordering=ordering,
    )


def _emit(doc: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    sys.stdout.flush()


def _read_source(source: str) -> tuple[SparseSym, Path | None]:
    """Matrix from a file, an archive directory, or stdin.

    On stdin, Matrix Market text is parsed directly and a JSON document with
    an ``archive`` key (as printed by ``factor``) names an archive to load.
    """
    if source != "-":
        path = Path(source)
        if path.is_dir():
            return _archive_matrix(path), path
        return read_matrix_market(path), None
    data = sys.stdin.buffer.read()
    if data.lstrip().startswith(b"{"):
        try:
            archive = Path(json.loads(data)["archive"])
        except (ValueError, KeyError) as e:
            raise RandcholError("stdin JSON names no archive", context="solve") from e
        return _archive_matrix(archive), archive
    return parse_matrix_market(data, "<stdin>"), None


def _archive_matrix(path: Path) -> SparseSym:
    a = load_matrix(path)
    if a is None:
        raise RandcholError("archive holds no matrix", context=str(path))
    return a


def cmd_gen(args: argparse.Namespace) -> int:
    spec = GridSpec(
        n=args.n, contrast=args.contrast, seed=args.seed, face_average=args.face_average
    )
    a = poisson7(spec.n) if spec.contrast == 1.0 else poisson_var(spec)
    if args.field_out is not None:
        write_field(contrast_field(spec), args.field_out)
    write_matrix_market(a, args.out, comment=f"poisson n={spec.n} contrast={spec.contrast:g}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    a, _ = _read_source(args.matrix)
    cls = classify(a, args.tol)
    _emit(cls.model_dump(mode="json"))
    return EXIT_WRONG_CLASS if cls.kind == MatrixKind.NOT_SDD else EXIT_OK


def cmd_factor(args: argparse.Namespace) -> int:
    opts = _options(args)
    a, _ = _read_source(args.matrix)
    a = prepare(a, opts)
    kind = classify(a, opts.classify_tol).kind
    if kind not in (MatrixKind.LAPLACIAN, MatrixKind.SDDM):
        raise ClassificationError(
            f"factor needs a laplacian or sddm matrix, got {kind.value}", context="factor"
        )
    f = build_factor(a, kind, opts)
    root = save_factor(f, args.out, f32=args.f32_factor, matrix=a)
    meta = f.meta.model_dump(mode="json")
    meta["precision"] = "float32" if args.f32_factor else "float64"
    _emit({"archive": str(root), "fill_ratio": f.meta.fill_ratio, **meta})
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    opts = _options(args)
    a, archive = _read_source(args.matrix)
    factor_dir = args.factor or archive
    b = random_rhs(a.n, opts.seed) if args.rhs == "random" else read_vector(args.rhs, a.n)
    if factor_dir is not None:
        f = load_factor(factor_dir)
        start = time.perf_counter()
        x, stats = pcg(
            a,
            b,
            factor_preconditioner(f),
            opts.tol,
            opts.maxit,
            project_ones=f.laplacian,
            stagnation_window=opts.stagnation_window,
            stagnation_rtol=opts.stagnation_rtol,
        )
        stats = stats.model_copy(
            update={
                "fill_ratio": f.meta.fill_ratio,
                "t_p": f.meta.t_p,
                "t_f": f.meta.t_f,
                "t_s": time.perf_counter() - start,
                "path": "archive",
            }
        )
        ordering, threads = f.meta.ordering, f.meta.workers
    else:
        x, stats = solve(a, b, opts)
        ordering = stats.ordering or opts.ordering.label()
        threads = stats.workers
    if args.x_out is not None:
        np.savetxt(args.x_out, x, fmt="%.17g")
    report = SolveReport(
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
        ordering=ordering,
        threads=threads,
        path=stats.path,
    )
    _emit(report.model_dump(mode="json"))
    return EXIT_OK if stats.converged else EXIT_NOT_CONVERGED


def cmd_bench(args: argparse.Namespace) -> int:
    opts = _options(args)
    levels = args.nd_levels or 2
    if args.sweep == "orderings":
        rows = sweep_orderings(poisson7(args.n[0]), opts, levels)
    elif args.sweep == "contrasts":
        rows = sweep_contrasts(args.n[0], args.contrasts, opts)
    elif args.sweep == "threads":
        rows = sweep_threads(args.n, args.thread_counts, opts)
    elif args.sweep == "trials":
        a = read_matrix_market(args.files[0]) if args.files else poisson7(args.n[0])
        rows = sweep_trials(a, opts, args.trials)
    else:
        if not args.files:
            raise RandcholError("--sweep files needs at least one matrix", context="bench")
        rows = sweep_files(args.files, opts)
    write_rows(rows, args.format, sys.stdout)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "check": cmd_check,
    "factor": cmd_factor,
    "solve": cmd_solve,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_BAD_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except ClassificationError as e:
        logger.error("%s", e)
        return EXIT_WRONG_CLASS
    except (RandcholError, ValidationError) as e:
        logger.error("%s", e)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
