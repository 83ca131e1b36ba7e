"""Matrix Market and permutation-file input/output.

Files use 1-based indices; everything returned from here is 0-based.
``"-"`` as a path means standard input or output.
"""

import io
import logging
import sys
from pathlib import Path
from typing import IO

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import MatrixFormatError, OrderingError
from .sparse import Perm, SparseSym

logger = logging.getLogger(__name__)

PathLike = str | Path

_ACCEPTED_FIELDS = {"real", "integer"}
_ACCEPTED_SYMMETRY = {"symmetric", "general"}


def _open_source(path: PathLike) -> IO[bytes]:
    if str(path) == "-":
        return io.BytesIO(sys.stdin.buffer.read())
    return open(path, "rb")


def read_matrix_market(path: PathLike) -> SparseSym:
    """Read a coordinate real symmetric or general Matrix Market file.

    General files are checked for symmetry.

    Args:
        path: File path, or ``"-"`` for standard input.

    Returns:
        SparseSym: The matrix.

    Raises:
        MatrixFormatError: For pattern or complex fields, dense arrays,
            skew/hermitian symmetry, nonsquare or asymmetric matrices, or an
            unreadable header.
    """
    try:
        with _open_source(path) as fh:
            data = fh.read()
    except OSError as e:
        raise MatrixFormatError(f"cannot read matrix file: {e}", context=str(path)) from e
    return parse_matrix_market(data, str(path))


def parse_matrix_market(data: bytes, name: str = "<bytes>") -> SparseSym:
    """Parse Matrix Market text already in memory; see :func:`read_matrix_market`."""
    try:
        rows, cols, _, fmt, fld, symm = scipy.io.mminfo(io.BytesIO(data))
    except (OSError, ValueError, RuntimeError) as e:
        raise MatrixFormatError(f"cannot read Matrix Market header: {e}", context=name) from e
    if fmt != "coordinate":
        raise MatrixFormatError(f"expected coordinate format, got {fmt}", context=name)
    if fld not in _ACCEPTED_FIELDS:
        raise MatrixFormatError(
            f"field '{fld}' not supported, values required", context=name
        )
    if symm not in _ACCEPTED_SYMMETRY:
        raise MatrixFormatError(f"symmetry '{symm}' not supported", context=name)
    if rows != cols:
        raise MatrixFormatError(f"matrix is {rows}x{cols}, expected square", context=name)
    try:
        mat = scipy.io.mmread(io.BytesIO(data))
    except (ValueError, RuntimeError) as e:
        raise MatrixFormatError(f"malformed Matrix Market body: {e}", context=name) from e
    a = SparseSym.from_scipy(sp.csc_array(mat, dtype=np.float64), check=symm == "general")
    logger.debug("read %s: n=%d nnz=%d", name, a.n, a.nnz)
    return a


def write_matrix_market(a: SparseSym, path: PathLike, comment: str = "") -> None:
    """Write ``a`` as coordinate real symmetric with 17 significant digits."""
    buf = io.BytesIO()
    scipy.io.mmwrite(
        buf, sp.coo_array(a.csc), comment=comment, field="real", precision=17, symmetry="symmetric"
    )
    _write_bytes(path, buf.getvalue())


def write_lower(g: sp.sparray, path: PathLike, comment: str = "") -> None:
    """Write a triangular or rectangular matrix in general coordinate form."""
    buf = io.BytesIO()
    scipy.io.mmwrite(
        buf, sp.coo_array(g), comment=comment, field="real", precision=17, symmetry="general"
    )
    _write_bytes(path, buf.getvalue())


def read_general(path: PathLike) -> sp.csc_array:
    """Read any real coordinate Matrix Market file without symmetry checks."""
    try:
        return sp.csc_array(scipy.io.mmread(str(path)), dtype=np.float64)
    except (OSError, ValueError) as e:
        raise MatrixFormatError(f"cannot read {path}: {e}", context="read_general") from e


def _write_bytes(path: PathLike, data: bytes) -> None:
    if str(path) == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    Path(path).write_bytes(data)


def read_perm(path: PathLike) -> Perm:
    """Read an elimination order, one 1-based index per line.

    Raises:
        OrderingError: If the file is unreadable or not a permutation.
    """
    try:
        text = Path(path).read_text()
        order = np.array([int(tok) for tok in text.split()], dtype=np.int64) - 1
    except (OSError, ValueError) as e:
        raise OrderingError(f"cannot read permutation file: {e}", context=str(path)) from e
    if not np.array_equal(np.sort(order), np.arange(order.size)):
        raise OrderingError("file is not a permutation of 1..n", context=str(path))
    return Perm.from_order(order)


def write_perm(p: Perm, path: PathLike) -> None:
    """Write the elimination order, one 1-based index per line."""
    Path(path).write_text("".join(f"{i + 1}\n" for i in p.inverse.tolist()))


def read_vector(path: PathLike, n: int) -> np.ndarray:
    """Read a right-hand side stored as an ``n`` x 1 Matrix Market array or plain text.

    Raises:
        MatrixFormatError: If the length is not ``n``.
    """
    p = Path(path)
    try:
        if p.suffix == ".mtx":
            raw = scipy.io.mmread(str(p))
            if sp.issparse(raw):
                raw = raw.toarray()
            vec = np.asarray(raw, dtype=np.float64).ravel()
        else:
            vec = np.loadtxt(p, dtype=np.float64, ndmin=1)
    except (OSError, ValueError) as e:
        raise MatrixFormatError(f"cannot read vector: {e}", context=str(path)) from e
    if vec.size != n:
        raise MatrixFormatError(
            f"vector has {vec.size} entries, expected {n}", context=str(path)
        )
    return vec
