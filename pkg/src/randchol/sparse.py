"""Symmetric sparse storage, permutations and the basic kernels.

Matrices are kept in compressed-column layout with both triangles stored
explicitly. The arrays are exposed directly; a scipy view is built lazily for
the kernels that delegate to scipy.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.linalg import spsolve_triangular

from .exceptions import DimensionMismatchError, MatrixFormatError, ZeroPivotError

SYMMETRY_RTOL = 1e-12


def _csc_arrays(mat: sp.sparray | sp.spmatrix) -> tuple[np.ndarray, ...]:
    csc = sp.csc_array(mat)
    csc.sum_duplicates()
    csc.eliminate_zeros()
    csc.sort_indices()
    return (
        csc.indptr.astype(np.int64),
        csc.indices.astype(np.int64),
        csc.data.astype(np.float64),
    )


def _cint_csr(mat: sp.sparray) -> sp.csr_array:
    # SuperLU backed triangular solves take C int indices only.
    csr = sp.csr_array(mat)
    return sp.csr_array(
        (csr.data, csr.indices.astype(np.intc), csr.indptr.astype(np.intc)),
        shape=csr.shape,
    )


@dataclass(frozen=True, eq=False)
class SparseSym:
    """Immutable symmetric sparse matrix with both triangles stored."""

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    @classmethod
    def from_scipy(cls, mat: sp.sparray | sp.spmatrix, check: bool = True) -> "SparseSym":
        """Wrap a scipy sparse matrix.

        Args:
            mat: Square sparse matrix holding both triangles.
            check: Verify numerical symmetry.

        Raises:
            MatrixFormatError: If the matrix is not square or not symmetric.
        """
        rows, cols = mat.shape
        if rows != cols:
            raise MatrixFormatError(f"matrix is {rows}x{cols}, expected square")
        col_ptr, row_idx, values = _csc_arrays(mat)
        out = cls(rows, col_ptr, row_idx, values)
        if check:
            csc = out.csc
            scale = float(np.max(np.abs(values))) if values.size else 0.0
            diff = csc - csc.T
            if diff.nnz and float(np.max(np.abs(diff.data))) > SYMMETRY_RTOL * scale:
                raise MatrixFormatError("matrix is not symmetric", context="from_scipy")
            if (csc != csc.T).nnz:
                # symmetric within tolerance but not bit-wise: average the two
                return cls.from_scipy((csc + csc.T) * 0.5, check=False)
        return out

    @cached_property
    def csc(self) -> sp.csc_array:
        """scipy view sharing the stored arrays."""
        return sp.csc_array(
            (self.values, self.row_idx, self.col_ptr), shape=(self.n, self.n)
        )

    @property
    def nnz(self) -> int:
        """Stored entries, both triangles counted."""
        return int(self.values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.csc.diagonal(), dtype=np.float64)

    def offdiag(self) -> sp.csc_array:
        """Off-diagonal part as a scipy matrix."""
        coo = self.csc.tocoo()
        mask = coo.row != coo.col
        return sp.csc_array(
            (coo.data[mask], (coo.row[mask], coo.col[mask])), shape=self.shape
        )

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column ``j``."""
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[lo:hi], self.values[lo:hi]

    def toarray(self) -> np.ndarray:
        return np.asarray(self.csc.toarray())

    def submatrix(self, index: np.ndarray) -> "SparseSym":
        """Principal submatrix on ``index`` (in the given order)."""
        index = np.asarray(index, dtype=np.int64)
        return SparseSym.from_scipy(self.csc[index, :][:, index], check=False)


@dataclass(frozen=True, eq=False)
class LowerTri:
    """Lower-triangular factor in compressed-column layout."""

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        cols = np.repeat(np.arange(self.n), np.diff(self.col_ptr))
        if np.any(self.row_idx < cols):
            raise MatrixFormatError("entry above the diagonal", context="LowerTri")

    @classmethod
    def from_scipy(cls, mat: sp.sparray | sp.spmatrix) -> "LowerTri":
        rows, cols = mat.shape
        if rows != cols:
            raise MatrixFormatError(f"factor is {rows}x{cols}, expected square")
        col_ptr, row_idx, values = _csc_arrays(mat)
        return cls(rows, col_ptr, row_idx, values)

    @cached_property
    def csc(self) -> sp.csc_array:
        return sp.csc_array(
            (self.values, self.row_idx, self.col_ptr), shape=(self.n, self.n)
        )

    @cached_property
    def _csr(self) -> sp.csr_array:
        return _cint_csr(self.csc)

    @cached_property
    def _csr_t(self) -> sp.csr_array:
        return _cint_csr(self.csc.T)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.csc.diagonal(), dtype=np.float64)

    def leading(self, m: int) -> "LowerTri":
        """Leading ``m`` x ``m`` block."""
        return LowerTri.from_scipy(self.csc[:m, :m])

    def astype(self, dtype: type) -> "LowerTri":
        """Copy with values rounded through ``dtype`` and stored as float64."""
        vals = self.values.astype(dtype).astype(np.float64)
        return LowerTri(self.n, self.col_ptr.copy(), self.row_idx.copy(), vals)


@dataclass(frozen=True, eq=False)
class Perm:
    """Symmetric permutation: ``forward[old] = new``, ``inverse[new] = old``."""

    forward: np.ndarray
    inverse: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n = self.forward.size
        if self.inverse.size != n:
            raise MatrixFormatError("forward and inverse differ in length")
        if not np.array_equal(np.sort(self.inverse), np.arange(n)):
            raise MatrixFormatError("permutation is not a bijection")
        if not np.array_equal(self.forward[self.inverse], np.arange(n)):
            raise MatrixFormatError("forward and inverse do not compose to identity")

    @classmethod
    def from_order(cls, order: Sequence[int] | np.ndarray) -> "Perm":
        """Build from an elimination order (``order[new] = old``)."""
        inverse = np.asarray(order, dtype=np.int64)
        forward = np.empty_like(inverse)
        if not np.array_equal(np.sort(inverse), np.arange(inverse.size)):
            raise MatrixFormatError("order is not a permutation")
        forward[inverse] = np.arange(inverse.size)
        return cls(forward, inverse)

    @classmethod
    def identity(cls, n: int) -> "Perm":
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, idx.copy())

    @property
    def n(self) -> int:
        return int(self.forward.size)

    def invert(self) -> "Perm":
        return Perm(self.inverse.copy(), self.forward.copy())

    def append(self, extra: int = 1) -> "Perm":
        """Extend with ``extra`` trailing indices kept in place."""
        n = self.n
        tail = np.arange(n, n + extra, dtype=np.int64)
        return Perm.from_order(np.concatenate([self.inverse, tail]))


def from_coo(
    triples: Iterable[tuple[int, int, float]], n: int, index_base: int = 0
) -> SparseSym:
    """Assemble a symmetric matrix from (row, col, value) triples.

    Duplicates are summed. An off-diagonal entry given in one triangle only is
    mirrored; entries given in both triangles must agree.

    Args:
        triples: Entries; indices use ``index_base``.
        n: Dimension.
        index_base: 0 for internal indices, 1 for file-style indices.

    Raises:
        MatrixFormatError: For out-of-range indices or conflicting triangles.
    """
    data = list(triples)
    rows = np.array([t[0] for t in data], dtype=np.int64) - index_base
    cols = np.array([t[1] for t in data], dtype=np.int64) - index_base
    vals = np.array([t[2] for t in data], dtype=np.float64)
    return from_arrays(rows, cols, vals, n)


def from_arrays(
    rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n: int
) -> SparseSym:
    """Array form of :func:`from_coo` with 0-based indices."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
        raise MatrixFormatError(
            f"index out of range for dimension {n}", context="from_coo"
        )

    def summed(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> sp.csr_array:
        mat = sp.csr_array((v, (r, c)), shape=(n, n))
        mat.sum_duplicates()
        return mat

    upper = rows < cols
    lower = rows > cols
    diag = rows == cols
    u = summed(rows[upper], cols[upper], vals[upper])
    lt = summed(cols[lower], rows[lower], vals[lower])
    u_pat = summed(rows[upper], cols[upper], np.ones(int(upper.sum())))
    l_pat = summed(cols[lower], rows[lower], np.ones(int(lower.sum())))
    both = u_pat.multiply(l_pat)
    both.data[:] = 1.0

    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    conflict = (u - lt).multiply(both)
    if conflict.nnz and float(np.max(np.abs(conflict.data))) > SYMMETRY_RTOL * scale:
        raise MatrixFormatError(
            "both triangles supplied with unequal values", context="from_coo"
        )
    tri = u + lt - u.multiply(both)
    d = summed(rows[diag], cols[diag], vals[diag])
    full = tri + tri.T + d
    return SparseSym.from_scipy(full, check=False)


def identity(n: int) -> SparseSym:
    return SparseSym.from_scipy(sp.identity(n, format="csc"), check=False)


def diag(values: Sequence[float] | np.ndarray) -> SparseSym:
    return SparseSym.from_scipy(sp.diags_array(np.asarray(values, float)), check=False)


def laplacian_from_edges(
    n: int, edges: Iterable[tuple[int, int, float]]
) -> SparseSym:
    """Graph Laplacian of weighted undirected edges (0-based, weights > 0)."""
    e = list(edges)
    i = np.array([t[0] for t in e], dtype=np.int64)
    j = np.array([t[1] for t in e], dtype=np.int64)
    w = np.array([t[2] for t in e], dtype=np.float64)
    adj = sp.csr_array((w, (i, j)), shape=(n, n))
    adj = adj + adj.T
    lap = sp.diags_array(np.asarray(adj.sum(axis=1)).ravel()) - adj
    return SparseSym.from_scipy(lap, check=False)


def matvec(a: SparseSym, x: np.ndarray) -> np.ndarray:
    """Return ``A @ x``.

    Raises:
        DimensionMismatchError: If ``len(x) != n``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != a.n:
        raise DimensionMismatchError(
            f"vector of length {x.shape[0]} for matrix of size {a.n}", context="matvec"
        )
    return np.asarray(a.csc @ x)


def permute_sym(a: SparseSym, p: Perm) -> SparseSym:
    """Return ``P^T A P``: entry (i, j) is ``A(inverse[i], inverse[j])``.

    Raises:
        DimensionMismatchError: If the permutation size differs from ``n``.
    """
    if p.n != a.n:
        raise DimensionMismatchError(
            f"permutation of size {p.n} for matrix of size {a.n}", context="permute_sym"
        )
    return SparseSym.from_scipy(a.csc[p.inverse, :][:, p.inverse], check=False)


def _check_pivots(g: LowerTri, op: str) -> None:
    d = g.diagonal()
    bad = np.flatnonzero(~(d > 0.0))
    if bad.size:
        raise ZeroPivotError(
            f"nonpositive diagonal in column {int(bad[0])}",
            context=op,
            details={"columns": bad[:10].tolist()},
        )


def solve_lower(g: LowerTri, b: np.ndarray) -> np.ndarray:
    """Solve ``G x = b`` by forward substitution.

    Raises:
        DimensionMismatchError: If ``len(b) != n``.
        ZeroPivotError: If any diagonal of ``G`` is zero or negative.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != g.n:
        raise DimensionMismatchError(
            f"right-hand side of length {b.shape[0]} for factor of size {g.n}",
            context="solve_lower",
        )
    if g.n == 0:
        return b.copy()
    _check_pivots(g, "solve_lower")
    return np.asarray(spsolve_triangular(g._csr, b, lower=True))


def solve_upper(g: LowerTri, b: np.ndarray) -> np.ndarray:
    """Solve ``G^T x = b`` by backward substitution.

    Raises:
        DimensionMismatchError: If ``len(b) != n``.
        ZeroPivotError: If any diagonal of ``G`` is zero or negative.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != g.n:
        raise DimensionMismatchError(
            f"right-hand side of length {b.shape[0]} for factor of size {g.n}",
            context="solve_upper",
        )
    if g.n == 0:
        return b.copy()
    _check_pivots(g, "solve_upper")
    return np.asarray(spsolve_triangular(g._csr_t, b, lower=False))


def connected_components(a: SparseSym) -> np.ndarray:
    """Component label per index, numbered 0.. in order of first occurrence.

    Only the off-diagonal pattern counts; an index with no off-diagonal
    entries is its own component.
    """
    if a.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, raw = _cc(a.offdiag(), directed=False)
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    return relabel[raw].astype(np.int64)
