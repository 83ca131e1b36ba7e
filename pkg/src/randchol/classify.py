"""Matrix classification and the Laplacian embeddings of SDD systems."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ClassificationError
from .models import MatrixClass, MatrixKind, Scenario
from .sparse import SparseSym, connected_components

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12


def _row_stats(a: SparseSym) -> tuple[np.ndarray, np.ndarray, np.ndarray, sp.csc_array]:
    d = a.diagonal()
    off = a.offdiag()
    absoff = np.asarray(abs(off).sum(axis=0)).ravel()
    signed = np.asarray(off.sum(axis=0)).ravel()
    return d, absoff, signed, off


def classify(a: SparseSym, tol: float = DEFAULT_TOL) -> MatrixClass:
    """Classify a symmetric matrix.

    Row tests compare the diagonal with the absolute off-diagonal sum using
    the tolerance ``tol * sum_j |a_ij|`` per row.

    A nonpositive off-diagonal matrix that is not exactly dominant counts as
    SDDM only when every connected component holds a strictly dominant row;
    otherwise it is singular and reported as not SDD with the rows of the
    offending components.

    Args:
        a: Symmetric input.
        tol: Relative row tolerance.

    Returns:
        MatrixClass: kind, irreducibility and dominance scenario.
    """
    d, absoff, _, off = _row_stats(a)
    slack = tol * (np.abs(d) + absoff)
    labels = connected_components(a)
    ncomp = int(labels.max()) + 1 if labels.size else 0
    positive = int(np.count_nonzero(off.data > 0.0))
    violating = np.flatnonzero((d < 0.0) | (d < absoff - slack))
    common = {
        "n": a.n,
        "nnz": a.nnz,
        "irreducible": ncomp == 1,
        "components": ncomp,
        "positive_offdiag": positive,
    }
    if violating.size:
        return MatrixClass(
            kind=MatrixKind.NOT_SDD,
            scenario=Scenario.NOT_APPLICABLE,
            violating_rows=violating[:100].tolist(),
            **common,
        )
    exact_rows = np.abs(d - absoff) <= slack
    exact = bool(np.all(exact_rows))
    scenario = Scenario.S1 if exact else Scenario.S2
    if positive:
        kind = MatrixKind.SDD_MIXED
    elif exact:
        kind = MatrixKind.LAPLACIAN
    else:
        # Positive definite only if every component has a strictly dominant row.
        strict = np.bincount(labels, weights=(~exact_rows).astype(np.float64), minlength=ncomp)
        singular = np.flatnonzero(np.isin(labels, np.flatnonzero(strict == 0)))
        if singular.size:
            logger.info(
                "%d of %d components have no strictly dominant row",
                int(np.count_nonzero(strict == 0)),
                ncomp,
            )
            return MatrixClass(
                kind=MatrixKind.NOT_SDD,
                scenario=Scenario.NOT_APPLICABLE,
                violating_rows=singular[:100].tolist(),
                **common,
            )
        kind = MatrixKind.SDDM
    return MatrixClass(kind=kind, scenario=scenario, **common)


def compensate_diagonal(a: SparseSym) -> SparseSym:
    """Raise each diagonal to at least the absolute off-diagonal row sum."""
    d, absoff, _, off = _row_stats(a)
    raised = np.maximum(d, absoff)
    changed = int(np.count_nonzero(raised > d))
    if changed:
        logger.info("compensated %d diagonal entries", changed)
    return SparseSym.from_scipy(off + sp.diags_array(raised), check=False)


def drop_small_positives(a: SparseSym, threshold: float) -> SparseSym:
    """Drop positive off-diagonals ``a_ij <= threshold * min(a_ii, a_jj)``."""
    d = a.diagonal()
    coo = a.csc.tocoo()
    scale = np.minimum(d[coo.row], d[coo.col])
    drop = (coo.row != coo.col) & (coo.data > 0.0) & (coo.data <= threshold * scale)
    if drop.any():
        logger.info("dropped %d small positive off-diagonals", int(drop.sum()))
    keep = ~drop
    mat = sp.csc_array(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=a.shape
    )
    return SparseSym.from_scipy(mat, check=False)


def _require(a: SparseSym, kind: MatrixKind, op: str, tol: float) -> MatrixClass:
    cls = classify(a, tol)
    if cls.kind != kind:
        raise ClassificationError(
            f"expected {kind.value} input, got {cls.kind.value}",
            context=op,
            details=cls.model_dump(mode="json"),
        )
    return cls


def extend_sddm(a: SparseSym, tol: float = DEFAULT_TOL) -> SparseSym:
    """Border an SDDM matrix into an irreducible Laplacian of size ``n + 1``.

    The extra row and column hold ``-A 1`` and the corner ``1^T A 1``. Row
    sums within the classification tolerance are treated as exact zeros and
    leave no border entry.

    Raises:
        ClassificationError: If ``a`` is not SDDM.
    """
    _require(a, MatrixKind.SDDM, "extend_sddm", tol)
    d, absoff, signed, _ = _row_stats(a)
    rowsum = d + signed
    rowsum[np.abs(rowsum) <= tol * (np.abs(d) + absoff)] = 0.0
    border = sp.csc_array(-rowsum.reshape(-1, 1))
    corner = sp.csc_array(np.array([[rowsum.sum()]]))
    ext = sp.block_array([[a.csc, border], [border.T, corner]], format="csc")
    return SparseSym.from_scipy(ext, check=False)


@dataclass(frozen=True, eq=False)
class SplitParts:
    """Diagonal, negative and positive off-diagonal parts of a matrix."""

    ad: SparseSym
    an: SparseSym
    ap: SparseSym


def split_parts(a: SparseSym) -> SplitParts:
    """Partition ``a`` entrywise by position and sign."""
    coo = a.csc.tocoo()
    on = coo.row == coo.col

    def part(mask: np.ndarray) -> SparseSym:
        mat = sp.csc_array(
            (coo.data[mask], (coo.row[mask], coo.col[mask])), shape=a.shape
        )
        return SparseSym.from_scipy(mat, check=False)

    return SplitParts(
        ad=part(on),
        an=part(~on & (coo.data < 0.0)),
        ap=part(~on & (coo.data > 0.0)),
    )


def double_sdd(a: SparseSym, tol: float = DEFAULT_TOL) -> SparseSym:
    """Embed an SDD matrix with positive off-diagonals in a ``2n`` system.

    Returns ``[[Ad + An, -Ap], [-Ap, Ad + An]]``, which has only nonpositive
    off-diagonals: a Laplacian when every row of ``a`` is exactly dominant,
    SDDM otherwise.

    Raises:
        ClassificationError: If ``a`` is not sdd-mixed.
    """
    _require(a, MatrixKind.SDD_MIXED, "double_sdd", tol)
    parts = split_parts(a)
    m = parts.ad.csc + parts.an.csc
    neg = -parts.ap.csc
    return SparseSym.from_scipy(sp.block_array([[m, neg], [neg, m]], format="csc"), check=False)


@dataclass(frozen=True, eq=False)
class SignFlip:
    """Result of a successful sign-flip reduction.

    ``matrix`` equals ``D A D`` where ``D`` is diagonal with ``-1`` on
    ``flipped`` and ``+1`` elsewhere.
    """

    matrix: SparseSym
    flipped: np.ndarray

    def signs(self) -> np.ndarray:
        s = np.ones(self.matrix.n)
        s[self.flipped] = -1.0
        return s


def sign_flip_reduction(a: SparseSym, tol: float = DEFAULT_TOL) -> SignFlip | None:
    """Try to turn ``a`` into an equivalent system with nonpositive off-diagonals.

    The doubled graph of ``a`` (see :func:`double_sdd`) splits into exactly two
    components when the positive entries admit a consistent ±1 signing. The
    indices whose copy ``i + n`` lies in the component of index 0 are flipped.

    Returns:
        SignFlip, or ``None`` when the doubled graph does not split in two.

    Raises:
        ClassificationError: If ``a`` is not sdd-mixed.
    """
    _require(a, MatrixKind.SDD_MIXED, "sign_flip_reduction", tol)
    n = a.n
    parts = split_parts(a)
    pat_n = abs(parts.an.csc)
    pat_p = abs(parts.ap.csc)
    doubled = SparseSym.from_scipy(
        sp.block_array([[pat_n, pat_p], [pat_p, pat_n]], format="csc"), check=False
    )
    labels = connected_components(doubled)
    if int(labels.max()) + 1 != 2:
        return None
    home = labels[0]
    flipped = np.flatnonzero(labels[n:] == home)
    s = np.ones(n)
    s[flipped] = -1.0
    dmat = sp.diags_array(s)
    flipped_matrix = SparseSym.from_scipy(dmat @ a.csc @ dmat, check=False)
    logger.debug("sign-flip reduction flips %d of %d indices", flipped.size, n)
    return SignFlip(flipped_matrix, flipped)
