"""Saving and loading factors.

An archive is a directory holding ``meta.json``, ``G.mtx``, ``perm.txt``,
``ext_row.mtx`` for SDDM factors and optionally the factored matrix ``A.mtx``.
"""

import json
import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from pydantic import ValidationError

from .exceptions import MatrixFormatError
from .factor import CholFactor
from .io import (
    read_general,
    read_matrix_market,
    read_perm,
    write_lower,
    write_matrix_market,
    write_perm,
)
from .models import FactorMeta
from .sparse import LowerTri, SparseSym

logger = logging.getLogger(__name__)

META_FILE = "meta.json"
G_FILE = "G.mtx"
PERM_FILE = "perm.txt"
EXT_FILE = "ext_row.mtx"
MATRIX_FILE = "A.mtx"


def save_factor(
    f: CholFactor,
    path: str | Path,
    f32: bool = False,
    matrix: SparseSym | None = None,
) -> Path:
    """Write ``f`` to the directory ``path``.

    Args:
        f: Factor to save.
        path: Target directory, created if missing.
        f32: Round ``G`` and the extension row to 32-bit floats first.
        matrix: Matrix the factor was built from, stored alongside.

    Returns:
        Path: The archive directory.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    g = f.g.astype(np.float32) if f32 else f.g
    meta = f.meta.model_copy(update={"precision": "float32" if f32 else "float64"})
    write_lower(g.csc, root / G_FILE, comment="randchol factor G")
    write_perm(f.perm, root / PERM_FILE)
    if f.ext_row is not None:
        row = f.ext_row.astype(np.float32).astype(np.float64) if f32 else f.ext_row
        write_lower(sp.csr_array(row.reshape(1, -1)), root / EXT_FILE)
    if matrix is not None:
        write_matrix_market(matrix, root / MATRIX_FILE)
    doc = {"laplacian": f.laplacian, **meta.model_dump(mode="json")}
    (root / META_FILE).write_text(json.dumps(doc, indent=2))
    logger.info("saved factor to %s (%s)", root, meta.precision)
    return root


def load_factor(path: str | Path) -> CholFactor:
    """Load a factor written by :func:`save_factor`.

    Raises:
        MatrixFormatError: If the archive is incomplete or inconsistent.
    """
    root = Path(path)
    try:
        doc = json.loads((root / META_FILE).read_text())
        laplacian = bool(doc.pop("laplacian"))
        meta = FactorMeta.model_validate(doc)
    except (OSError, KeyError, json.JSONDecodeError, ValidationError) as e:
        raise MatrixFormatError(f"invalid factor metadata: {e}", context=str(root)) from e
    g = LowerTri.from_scipy(read_general(root / G_FILE))
    perm = read_perm(root / PERM_FILE)
    ext_row = None
    if (root / EXT_FILE).exists():
        ext_row = read_general(root / EXT_FILE).toarray().ravel()
    if g.n != meta.n or perm.n != meta.n:
        raise MatrixFormatError(
            f"archive sizes disagree: G {g.n}, perm {perm.n}, meta {meta.n}",
            context=str(root),
        )
    return CholFactor(perm, g, laplacian, meta, ext_row=ext_row)


def load_matrix(path: str | Path) -> SparseSym | None:
    """The matrix stored in an archive, if any."""
    target = Path(path) / MATRIX_FILE
    return read_matrix_market(target) if target.exists() else None
