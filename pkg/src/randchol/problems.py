"""Test matrices: constant and high-contrast variable-coefficient 3-D Poisson.

Cells of an ``n x n x n`` grid are numbered ``k * n**2 + j * n + i``.
Both generators use the unscaled 7-point stencil with Dirichlet boundaries.
"""

import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import gaussian_filter

from .models import GridSpec
from .sampling import make_rng
from .sparse import SparseSym

logger = logging.getLogger(__name__)


def poisson7(n: int) -> SparseSym:
    """Constant-coefficient 7-point Laplacian on ``n**3`` cells.

    Diagonal 6, ``-1`` between grid neighbors.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    t = sp.diags_array(
        [-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], offsets=[-1, 0, 1], shape=(n, n)
    )
    eye = sp.identity(n, format="csr")
    a = (
        sp.kron(sp.kron(t, eye), eye)
        + sp.kron(sp.kron(eye, t), eye)
        + sp.kron(sp.kron(eye, eye), t)
    )
    return SparseSym.from_scipy(sp.csc_array(a), check=False)


def contrast_field(spec: GridSpec) -> np.ndarray:
    """Two-valued coefficient field of a smoothed uniform random field.

    Draws a uniform value per cell, blurs it with a Gaussian of standard
    deviation ``spec.width`` cells truncated at ``spec.truncate`` deviations
    (edges renormalized by the blurred mask), and maps values at or below
    the median of the raw field to ``rho**-0.5`` and the rest to ``rho**0.5``.

    Returns:
        Flat array of length ``n**3`` in cell order.
    """
    n = spec.n
    raw = make_rng(spec.seed).random((n, n, n))
    mu = float(np.median(raw))
    kwargs = {"sigma": spec.width, "truncate": spec.truncate, "mode": "constant", "cval": 0.0}
    blurred = gaussian_filter(raw, **kwargs) / gaussian_filter(np.ones_like(raw), **kwargs)
    lo, hi = spec.contrast**-0.5, spec.contrast**0.5
    field = np.where(blurred <= mu, lo, hi)
    logger.debug("contrast field: %.1f%% high cells", 100.0 * float(np.mean(field == hi)))
    return field.ravel()


def _face(left: np.ndarray, right: np.ndarray, rule: str) -> np.ndarray:
    if rule == "harmonic":
        return 2.0 * left * right / (left + right)
    return 0.5 * (left + right)


def poisson_var(spec: GridSpec) -> SparseSym:
    """Variable-coefficient 7-point operator for ``-div(a grad u)``.

    Interior faces take the mean of the two cell coefficients (arithmetic or
    harmonic per ``spec.face_average``); a boundary face takes its cell's
    coefficient. Each face coefficient is computed once and used for both
    incident rows.
    """
    n = spec.n
    c = contrast_field(spec).reshape(n, n, n)
    idx = np.arange(n**3).reshape(n, n, n)
    diag = np.zeros((n, n, n))
    rows, cols, vals = [], [], []
    for axis in range(3):
        lead = [slice(None)] * 3
        trail = [slice(None)] * 3
        lead[axis] = slice(None, -1)
        trail[axis] = slice(1, None)
        face = _face(c[tuple(lead)], c[tuple(trail)], spec.face_average)
        rows.append(idx[tuple(lead)].ravel())
        cols.append(idx[tuple(trail)].ravel())
        vals.append(-face.ravel())
        diag[tuple(lead)] += face
        diag[tuple(trail)] += face
        first = [slice(None)] * 3
        last = [slice(None)] * 3
        first[axis] = 0
        last[axis] = -1
        diag[tuple(first)] += c[tuple(first)]
        diag[tuple(last)] += c[tuple(last)]
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    w = np.concatenate(vals)
    off = sp.csc_array((w, (i, j)), shape=(n**3, n**3))
    a = off + off.T + sp.diags_array(diag.ravel())
    return SparseSym.from_scipy(sp.csc_array(a), check=False)


def random_rhs(n: int, seed: int) -> np.ndarray:
    """Standard-uniform right-hand side."""
    return make_rng(seed, 1).random(n)


def write_field(field: np.ndarray, path: str | Path) -> None:
    """Write cell coefficients as raw little-endian float64."""
    np.asarray(field, dtype="<f8").tofile(Path(path))
