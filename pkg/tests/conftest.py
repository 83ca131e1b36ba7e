"""Test fixtures and utilities."""

from collections.abc import Callable

import numpy as np
import pytest
import scipy.sparse as sp

from randchol.sparse import SparseSym, from_coo, laplacian_from_edges


def path_laplacian(n: int, weight: float = 1.0) -> SparseSym:
    """Laplacian of the unit-weight path 0 - 1 - ... - (n-1)."""
    return laplacian_from_edges(n, [(i, i + 1, weight) for i in range(n - 1)])


def random_connected_laplacian(n: int, seed: int, extra: int | None = None) -> SparseSym:
    """Random spanning tree plus ``extra`` random edges, weights in (0, 1]."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = []
    for pos in range(1, n):
        parent = order[rng.integers(pos)]
        edges.append((int(order[pos]), int(parent), float(1.0 - rng.random())))
    for _ in range(n if extra is None else extra):
        i, j = rng.choice(n, size=2, replace=False)
        edges.append((int(i), int(j), float(1.0 - rng.random())))
    return laplacian_from_edges(n, edges)


@pytest.fixture
def k2() -> SparseSym:
    """Two-vertex Laplacian [[1, -1], [-1, 1]]."""
    return from_coo([(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)], 2)


@pytest.fixture
def sddm2() -> SparseSym:
    """The 2 x 2 SDDM matrix [[2, -1], [-1, 2]]."""
    return from_coo([(0, 0, 2.0), (0, 1, -1.0), (1, 1, 2.0)], 2)


@pytest.fixture
def mixed2() -> SparseSym:
    """The 2 x 2 SDD matrix [[2, 1], [1, 2]] with a positive off-diagonal."""
    return from_coo([(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)], 2)


@pytest.fixture
def path7() -> SparseSym:
    """Path Laplacian on 7 vertices."""
    return path_laplacian(7)


@pytest.fixture
def star5() -> SparseSym:
    """Star Laplacian with leaves 0..3 and center 4."""
    return laplacian_from_edges(5, [(i, 4, 1.0) for i in range(4)])


@pytest.fixture
def make_path() -> Callable[..., SparseSym]:
    """Factory for path Laplacians."""
    return path_laplacian


@pytest.fixture
def make_graph() -> Callable[..., SparseSym]:
    """Factory for random connected Laplacians."""
    return random_connected_laplacian


def odd_cycle_sdd(n: int, seed: int, shift: float = 0.1) -> SparseSym:
    """Strictly dominant SDD matrix whose positive entries form a triangle.

    An odd cycle of positive entries keeps the doubled graph connected.
    """
    dense = random_connected_laplacian(n, seed).toarray()
    np.fill_diagonal(dense, 0.0)
    for i, j in ((0, 1), (1, 2), (0, 2)):
        dense[i, j] = dense[j, i] = abs(dense[i, j]) + 0.5
    np.fill_diagonal(dense, np.abs(dense).sum(axis=1) + shift)
    return SparseSym.from_scipy(sp.csc_array(dense))


def signable_sdd(n: int, seed: int, shift: float = 0.1) -> SparseSym:
    """SDD matrix ``D M D`` for an SDDM ``M`` and a random +-1 diagonal ``D``."""
    rng = np.random.default_rng(seed + 1000)
    dense = random_connected_laplacian(n, seed).toarray()
    dense[np.diag_indices(n)] += shift
    s = rng.choice([-1.0, 1.0], size=n)
    s[0], s[1] = 1.0, -1.0
    return SparseSym.from_scipy(sp.csc_array(dense * np.outer(s, s)))


@pytest.fixture
def make_odd_cycle_sdd() -> Callable[..., SparseSym]:
    """Factory for SDD matrices that need the doubled solve."""
    return odd_cycle_sdd


@pytest.fixture
def make_signable_sdd() -> Callable[..., SparseSym]:
    """Factory for SDD matrices the sign-flip reduction handles."""
    return signable_sdd
