"""Tests for sequential randomized Cholesky."""

import numpy as np
import pytest

from randchol.exceptions import (
    ClassificationError,
    DimensionMismatchError,
    FactorizationError,
)
from randchol.factor import (
    FINAL_PIVOT_RTOL,
    ElimGraph,
    eliminate,
    rchol_laplacian,
    rchol_sddm,
    schur_edge_count,
)
from randchol.krylov import factor_preconditioner, pcg
from randchol.models import OrderingSpec
from randchol.problems import poisson7
from randchol.sampling import make_rng
from randchol.sparse import Perm, diag, laplacian_from_edges


def _ggt(f) -> np.ndarray:
    g = f.g.csc.toarray()
    return g @ g.T


class TestElimGraph:
    """Test the elimination graph."""

    def test_from_laplacian(self, make_path):
        """Test edges and degrees of a path."""
        g = ElimGraph.from_laplacian(make_path(4))

        assert g.num_edges == 3
        assert g.adj[1] == {0: 1.0, 2: 1.0}
        assert g.deg[0] == 1.0
        g.check()

    def test_rejects_positive_offdiag(self, mixed2):
        """Test that positive off-diagonals are refused."""
        with pytest.raises(ClassificationError):
            ElimGraph.from_laplacian(mixed2)

    def test_merge_existing_pair(self):
        """Test that inserting an existing pair sums the weights."""
        g = ElimGraph()
        g.add_edges(np.array([0]), np.array([1]), np.array([1.0]))
        g.add_edges(np.array([1]), np.array([0]), np.array([0.5]))

        assert g.num_edges == 1
        assert g.merged == 1
        assert g.adj[0][1] == 1.5
        assert g.deg[1] == 1.5
        g.check()

    def test_cancellation_drops_edge(self):
        """Test that a merged weight cancelling to zero is dropped."""
        g = ElimGraph()
        g.add_edges(np.array([0]), np.array([1]), np.array([1.0]))
        g.add_edges(np.array([0]), np.array([1]), np.array([-1.0]))

        assert g.num_edges == 0
        assert g.dropped == 1
        assert 1 not in g.adj[0]

    def test_pop_star(self, make_path):
        """Test removing a vertex returns its sorted star."""
        g = ElimGraph.from_laplacian(make_path(4))
        ids, w = g.pop_star(1)

        np.testing.assert_array_equal(ids, [0, 2])
        np.testing.assert_array_equal(w, [1.0, 1.0])
        assert 1 not in g.alive
        assert g.deg[0] == 0.0
        assert g.num_edges == 1

    def test_eliminate_column(self, make_path):
        """Test the emitted column and sampled edge of an interior vertex."""
        g = ElimGraph.from_laplacian(make_path(3))
        columns = {}
        sampled = eliminate(g, 1, make_rng(0), columns)
        rows, vals = columns[1]

        np.testing.assert_array_equal(rows, [1, 0, 2])
        np.testing.assert_allclose(vals, [np.sqrt(2.0), -1 / np.sqrt(2.0), -1 / np.sqrt(2.0)])
        assert len(sampled) == 1
        assert sampled.w[0] == pytest.approx(0.5)

    def test_eliminate_isolated_vertex(self):
        """Test that an isolated vertex before the last step is an error."""
        g = ElimGraph()
        g.add_vertices([0, 1])

        with pytest.raises(FactorizationError, match="no neighbors"):
            eliminate(g, 0, make_rng(0), {})


class TestSchurEdgeCount:
    """Test the elimination edge ledger."""

    def test_initial(self, make_path):
        """Test the count before any step."""
        assert schur_edge_count(ElimGraph.from_laplacian(make_path(4))) == 3

    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_one_step_anywhere(self, make_path, k):
        """Test a single elimination removes exactly one edge."""
        g = ElimGraph.from_laplacian(make_path(4))
        g.insert(eliminate(g, k, make_rng(k), {}))

        assert schur_edge_count(g) == 2

    @pytest.mark.parametrize("seed", range(20))
    def test_decrement_every_step(self, make_graph, seed):
        """Test M - k edges remain after k steps, every step."""
        lap = make_graph(20 + 7 * seed, seed, extra=2 * (20 + 7 * seed))
        m = ElimGraph.from_laplacian(lap).num_edges
        counts = []

        def record(k, graph):
            counts.append((k, schur_edge_count(graph)))
            graph.check()

        rchol_laplacian(lap, Perm.identity(lap.n), seed, on_step=record)

        assert counts
        assert all(c == m - k for k, c in counts)


class TestRcholLaplacian:
    """Test rchol_laplacian."""

    def test_k2(self, k2):
        """Test the single-step case."""
        f = rchol_laplacian(k2, Perm.identity(2), 0)

        np.testing.assert_array_equal(f.g.csc.toarray(), [[1.0, 0.0], [-1.0, 0.0]])
        np.testing.assert_array_equal(_ggt(f), k2.toarray())
        assert f.laplacian
        assert f.meta.kind == "laplacian"

    @pytest.mark.parametrize("seed", [0, 1, 99])
    def test_path_exact(self, make_path, seed):
        """Test that natural-order elimination of a path is exact."""
        lap = make_path(100)
        f = rchol_laplacian(lap, Perm.identity(100), seed)
        err = np.linalg.norm(_ggt(f) - lap.toarray())

        assert err <= 1e-12 * np.linalg.norm(lap.toarray())

    @pytest.mark.parametrize("seed", range(5))
    def test_star_breakdown_free(self, seed):
        """Test a 4-vertex star factors with positive pivots and a zero final diagonal."""
        lap = laplacian_from_edges(4, [(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)])
        f = rchol_laplacian(lap, Perm.from_order([3, 0, 1, 2]), seed)
        d = f.g.diagonal()

        assert np.all(d[:3] > 0.0)
        assert d[3] == 0.0
        assert abs(f.meta.final_pivot) <= FINAL_PIVOT_RTOL * f.meta.max_diag

    def test_breakdown_free_random_graphs(self, make_graph):
        """Test 100 random connected graphs factor without breakdown."""
        rng = np.random.default_rng(11)
        for trial in range(100):
            n = int(rng.integers(2, 500))
            lap = make_graph(n, trial)
            order = Perm.from_order(rng.permutation(n))
            f = rchol_laplacian(lap, order, trial)

            assert np.all(f.g.diagonal()[:-1] > 0.0)
            assert abs(f.meta.final_pivot) <= FINAL_PIVOT_RTOL * f.meta.max_diag

    def test_column_sums_vanish(self, make_graph):
        """Test every column of a Laplacian factor sums to zero."""
        lap = make_graph(200, 3)
        f = rchol_laplacian(lap, Perm.identity(200), 3)
        g = f.g.csc
        sums = np.asarray(g.sum(axis=0)).ravel()
        norms = np.sqrt(np.asarray(g.multiply(g).sum(axis=0)).ravel())

        assert np.all(np.abs(sums) <= 1e-10 * np.maximum(norms, 1.0))

    def test_deterministic(self, make_graph):
        """Test identical inputs give identical factors."""
        lap = make_graph(150, 4)
        p = Perm.from_order(np.random.default_rng(4).permutation(150))
        a = rchol_laplacian(lap, p, 17)
        b = rchol_laplacian(lap, p, 17)

        np.testing.assert_array_equal(a.g.col_ptr, b.g.col_ptr)
        np.testing.assert_array_equal(a.g.row_idx, b.g.row_idx)
        np.testing.assert_array_equal(a.g.values, b.g.values)

    def test_lower_triangular_under_permutation(self, make_graph):
        """Test a permuted factor is still lower triangular."""
        lap = make_graph(80, 5)
        p = Perm.from_order(np.random.default_rng(5).permutation(80))
        f = rchol_laplacian(lap, p, 0)
        g = f.g.csc.tocoo()

        assert np.all(g.row >= g.col)

    def test_rejects_reducible(self):
        """Test the irreducibility precondition."""
        lap = laplacian_from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])

        with pytest.raises(ClassificationError):
            rchol_laplacian(lap, Perm.identity(4), 0)
        with pytest.raises(FactorizationError):
            rchol_laplacian(lap, Perm.identity(4), 0, check=False)

    def test_rejects_sddm(self, sddm2):
        """Test that a non-Laplacian is refused."""
        with pytest.raises(ClassificationError):
            rchol_laplacian(sddm2, Perm.identity(2), 0)

    def test_perm_size(self, k2):
        """Test permutation size checking."""
        with pytest.raises(DimensionMismatchError):
            rchol_laplacian(k2, Perm.identity(3), 0)

    def test_meta(self, make_path):
        """Test factor bookkeeping."""
        lap = make_path(10)
        f = rchol_laplacian(lap, Perm.identity(10), 42)

        assert f.meta.seed == 42
        assert f.meta.n == 10
        assert f.meta.nnz_g == f.g.nnz
        assert f.meta.nnz_a == lap.nnz
        assert f.fill == 2 * f.g.nnz
        assert f.solve_block().n == 9

    def _martingale(self, seeds: int) -> None:
        lap = laplacian_from_edges(
            5,
            [(0, 1, 1.0), (0, 2, 0.5), (0, 3, 2.0), (1, 2, 1.5), (2, 4, 1.0), (3, 4, 0.25)],
        )
        p = Perm.identity(5)
        total = np.zeros((5, 5))
        total_sq = np.zeros((5, 5))
        for seed in range(seeds):
            sample = _ggt(rchol_laplacian(lap, p, seed, check=False))
            total += sample
            total_sq += sample * sample
        mean = total / seeds
        stderr = np.sqrt(np.maximum(total_sq / seeds - mean**2, 0.0) / seeds)

        exact = lap.toarray()
        assert np.all(np.abs(mean - exact) <= 4.0 * stderr + 1e-9 * np.abs(exact) + 1e-12)

    def test_unbiased_small(self):
        """Test E[G G^T] = L on a 5-vertex graph with a few thousand seeds."""
        self._martingale(4000)

    @pytest.mark.slow
    def test_unbiased(self):
        """Test E[G G^T] = L on a 5-vertex graph with 10^5 seeds."""
        self._martingale(100_000)


class TestRcholSddm:
    """Test rchol_sddm."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_two_by_two(self, sddm2, seed):
        """Test the bordered K3 factor preconditions a 2 x 2 solve."""
        f = rchol_sddm(sddm2, OrderingSpec(kind="natural"), seed)
        b = np.random.default_rng(seed).random(2)
        x, stats = pcg(sddm2, b, factor_preconditioner(f), tol=1e-10)

        assert not f.laplacian
        assert f.ext_row is not None and f.ext_row.size == 2
        assert np.all(f.g.diagonal() > 0.0)
        assert stats.converged
        assert stats.iterations <= 3
        np.testing.assert_allclose(sddm2.toarray() @ x, b, rtol=1e-9)

    def test_reducible_diagonal(self):
        """Test a reducible SDDM matrix factors and solves in two iterations."""
        a = diag([1.0, 2.0])
        f = rchol_sddm(a, OrderingSpec(), 0)
        _, stats = pcg(a, np.array([1.0, 1.0]), factor_preconditioner(f), tol=1e-10)

        np.testing.assert_allclose(_ggt(f), np.diag([1.0, 2.0]))
        assert stats.converged
        assert stats.iterations <= 2

    def test_meta(self):
        """Test the SDDM bookkeeping."""
        a = poisson7(4)
        f = rchol_sddm(a, OrderingSpec(kind="nd", levels=2), 3)

        assert f.meta.kind == "sddm"
        assert f.meta.n == 64
        assert f.meta.ordering == "nd2"
        assert f.meta.nd_levels == 2
        assert f.meta.nnz_a == a.nnz

    def test_fill_counts_extension_row(self):
        """Test the extension row is part of the SDDM fill."""
        a = poisson7(4)
        f = rchol_sddm(a, OrderingSpec(), 0)
        ext = int(np.count_nonzero(f.ext_row))

        # every boundary cell keeps its edge to the extension vertex
        assert ext >= 4**3 - 2**3
        assert f.meta.nnz_g == f.g.nnz + ext
        assert f.fill == 2 * f.meta.nnz_g

    def test_rejects_laplacian(self, k2):
        """Test the SDDM precondition."""
        with pytest.raises(ClassificationError):
            rchol_sddm(k2, OrderingSpec(), 0)

    def test_poisson_fill_small(self):
        """Test the fill ratio on a small Poisson grid."""
        f = rchol_sddm(poisson7(8), OrderingSpec(), 0)

        assert 1.0 <= f.meta.fill_ratio <= 4.5

    @pytest.mark.slow
    def test_poisson_fill(self):
        """Test the fill ratio on a 32^3 Poisson grid with minimum degree."""
        f = rchol_sddm(poisson7(32), OrderingSpec(), 0)

        assert 2.5 <= f.meta.fill_ratio <= 4.5
