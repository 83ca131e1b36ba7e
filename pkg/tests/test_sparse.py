"""Tests for symmetric sparse storage and kernels."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from randchol.exceptions import DimensionMismatchError, MatrixFormatError, ZeroPivotError
from randchol.sparse import (
    LowerTri,
    Perm,
    SparseSym,
    connected_components,
    diag,
    from_coo,
    identity,
    laplacian_from_edges,
    matvec,
    permute_sym,
    solve_lower,
    solve_upper,
)


def _random_sym(n: int, seed: int) -> SparseSym:
    rng = np.random.default_rng(seed)
    m = sp.random_array((n, n), density=0.3, random_state=rng, format="csc")
    return SparseSym.from_scipy(m + m.T + sp.identity(n, format="csc"))


class TestFromCoo:
    """Test assembling matrices from triples."""

    def test_mirror_one_triangle(self):
        """Test that a single triangle is mirrored."""
        a = from_coo([(1, 1, 2.0), (1, 2, -1.0), (2, 2, 2.0)], 2, index_base=1)

        np.testing.assert_array_equal(a.toarray(), [[2.0, -1.0], [-1.0, 2.0]])

    def test_duplicates_summed(self):
        """Test duplicate summation when both triangles are given."""
        a = from_coo(
            [(1, 2, -0.5), (1, 2, -0.5), (2, 1, -1.0), (1, 1, 1.0), (2, 2, 1.0)],
            2,
            index_base=1,
        )

        np.testing.assert_array_equal(a.toarray(), [[1.0, -1.0], [-1.0, 1.0]])

    def test_index_out_of_range(self):
        """Test bounds checking."""
        with pytest.raises(MatrixFormatError, match="out of range"):
            from_coo([(1, 3, 1.0)], 2, index_base=1)

    def test_conflicting_triangles(self):
        """Test that unequal mirrored values are rejected."""
        with pytest.raises(MatrixFormatError, match="unequal"):
            from_coo([(0, 1, -1.0), (1, 0, -2.0)], 2)

    def test_invariants(self):
        """Test sorted indices and no stored zeros."""
        a = from_coo([(0, 1, 1.0), (0, 1, -1.0), (0, 0, 3.0), (1, 1, 3.0)], 2)

        assert a.nnz == 2
        for j in range(a.n):
            rows, _ = a.column(j)
            assert np.all(np.diff(rows) > 0)


class TestSparseSym:
    """Test SparseSym construction and accessors."""

    def test_asymmetric_rejected(self):
        """Test that asymmetric scipy input is rejected."""
        with pytest.raises(MatrixFormatError, match="not symmetric"):
            SparseSym.from_scipy(sp.csc_array(np.array([[1.0, 2.0], [0.0, 1.0]])))

    def test_nonsquare_rejected(self):
        """Test that rectangular input is rejected."""
        with pytest.raises(MatrixFormatError, match="square"):
            SparseSym.from_scipy(sp.csc_array(np.ones((2, 3))))

    def test_offdiag_and_diagonal(self, sddm2):
        """Test the diagonal and off-diagonal views."""
        np.testing.assert_array_equal(sddm2.diagonal(), [2.0, 2.0])
        np.testing.assert_array_equal(sddm2.offdiag().toarray(), [[0.0, -1.0], [-1.0, 0.0]])

    def test_submatrix(self, path7):
        """Test principal submatrix extraction."""
        sub = path7.submatrix(np.array([0, 1]))

        np.testing.assert_array_equal(sub.toarray(), [[1.0, -1.0], [-1.0, 2.0]])


class TestMatvec:
    """Test matrix-vector products."""

    def test_identity(self):
        """Test identity times a vector."""
        np.testing.assert_array_equal(matvec(identity(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_small(self, sddm2):
        """Test a 2 x 2 product."""
        np.testing.assert_array_equal(matvec(sddm2, [1.0, 1.0]), [1.0, 1.0])

    def test_laplacian_null_vector(self, make_path):
        """Test that ones is in a Laplacian's null space."""
        np.testing.assert_array_equal(matvec(make_path(3), np.ones(3)), np.zeros(3))

    def test_dimension_mismatch(self, sddm2):
        """Test length checking."""
        with pytest.raises(DimensionMismatchError):
            matvec(sddm2, np.ones(3))

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(min_value=1, max_value=40), seed=st.integers(0, 2**16))
    def test_symmetry(self, n, seed):
        """Test x^T (A y) == y^T (A x)."""
        a = _random_sym(n, seed)
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        lhs, rhs = x @ matvec(a, y), y @ matvec(a, x)

        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestPerm:
    """Test permutations."""

    def test_from_order(self):
        """Test forward and inverse maps."""
        p = Perm.from_order([2, 0, 1])

        np.testing.assert_array_equal(p.inverse, [2, 0, 1])
        np.testing.assert_array_equal(p.forward, [1, 2, 0])

    def test_invalid_order(self):
        """Test that non-permutations are rejected."""
        with pytest.raises(MatrixFormatError):
            Perm.from_order([0, 0, 1])

    def test_append(self):
        """Test extending with trailing fixed indices."""
        p = Perm.from_order([1, 0]).append(1)

        np.testing.assert_array_equal(p.inverse, [1, 0, 2])


class TestPermuteSym:
    """Test symmetric permutation."""

    def test_identity_perm(self, sddm2):
        """Test that the identity permutation changes nothing."""
        out = permute_sym(sddm2, Perm.identity(2))

        np.testing.assert_array_equal(out.toarray(), sddm2.toarray())

    def test_swap(self):
        """Test swapping a diagonal matrix."""
        out = permute_sym(diag([1.0, 2.0]), Perm.from_order([1, 0]))

        np.testing.assert_array_equal(out.toarray(), np.diag([2.0, 1.0]))

    def test_path_reversal(self, make_path):
        """Test that reversing a path gives the same matrix."""
        lap = make_path(3)
        out = permute_sym(lap, Perm.from_order([2, 1, 0]))

        np.testing.assert_array_equal(out.toarray(), lap.toarray())

    def test_dimension_mismatch(self, sddm2):
        """Test size checking."""
        with pytest.raises(DimensionMismatchError):
            permute_sym(sddm2, Perm.identity(3))

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(min_value=1, max_value=30), seed=st.integers(0, 2**16))
    def test_round_trip(self, n, seed):
        """Test that permuting back restores the matrix exactly."""
        a = _random_sym(n, seed)
        p = Perm.from_order(np.random.default_rng(seed).permutation(n))
        back = permute_sym(permute_sym(a, p), p.invert())

        np.testing.assert_array_equal(back.col_ptr, a.col_ptr)
        np.testing.assert_array_equal(back.row_idx, a.row_idx)
        np.testing.assert_array_equal(back.values, a.values)


class TestTriangularSolves:
    """Test forward and backward substitution."""

    def test_lower(self):
        """Test a 2 x 2 forward solve."""
        g = LowerTri.from_scipy(sp.csc_array(np.array([[2.0, 0.0], [1.0, 1.0]])))

        np.testing.assert_allclose(solve_lower(g, [2.0, 2.0]), [1.0, 1.0])

    def test_upper(self):
        """Test a 2 x 2 backward solve with G^T."""
        g = LowerTri.from_scipy(sp.csc_array(np.array([[2.0, 0.0], [1.0, 1.0]])))

        # G^T = [[2, 1], [0, 1]]
        np.testing.assert_allclose(solve_upper(g, [3.0, 1.0]), [1.0, 1.0])

    def test_solve_operands_use_c_int_indices(self):
        """Test wide stored indices are narrowed for the triangular solver."""
        g = LowerTri.from_scipy(sp.csc_array(np.array([[2.0, 0.0], [1.0, 1.0]])))

        assert g.col_ptr.dtype == np.int64
        for csr in (g._csr, g._csr_t):
            assert csr.indices.dtype == np.intc
            assert csr.indptr.dtype == np.intc
        np.testing.assert_allclose(solve_lower(g, [2.0, 2.0]), [1.0, 1.0])
        np.testing.assert_allclose(solve_upper(g, [3.0, 1.0]), [1.0, 1.0])

    def test_identity(self):
        """Test solving with the identity."""
        g = LowerTri.from_scipy(sp.identity(3, format="csc"))
        b = np.array([1.0, -2.0, 3.0])

        np.testing.assert_array_equal(solve_lower(g, b), b)

    def test_zero_pivot(self):
        """Test that a zero diagonal is reported."""
        g = LowerTri.from_scipy(sp.csc_array(np.array([[1.0, 0.0], [0.0, 0.0]])))

        with pytest.raises(ZeroPivotError) as excinfo:
            solve_lower(g, [1.0, 1.0])
        assert excinfo.value.details == {"columns": [1]}
        with pytest.raises(ZeroPivotError):
            solve_upper(g, [1.0, 1.0])

    def test_entry_above_diagonal_rejected(self):
        """Test LowerTri validation."""
        with pytest.raises(MatrixFormatError):
            LowerTri.from_scipy(sp.csc_array(np.array([[1.0, 1.0], [0.0, 1.0]])))

    def test_dimension_mismatch(self):
        """Test length checking."""
        g = LowerTri.from_scipy(sp.identity(2, format="csc"))

        with pytest.raises(DimensionMismatchError):
            solve_lower(g, np.ones(3))

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(min_value=1, max_value=200), seed=st.integers(0, 2**16))
    def test_reconstructs_rhs(self, n, seed):
        """Test G (solve_lower(G, b)) == b on well-conditioned factors."""
        rng = np.random.default_rng(seed)
        low = sp.tril(sp.random_array((n, n), density=0.05, random_state=rng), k=-1)
        g = LowerTri.from_scipy(low * 0.1 + sp.diags_array(1.0 + rng.random(n)))
        b = rng.standard_normal(n)
        x = solve_lower(g, b)

        np.testing.assert_allclose(g.csc @ x, b, rtol=1e-10, atol=1e-10 * np.linalg.norm(b))


class TestConnectedComponents:
    """Test component labelling."""

    def test_two_blocks(self):
        """Test two disjoint edges."""
        a = laplacian_from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])

        np.testing.assert_array_equal(connected_components(a), [0, 0, 1, 1])

    def test_path(self, make_path):
        """Test a connected path."""
        np.testing.assert_array_equal(connected_components(make_path(4)), [0, 0, 0, 0])

    def test_diagonal(self):
        """Test that isolated indices are their own components."""
        np.testing.assert_array_equal(connected_components(diag([1.0, 1.0])), [0, 1])

    def test_first_occurrence_numbering(self):
        """Test labels follow the first index of each component."""
        a = laplacian_from_edges(4, [(0, 3, 1.0), (1, 2, 1.0)])

        np.testing.assert_array_equal(connected_components(a), [0, 1, 1, 0])
