"""Tests for factor archives."""

import json

import numpy as np
import pytest

from randchol.archive import META_FILE, load_factor, load_matrix, save_factor
from randchol.exceptions import MatrixFormatError
from randchol.factor import rchol_laplacian, rchol_sddm
from randchol.krylov import apply_factor
from randchol.models import OrderingSpec
from randchol.problems import poisson7, random_rhs
from randchol.sparse import Perm


@pytest.fixture
def sddm_factor():
    """Randomized factor of a 4^3 Poisson matrix."""
    return rchol_sddm(poisson7(4), OrderingSpec(kind="nd", levels=2), 1)


class TestSaveLoad:
    """Test archive round trips."""

    def test_sddm_round_trip(self, sddm_factor, tmp_path):
        """Test a reloaded SDDM factor preconditions identically."""
        save_factor(sddm_factor, tmp_path / "f")
        back = load_factor(tmp_path / "f")
        r = random_rhs(64, 0)

        assert not back.laplacian
        np.testing.assert_array_equal(back.perm.inverse, sddm_factor.perm.inverse)
        np.testing.assert_array_equal(back.g.values, sddm_factor.g.values)
        np.testing.assert_array_equal(back.ext_row, sddm_factor.ext_row)
        np.testing.assert_allclose(
            apply_factor(back, r), apply_factor(sddm_factor, r), rtol=1e-14
        )
        assert back.meta.ordering == "nd2"

    def test_laplacian_round_trip(self, make_graph, tmp_path):
        """Test a Laplacian factor keeps its empty last column."""
        lap = make_graph(60, 2)
        f = rchol_laplacian(lap, Perm.identity(60), 0)
        save_factor(f, tmp_path / "f")
        back = load_factor(tmp_path / "f")

        assert back.laplacian
        assert back.ext_row is None
        assert back.n == 60
        np.testing.assert_array_equal(back.g.col_ptr, f.g.col_ptr)

    def test_f32(self, sddm_factor, tmp_path):
        """Test 32-bit storage rounds G and records the precision."""
        save_factor(sddm_factor, tmp_path / "f", f32=True)
        back = load_factor(tmp_path / "f")
        expected = sddm_factor.g.values.astype(np.float32).astype(np.float64)

        np.testing.assert_array_equal(back.g.values, expected)
        assert back.meta.precision == "float32"

    def test_matrix_stored(self, sddm_factor, tmp_path):
        """Test the factored matrix travels with the archive."""
        save_factor(sddm_factor, tmp_path / "f", matrix=poisson7(4))

        np.testing.assert_array_equal(
            load_matrix(tmp_path / "f").toarray(), poisson7(4).toarray()
        )

    def test_no_matrix(self, sddm_factor, tmp_path):
        """Test load_matrix without a stored matrix."""
        save_factor(sddm_factor, tmp_path / "f")

        assert load_matrix(tmp_path / "f") is None


class TestLoadErrors:
    """Test broken archives."""

    def test_missing_meta(self, tmp_path):
        """Test an empty directory."""
        with pytest.raises(MatrixFormatError, match="metadata"):
            load_factor(tmp_path)

    def test_invalid_meta(self, sddm_factor, tmp_path):
        """Test metadata that fails validation."""
        root = save_factor(sddm_factor, tmp_path / "f")
        (root / META_FILE).write_text(json.dumps({"laplacian": False, "n": -1}))

        with pytest.raises(MatrixFormatError):
            load_factor(root)

    def test_size_disagreement(self, sddm_factor, tmp_path):
        """Test metadata that does not match G."""
        root = save_factor(sddm_factor, tmp_path / "f")
        doc = json.loads((root / META_FILE).read_text())
        doc["n"] = 10
        (root / META_FILE).write_text(json.dumps(doc))

        with pytest.raises(MatrixFormatError, match="disagree"):
            load_factor(root)
