"""Tests for solver configuration."""

import pytest

from randchol.config import SEED_ENV, default_seed, load_options
from randchol.exceptions import ConfigError
from randchol.models import OrderingKind


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


class TestDefaultSeed:
    """Test the seed environment variable."""

    def test_unset(self):
        """Test the fallback."""
        assert default_seed() == 0

    def test_set(self, monkeypatch):
        """Test a valid value."""
        monkeypatch.setenv(SEED_ENV, "42")

        assert default_seed() == 42

    @pytest.mark.parametrize("raw", ["abc", "-1", "1.5"])
    def test_invalid(self, monkeypatch, raw):
        """Test values that are not nonnegative integers."""
        monkeypatch.setenv(SEED_ENV, raw)

        with pytest.raises(ConfigError):
            default_seed()


class TestLoadOptions:
    """Test load_options."""

    def test_defaults(self):
        """Test no file and no overrides."""
        opts = load_options()

        assert opts.seed == 0
        assert opts.tol == 1e-10
        assert opts.ordering.kind == OrderingKind.MINDEG

    def test_yaml_file(self, tmp_path):
        """Test values from a YAML file."""
        path = tmp_path / "opts.yaml"
        path.write_text("tol: 1.0e-6\nseed: 3\nordering:\n  kind: nd\n  levels: 2\n")
        opts = load_options(path)

        assert opts.tol == 1e-6
        assert opts.seed == 3
        assert opts.ordering.kind == OrderingKind.ND
        assert opts.ordering.levels == 2

    def test_overrides_win(self, tmp_path):
        """Test overrides beat the file and None overrides are ignored."""
        path = tmp_path / "opts.yaml"
        path.write_text("seed: 3\nmaxit: 10\nordering:\n  kind: nd\n  levels: 2\n")
        opts = load_options(path, seed=5, maxit=None, ordering={"kind": None, "levels": 3})

        assert opts.seed == 5
        assert opts.maxit == 10
        assert opts.ordering.kind == OrderingKind.ND
        assert opts.ordering.levels == 3

    def test_env_seed(self, monkeypatch):
        """Test the environment seed fills a missing seed."""
        monkeypatch.setenv(SEED_ENV, "7")

        assert load_options().seed == 7

    def test_file_seed_beats_env(self, monkeypatch, tmp_path):
        """Test an explicit file seed is kept."""
        monkeypatch.setenv(SEED_ENV, "7")
        path = tmp_path / "opts.yaml"
        path.write_text("seed: 1\n")

        assert load_options(path).seed == 1

    def test_empty_file(self, tmp_path):
        """Test an empty YAML file gives the defaults."""
        path = tmp_path / "opts.yaml"
        path.write_text("")

        assert load_options(path).maxit == 2500

    def test_missing_file(self, tmp_path):
        """Test an unreadable file."""
        with pytest.raises(ConfigError, match="cannot read"):
            load_options(tmp_path / "missing.yaml")

    def test_not_a_mapping(self, tmp_path):
        """Test a YAML list."""
        path = tmp_path / "opts.yaml"
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigError, match="mapping"):
            load_options(path)

    def test_invalid_value(self, tmp_path):
        """Test a value that fails validation."""
        path = tmp_path / "opts.yaml"
        path.write_text("tol: -1.0\n")

        with pytest.raises(ConfigError, match="invalid"):
            load_options(path)
