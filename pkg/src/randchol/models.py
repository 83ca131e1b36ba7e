"""Pydantic models for solver configuration, classification and results."""

from enum import Enum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, field_serializer, model_validator


class MatrixKind(str, Enum):
    """Class of a symmetric input matrix."""

    LAPLACIAN = "laplacian"
    SDDM = "sddm"
    SDD_MIXED = "sdd-mixed"
    NOT_SDD = "not-sdd"


class Scenario(str, Enum):
    """Dominance scenario of an SDD matrix.

    ``S1`` means every row is exactly dominant (diagonal equals the absolute
    off-diagonal sum); ``S2`` means at least one row is strictly dominant.
    """

    S1 = "S1"
    S2 = "S2"
    NOT_APPLICABLE = "n/a"


class MatrixClass(BaseModel):
    """Classification report for a symmetric matrix."""

    kind: MatrixKind = Field(..., description="Matrix class")
    irreducible: bool = Field(..., description="Whether the sparsity graph is connected")
    scenario: Scenario = Field(..., description="Dominance scenario")
    n: int = Field(..., ge=0, description="Dimension")
    nnz: int = Field(..., ge=0, description="Stored nonzeros, both triangles")
    components: int = Field(..., ge=0, description="Number of connected components")
    positive_offdiag: int = Field(
        default=0, ge=0, description="Count of positive off-diagonal entries"
    )
    violating_rows: list[int] = Field(
        default_factory=list,
        description=(
            "0-based rows whose diagonal is below the off-diagonal sum, or the rows"
            " of a singular component"
        ),
    )

    @model_validator(mode="after")
    def check_consistency(self) -> "MatrixClass":
        """Validate the kind/scenario pairing."""
        if self.kind == MatrixKind.LAPLACIAN and self.scenario != Scenario.S1:
            raise ValueError("a Laplacian is exactly dominant in every row")
        if self.kind == MatrixKind.SDD_MIXED and self.positive_offdiag == 0:
            raise ValueError("sdd-mixed requires a positive off-diagonal")
        return self


class OrderingKind(str, Enum):
    """Fill-reducing ordering strategies."""

    NATURAL = "natural"
    RANDOM = "random"
    MINDEG = "mindeg"
    ND = "nd"


class OrderingSpec(BaseModel):
    """Which ordering to compute before factorization."""

    kind: OrderingKind = Field(default=OrderingKind.MINDEG, description="Strategy")
    levels: int = Field(default=1, ge=1, description="Nested-dissection levels")
    seed: int = Field(default=0, ge=0, description="Seed for the random ordering")
    balance: float = Field(
        default=0.6, gt=0.5, le=1.0, description="Max side ratio of a bisection"
    )
    perm_file: Path | None = Field(
        default=None, description="External 1-based permutation file, overrides kind"
    )

    @field_serializer("perm_file", when_used="json")
    def serialize_path(self, value: Path | None) -> str | None:
        """Serialize paths as strings."""
        return str(value) if value is not None else None

    def label(self) -> str:
        """Short human-readable name used in reports."""
        if self.perm_file is not None:
            return "file"
        if self.kind == OrderingKind.ND:
            return f"nd{self.levels}"
        return self.kind.value


class GridSpec(BaseModel):
    """Parameters of a 3-D variable-coefficient Poisson problem."""

    n: int = Field(..., ge=1, description="Grid points per dimension")
    contrast: float = Field(default=1.0, ge=1.0, description="Contrast ratio rho")
    seed: int = Field(default=0, ge=0, description="Seed of the random field")
    width: float = Field(
        default=4.0, gt=0.0, description="Blur standard deviation in grid spacings"
    )
    truncate: float = Field(
        default=3.0, gt=0.0, description="Blur truncation radius in standard deviations"
    )
    face_average: Literal["arithmetic", "harmonic"] = Field(
        default="arithmetic", description="Face coefficient rule"
    )

    @property
    def h(self) -> float:
        """Grid spacing of the unit cube."""
        return 1.0 / (self.n + 1)


class SolverOptions(BaseModel):
    """Tunables of the end-to-end SDD solve."""

    tol: float = Field(default=1e-10, gt=0.0, description="Relative residual target")
    maxit: int = Field(default=2500, ge=1, description="PCG iteration cap")
    seed: int = Field(default=0, ge=0, description="Sampling seed")
    ordering: OrderingSpec = Field(
        default_factory=OrderingSpec, description="Ordering before factorization"
    )
    threads: int = Field(default=1, ge=1, description="Parallel factorization workers")
    backend: Literal["process", "thread"] = Field(
        default="process", description="Executor used when threads > 1"
    )
    pin_cores: bool = Field(
        default=False, description="Restrict process workers to the first cores"
    )
    classify_tol: float = Field(
        default=1e-12, ge=0.0, description="Relative row-sum tolerance"
    )
    compensate: bool = Field(
        default=False, description="Raise diagonals to the absolute off-diagonal sum"
    )
    drop_positive: float | None = Field(
        default=None,
        ge=0.0,
        description="Drop positive off-diagonals below this fraction of the diagonal",
    )
    stagnation_window: int = Field(
        default=50, ge=1, description="Iterations without progress before stopping"
    )
    stagnation_rtol: float = Field(
        default=1e-3, gt=0.0, description="Relative improvement counted as progress"
    )


class FactorMeta(BaseModel):
    """Bookkeeping attached to a randomized Cholesky factor."""

    n: int = Field(..., ge=0, description="Dimension of the factored matrix")
    kind: Literal["laplacian", "sddm"] = Field(
        default="laplacian", description="Matrix class that was factored"
    )
    seed: int | None = Field(default=None, description="Sampling seed, if integral")
    ordering: str = Field(default="natural", description="Ordering label")
    nd_levels: int | None = Field(default=None, description="ND levels, if any")
    nnz_g: int = Field(
        default=0, ge=0, description="Nonzeros in G, including the extension row"
    )
    nnz_a: int = Field(default=0, ge=0, description="Nonzeros in the input")
    dropped_edges: int = Field(default=0, ge=0, description="Edges dropped as tiny")
    final_pivot: float = Field(
        default=0.0, description="Residual diagonal of the last eliminated vertex"
    )
    max_diag: float = Field(default=0.0, description="Largest input diagonal")
    t_p: float = Field(default=0.0, ge=0.0, description="Ordering time in seconds")
    t_f: float = Field(default=0.0, ge=0.0, description="Factorization time in seconds")
    t_leaf: float | None = Field(default=None, description="Slowest leaf task time")
    t_separator: float | None = Field(default=None, description="Separator task time")
    workers: int = Field(default=1, ge=1, description="Workers used")
    precision: Literal["float64", "float32"] = Field(
        default="float64", description="Storage precision of G"
    )

    @property
    def fill_ratio(self) -> float:
        """Twice the nonzeros of G over the nonzeros of the input."""
        return 2.0 * self.nnz_g / self.nnz_a if self.nnz_a else 0.0


class SolveStats(BaseModel):
    """Outcome of a (preconditioned) conjugate gradient solve."""

    iterations: int = Field(default=0, ge=0, description="PCG iterations")
    residuals: list[float] = Field(
        default_factory=list, description="Relative residual history"
    )
    res: float = Field(default=0.0, description="Recomputed final relative residual")
    converged: bool = Field(default=False, description="Whether tol was reached")
    stagnated: bool = Field(default=False, description="Whether PCG stopped early")
    fill_ratio: float = Field(default=0.0, description="2*nnz(G)/nnz(A)")
    t_p: float = Field(default=0.0, description="Ordering time in seconds")
    t_f: float = Field(default=0.0, description="Factorization time in seconds")
    t_s: float = Field(default=0.0, description="Solve time in seconds")
    path: str = Field(default="", description="Solver path taken")
    ordering: str = Field(default="", description="Ordering of the factor used")
    workers: int = Field(default=1, ge=1, description="Workers that built the factor")


class SolveReport(BaseModel):
    """JSON document printed by ``randchol solve``."""

    n: int
    nnz: int
    fill_ratio: float
    t_p: float
    t_f: float
    t_s: float
    n_it: int
    res: float
    converged: bool
    seed: int
    ordering: str
    threads: int
    path: str = ""


class BenchRow(BaseModel):
    """One configuration of a benchmark sweep."""

    sweep: str = Field(..., description="Sweep name")
    label: str = Field(..., description="Configuration label")
    n: int
    nnz: int
    fill_ratio: float
    t_p: float
    t_f: float
    t_s: float
    n_it: int
    res: float
    converged: bool
    seed: int
    threads: int = 1
    t_leaf: float | None = None
    t_separator: float | None = None
    n_it_cg: int | None = None
