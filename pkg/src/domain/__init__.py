"""
Domain models for synchronous correlation sets.

These are the core data structures (correlation tensors, correlation
matrices, block-matrix tracial models, trace atoms and slice queries),
independent of the algorithms that produce them and of the file formats
that carry them. Every model is frozen; array fields are stored read-only.
"""

from __future__ import annotations

from enum import Enum
from itertools import combinations
from typing import Any, Iterator, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# ─── Errors ───────────────────────────────────────────────────────────────────


class CorrelationError(Exception):
    """Base class for every failure raised by the library.

    ``constraint`` names the violated condition so that reports and the CLI
    can point at it without parsing the message.
    """

    def __init__(self, message: str, constraint: str = "") -> None:
        super().__init__(message)
        self.constraint = constraint or type(self).__name__


class MalformedInputError(CorrelationError):
    """Shapes, sizes or file contents do not match the declared format."""


class UnsupportedError(CorrelationError):
    """The operation is not defined for the requested parameters."""


class InconsistencyError(CorrelationError):
    """Data that must agree (e.g. w_{x,y} and w_{y,x}) disagrees beyond tolerance."""


class InfeasibleMatrixError(CorrelationError):
    """A correlation matrix violates one of its defining inequalities."""


class PreconditionError(CorrelationError):
    """A hypothesis required by the operation does not hold."""


class ModelInvalidError(CorrelationError):
    """A tracial model fails its PVM conditions."""


class InfeasibleProgramError(CorrelationError):
    """No basic solution of a linear program is feasible."""

    def __init__(self, message: str, bases_checked: int, min_residual: float) -> None:
        super().__init__(message, constraint="lp-feasibility")
        self.bases_checked = bases_checked
        self.min_residual = min_residual


# ─── Enumerations ─────────────────────────────────────────────────────────────


class CorrelationClass(str, Enum):
    """Correlation classes with exact slice support."""

    LOC = "loc"
    Q = "q"


class Side(str, Enum):
    """Which support value of a slice is requested."""

    UPPER = "upper"
    LOWER = "lower"


class AtomKind(str, Enum):
    """Extreme traces on a direct sum of matrix blocks."""

    SCALAR = "scalar"
    M2 = "m2"


class DominanceStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NO_DATA = "no-data"


# ─── Helpers ──────────────────────────────────────────────────────────────────


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def pair_indices(n: int) -> list[tuple[int, int]]:
    """Pairs (i, j) with i < j in lexicographic order: (0,1), (0,2), ..., (n-2,n-1)."""
    return list(combinations(range(n), 2))


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


_ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ─── Correlations ─────────────────────────────────────────────────────────────


class CorrelationTensor(BaseModel):
    """Joint outcome probabilities p(i,j|x,y), stored with index order (x, y, i, j)."""

    model_config = _ARRAY_CONFIG

    n: int = Field(ge=1, description="Question count")
    m: int = Field(ge=1, description="Outcome count")
    p: np.ndarray

    @field_validator("p", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        try:
            return _frozen(np.array(v, dtype=float))
        except (TypeError, ValueError) as e:
            raise MalformedInputError(f"tensor entries are not numeric: {e}", "tensor-shape")

    @model_validator(mode="after")
    def _check_shape(self) -> "CorrelationTensor":
        expected = (self.n, self.n, self.m, self.m)
        if self.p.shape != expected:
            raise MalformedInputError(
                f"tensor shape {self.p.shape} does not match (n,n,m,m)={expected}",
                "tensor-shape",
            )
        return self

    def block(self, x: int, y: int) -> np.ndarray:
        """The m×m matrix p(·,·|x,y)."""
        return self.p[x, y]

    def to_payload(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "p": self.p.tolist()}


class Marginals(BaseModel):
    """One-party marginals p_A(i|x) and p_B(j|y)."""

    model_config = _ARRAY_CONFIG

    pA: np.ndarray
    pB: np.ndarray
    averaged: bool = Field(
        default=False,
        description="True when the tensor signals and the y-averaged marginals were used",
    )


class ClassReport(BaseModel):
    """Outcome of checking the defining constraints of C(n,m), C_ns and synchronicity."""

    is_correlation: bool
    is_nonsignaling: bool
    is_synchronous: bool
    max_violation: float
    residuals: dict[str, float] = Field(default_factory=dict)
    failed: list[str] = Field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.is_correlation and self.is_nonsignaling and self.is_synchronous


class CorrelationMatrix(BaseModel):
    """Symmetric matrix w with w_{x,y} = p(0,0|x,y); an element of D_r(n)."""

    model_config = _ARRAY_CONFIG

    n: int = Field(ge=1)
    w: np.ndarray
    asymmetry: float = Field(default=0.0, ge=0.0, description="Residual removed by symmetrizing")

    @field_validator("w", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        try:
            return _frozen(np.array(v, dtype=float))
        except (TypeError, ValueError) as e:
            raise MalformedInputError(f"matrix entries are not numeric: {e}", "matrix-shape")

    @model_validator(mode="after")
    def _check_shape(self) -> "CorrelationMatrix":
        if self.w.shape != (self.n, self.n):
            raise MalformedInputError(
                f"matrix shape {self.w.shape} does not match (n,n)=({self.n},{self.n})",
                "matrix-shape",
            )
        return self

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.w).copy()

    def upper(self) -> np.ndarray:
        """Off-diagonal entries w_{i,j}, i<j, in pair order."""
        return np.array([self.w[i, j] for i, j in pair_indices(self.n)])

    def to_payload(self) -> dict[str, Any]:
        return {"n": self.n, "w": self.w.tolist()}


class ProjectionReport(BaseModel):
    """Result of projecting an (nm,2) tensor onto (n,m): membership in F^s(n,m)."""

    in_f: bool
    tensor: Optional[CorrelationTensor] = None
    violated: list[str] = Field(default_factory=list)
    max_violation: float = 0.0
    report: Optional[ClassReport] = None


# ─── Tracial Models ───────────────────────────────────────────────────────────


class BlockAlgebra(BaseModel):
    """Direct sum of full matrix blocks M_{d_1} ⊕ ... ⊕ M_{d_k}."""

    model_config = ConfigDict(frozen=True)

    block_dims: tuple[int, ...]

    @field_validator("block_dims")
    @classmethod
    def _positive(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise MalformedInputError("a block algebra needs at least one block", "blocks")
        if any(d < 1 for d in v):
            raise MalformedInputError(f"block dimensions must be positive: {v}", "blocks")
        return v

    @model_validator(mode="after")
    def _cap(self) -> "BlockAlgebra":
        from src.config.settings import get_settings

        cap = get_settings().max_total_dim
        if self.total_dim > cap:
            raise MalformedInputError(
                f"total dimension {self.total_dim} exceeds the configured cap {cap}",
                "max-total-dim",
            )
        return self

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    @property
    def block_count(self) -> int:
        return len(self.block_dims)


class TracialState(BaseModel):
    """τ(X) = Σ_k λ_k · tr(X_k)/d_k."""

    model_config = ConfigDict(frozen=True)

    weights: tuple[float, ...]

    @field_validator("weights")
    @classmethod
    def _simplex(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v:
            raise MalformedInputError("a trace needs at least one weight", "trace-weights")
        if min(v) < -1e-12:
            raise MalformedInputError(f"trace weights must be nonnegative: {v}", "trace-weights")
        if abs(sum(v) - 1.0) > 1e-9:
            raise MalformedInputError(f"trace weights must sum to 1, got {sum(v)}", "trace-weights")
        return tuple(max(0.0, float(w)) for w in v)

    @property
    def faithful(self) -> bool:
        return all(w > 0.0 for w in self.weights)


class BlockOperator(BaseModel):
    """An element of a block algebra: one complex square matrix per block.

    ``hermitian`` and ``projection`` are measured at construction when not
    given; a flag asserted by the caller is checked against ``tol``.
    """

    model_config = _ARRAY_CONFIG

    blocks: tuple[np.ndarray, ...]
    hermitian: bool = False
    projection: bool = False

    @model_validator(mode="before")
    @classmethod
    def _measure(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        tol = data.pop("tol", 1e-10)
        try:
            blocks = tuple(_frozen(np.array(b, dtype=complex)) for b in data["blocks"])
        except (TypeError, ValueError) as e:
            raise MalformedInputError(f"operator blocks are not numeric: {e}", "operator")
        for b in blocks:
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise MalformedInputError(f"operator block of shape {b.shape}", "operator")
        herm_res = max((float(np.abs(b - b.conj().T).max(initial=0.0)) for b in blocks), default=0)
        proj_res = max((float(np.abs(b @ b - b).max(initial=0.0)) for b in blocks), default=0)
        is_herm = herm_res <= tol
        is_proj = is_herm and proj_res <= tol
        if data.get("hermitian") and not is_herm:
            raise ModelInvalidError(f"operator is not hermitian (residual {herm_res:.3e})")
        if data.get("projection") and not is_proj:
            raise ModelInvalidError(f"operator is not a projection (residual {proj_res:.3e})")
        return {**data, "blocks": blocks, "hermitian": is_herm, "projection": is_proj}

    # ── Construction ─────────────────────────────────────────────────

    @classmethod
    def identity(cls, dims: tuple[int, ...]) -> "BlockOperator":
        return cls(blocks=tuple(np.eye(d) for d in dims))

    @classmethod
    def zero(cls, dims: tuple[int, ...]) -> "BlockOperator":
        return cls(blocks=tuple(np.zeros((d, d)) for d in dims))

    # ── Algebra ──────────────────────────────────────────────────────

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    def _check_compatible(self, other: "BlockOperator") -> None:
        if self.dims != other.dims:
            raise MalformedInputError(
                f"block structures differ: {self.dims} vs {other.dims}", "block-structure"
            )

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_compatible(other)
        return BlockOperator(blocks=tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_compatible(other)
        return BlockOperator(blocks=tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_compatible(other)
        return BlockOperator(blocks=tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def scaled(self, factor: complex) -> "BlockOperator":
        return BlockOperator(blocks=tuple(factor * b for b in self.blocks))

    def adjoint(self) -> "BlockOperator":
        return BlockOperator(blocks=tuple(b.conj().T for b in self.blocks))

    def commutator(self, other: "BlockOperator") -> "BlockOperator":
        """[self, other] = self·other − other·self."""
        return self @ other - other @ self

    def norm(self) -> float:
        """Operator norm: largest singular value per block, maximum over blocks."""
        return max(
            (float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in self.blocks), default=0.0
        )


class TracialModel(BaseModel):
    """A block algebra, a trace on it, and one PVM {E_{x,i}} per question x."""

    model_config = ConfigDict(frozen=True)

    algebra: BlockAlgebra
    trace: TracialState
    pvms: tuple[tuple[BlockOperator, ...], ...]

    @model_validator(mode="after")
    def _consistent(self) -> "TracialModel":
        if len(self.trace.weights) != self.algebra.block_count:
            raise MalformedInputError(
                f"{len(self.trace.weights)} trace weights for "
                f"{self.algebra.block_count} blocks",
                "trace-weights",
            )
        if not self.pvms:
            raise MalformedInputError("a model needs at least one question", "pvms")
        m = len(self.pvms[0])
        for x, pvm in enumerate(self.pvms):
            if len(pvm) != m or m < 1:
                raise MalformedInputError(f"question {x} has {len(pvm)} outcomes, expected {m}")
            for op in pvm:
                if op.dims != self.algebra.block_dims:
                    raise MalformedInputError(
                        f"question {x}: operator blocks {op.dims} do not match "
                        f"algebra {self.algebra.block_dims}",
                        "block-structure",
                    )
        return self

    @property
    def n(self) -> int:
        return len(self.pvms)

    @property
    def m(self) -> int:
        return len(self.pvms[0])

    def projections(self) -> list[BlockOperator]:
        """Outcome-0 projections, one per question."""
        return [pvm[0] for pvm in self.pvms]


class OrthogonalityVerdict(BaseModel):
    """Measured residuals for trace orthogonality ⇒ operator orthogonality.

    ``constant`` is sqrt(max_k d_k/λ_k): for any X, ‖X‖ ≤ constant·sqrt(τ(X*X)).
    """

    hypothesis_met: bool
    max_trace_pairing: float
    max_product_norm: float
    normalization_hypothesis_met: bool
    trace_sum_residual: float
    sum_residual: Optional[float] = None
    constant: float
    bound_holds: bool


class ImprovingDirection(BaseModel):
    """H = i[B,A] and f′(0) = τ([B,A]*[B,A]) for f(t) = τ(A e^{iHt} B e^{−iHt})."""

    model_config = ConfigDict(frozen=True)

    H: BlockOperator
    derivative: float


class SampleSet(BaseModel):
    """Sampled points of D_q(n): diagonals y (K×n) and upper triangles w (K×n(n−1)/2)."""

    model_config = _ARRAY_CONFIG

    n: int = Field(ge=1)
    y: np.ndarray
    w: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "SampleSet":
        if self.y.ndim != 2 or self.y.shape[1] != self.n:
            raise MalformedInputError(f"diagonal block shape {self.y.shape}", "sample-shape")
        if self.w.shape != (self.y.shape[0], pair_count(self.n)):
            raise MalformedInputError(f"off-diagonal block shape {self.w.shape}", "sample-shape")
        return self

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def rows(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        return iter(zip(self.y, self.w))

    def extended(self, y: np.ndarray, w: np.ndarray) -> "SampleSet":
        """A new set with extra rows appended."""
        return SampleSet(
            n=self.n,
            y=np.vstack([self.y, np.atleast_2d(y)]),
            w=np.vstack([self.w, np.atleast_2d(w)]),
        )


# ─── Universal Algebra (three projections) ───────────────────────────────────


class Direction3(BaseModel):
    """Objective weights (a, b, c) = (x_{0,1}, x_{0,2}, x_{1,2})."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float

    @field_validator("a", "b", "c")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not np.isfinite(v):
            raise MalformedInputError(f"direction components must be finite, got {v}")
        return v

    @property
    def zero_components(self) -> tuple[str, ...]:
        return tuple(name for name in ("a", "b", "c") if getattr(self, name) == 0.0)

    @property
    def degenerate(self) -> bool:
        return bool(self.zero_components)


class DegenerateDirection(BaseModel):
    """Tag returned in place of a normalized direction when components vanish."""

    model_config = ConfigDict(frozen=True)

    zeros: tuple[str, ...]

    @property
    def all_zero(self) -> bool:
        return len(self.zeros) == 3


class TraceAtom(BaseModel):
    """An extreme trace seen through its projections.

    ``diag`` holds τ(P_i) and ``offdiag`` holds τ(P_iP_j) for i<j in pair order.
    """

    model_config = ConfigDict(frozen=True)

    diag: tuple[float, ...]
    offdiag: tuple[float, ...]
    kind: AtomKind
    label: str

    def to_payload(self) -> dict[str, Any]:
        return {
            "diag": list(self.diag),
            "offdiag": list(self.offdiag),
            "kind": self.kind.value,
            "label": self.label,
        }


class Universal3Rep(BaseModel):
    """The representation C^8 ⊕ M_2 for normalized direction (a, b, 1)."""

    model_config = _ARRAY_CONFIG

    a: float
    b: float
    t: float
    z: Optional[float] = None
    has_m2: bool
    atoms: tuple[TraceAtom, ...]
    matrices: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    z_sign: Optional[int] = Field(default=None, description="+1 or −1: the selected ± branch")
    branch_residuals: Optional[tuple[float, float]] = None
    double_root: bool = False

    def to_payload(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "t": self.t,
            "z": self.z,
            "has_m2": self.has_m2,
            "atoms": [atom.to_payload() for atom in self.atoms],
        }


class RepVerification(BaseModel):
    """Residuals of the projection and commutation relations on the M_2 block."""

    a: float
    b: float
    idempotent: tuple[float, float, float]
    hermitian: float
    relation_a: float = Field(description="‖[A, aB + bC]‖")
    relation_b: float = Field(description="‖[B, aA + C]‖")
    relation_c: float = Field(description="‖[C, bA + B]‖")
    dimension_bound: float = Field(description="max ‖[H, P]‖ for H=(aB+bC)²−(a+b)(aB+bC)")
    passed: bool

    @property
    def max_residual(self) -> float:
        return max(
            *self.idempotent,
            self.hermitian,
            self.relation_a,
            self.relation_b,
            self.relation_c,
            self.dimension_bound,
        )


class GridRow(BaseModel):
    """One verified grid point, with the data needed to tabulate the z-sign rule."""

    a: float
    b: float
    t: float
    z: float
    z_sign: int
    branch_residuals: tuple[float, float]
    exactly_one_branch: bool
    double_root: bool
    sign_a: int
    sign_q: int = Field(description="sign of a²(b²−1) + b²")
    max_residual: float
    passed: bool


# ─── Slices ───────────────────────────────────────────────────────────────────


class PairBounds(BaseModel):
    """Range of τ(PQ) given τ(P), τ(Q), with interval witnesses in L^∞[0,1]."""

    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    lower_witness: tuple[tuple[float, float], tuple[float, float]]
    upper_witness: tuple[tuple[float, float], tuple[float, float]]


class SliceQuery(BaseModel):
    """Support value request for the y-slice of D_cls(n) along direction x."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(default=3, ge=1)
    y: tuple[float, ...]
    x: tuple[float, ...]
    cls: CorrelationClass = CorrelationClass.Q
    side: Side = Side.UPPER

    @model_validator(mode="after")
    def _check(self) -> "SliceQuery":
        if len(self.y) != self.n:
            raise MalformedInputError(f"y has {len(self.y)} entries, expected {self.n}", "y")
        if len(self.x) != pair_count(self.n):
            raise MalformedInputError(
                f"x has {len(self.x)} entries, expected {pair_count(self.n)}", "x"
            )
        if any(not 0.0 <= v <= 1.0 for v in self.y):
            raise MalformedInputError(f"y entries must lie in [0,1]: {self.y}", "y-range")
        if not all(np.isfinite(self.x)):
            raise MalformedInputError(f"x entries must be finite: {self.x}", "x")
        return self

    def negated(self) -> "SliceQuery":
        """Same query with direction −x and the opposite side."""
        side = Side.LOWER if self.side == Side.UPPER else Side.UPPER
        return self.model_copy(update={"x": tuple(-v for v in self.x), "side": side})


class LPSolution(BaseModel):
    """Optimum of a linear program over atom weights."""

    model_config = ConfigDict(frozen=True)

    value: float
    weights: tuple[float, ...]
    support: tuple[int, ...]
    bases_checked: int


class SliceResult(BaseModel):
    """Optimal value, optimizing trace weights and a model realizing them."""

    model_config = ConfigDict(frozen=True)

    query: SliceQuery
    value: float
    weights: tuple[float, ...]
    atom_labels: tuple[str, ...]
    realizing_model: TracialModel
    achieved_w: tuple[float, ...]
    degenerate_path: bool
    max_residual: float = 0.0
    rep: Optional[Universal3Rep] = None


class DominanceEntry(BaseModel):
    query_id: int
    bound: float
    neighbors: int
    max_excess: Optional[float] = None
    status: DominanceStatus


class DominanceReport(BaseModel):
    """Per-query comparison of sampled D_q points against exact slice bounds."""

    delta: float
    tol: float
    entries: list[DominanceEntry] = Field(default_factory=list)

    @property
    def failures(self) -> list[DominanceEntry]:
        return [e for e in self.entries if e.status == DominanceStatus.FAIL]

    @property
    def covered(self) -> int:
        return sum(1 for e in self.entries if e.status != DominanceStatus.NO_DATA)

    @property
    def clean(self) -> bool:
        """No query is beaten and at least one query had data."""
        return not self.failures and self.covered > 0
