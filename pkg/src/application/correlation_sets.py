"""
Correlation sets: class validation, the affine bijection C_r(n,2) ↔ D_r(n),
and the outcome embedding/projection between C^s(n,m) and C^s(nm,2).

Questions and outcomes are paired row-major: (x, i) ↦ x·m + i.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Optional

import numpy as np

from src.config.settings import get_settings
from src.domain import (
    ClassReport,
    CorrelationMatrix,
    CorrelationTensor,
    InconsistencyError,
    InfeasibleMatrixError,
    Marginals,
    MalformedInputError,
    PreconditionError,
    ProjectionReport,
    UnsupportedError,
)

logger = logging.getLogger(__name__)


def _tol(tol: Optional[float]) -> float:
    return get_settings().validation_tol if tol is None else tol


# ─── Validation ───────────────────────────────────────────────────────────────


def constraint_residuals(p: np.ndarray) -> dict[str, float]:
    """
    Largest residual of each constraint family for a tensor indexed (x, y, i, j).

    Families: ``nonnegativity``, ``normalization``, ``nonsignaling`` (both parties)
    and ``synchronous`` (p(i,j|x,x) = 0 for i ≠ j).
    """
    n, m = p.shape[0], p.shape[2]
    sums = p.sum(axis=(2, 3))
    row = p.sum(axis=3)  # p_A(i|x,y), indexed (x, y, i)
    col = p.sum(axis=2)  # p_B(j|x,y), indexed (x, y, j)
    diag_blocks = p[np.arange(n), np.arange(n)]
    off = diag_blocks * (1.0 - np.eye(m))
    return {
        "nonnegativity": float(max(0.0, -p.min())),
        "normalization": float(np.abs(sums - 1.0).max()),
        "nonsignaling": float(
            max(np.ptp(row, axis=1).max(initial=0.0), np.ptp(col, axis=0).max(initial=0.0))
        ),
        "synchronous": float(np.abs(off).max(initial=0.0)),
    }


def validate(t: CorrelationTensor, tol: Optional[float] = None) -> ClassReport:
    """
    Check membership of ``t`` in C(n,m), C_ns(n,m) and the synchronous subset.

    Each flag is set iff its constraint families hold within ``tol``;
    ``max_violation`` is the largest residual over all families.
    """
    tol = _tol(tol)
    if t.p.shape != (t.n, t.n, t.m, t.m):
        raise MalformedInputError(f"tensor shape {t.p.shape} for n={t.n}, m={t.m}", "tensor-shape")

    residuals = constraint_residuals(t.p)
    failed = [name for name, value in residuals.items() if value > tol]
    report = ClassReport(
        is_correlation=residuals["nonnegativity"] <= tol and residuals["normalization"] <= tol,
        is_nonsignaling=residuals["nonsignaling"] <= tol,
        is_synchronous=residuals["synchronous"] <= tol,
        max_violation=max(residuals.values()),
        residuals=residuals,
        failed=failed,
    )
    logger.debug(
        "Tensor validated",
        extra={"n": t.n, "m": t.m, "failed": failed, "max_violation": report.max_violation},
    )
    return report


def marginals(t: CorrelationTensor, tol: Optional[float] = None) -> Marginals:
    """
    One-party marginals p_A(i|x) = Σ_j p(i,j|x,0) and p_B(j|y) = Σ_i p(i,j|0,y).

    For a signaling tensor the marginals are averaged over the other party's
    question and ``averaged`` is set.
    """
    tol = _tol(tol)
    residual = constraint_residuals(t.p)["nonsignaling"]
    if residual <= tol:
        pA = t.p[:, 0].sum(axis=2)
        pB = t.p[0, :].sum(axis=1)
        return Marginals(pA=pA, pB=pB)

    logger.warning("Tensor signals; using averaged marginals", extra={"residual": residual})
    pA = t.p.sum(axis=3).mean(axis=1)
    pB = t.p.sum(axis=2).mean(axis=0)
    return Marginals(pA=pA, pB=pB, averaged=True)


# ─── C_r(n,2) ↔ D_r(n) ────────────────────────────────────────────────────────


def restrict(t: CorrelationTensor, tol: Optional[float] = None) -> CorrelationMatrix:
    """
    The restriction π(p)(x,y) = p(0,0|x,y), symmetrized.

    Raises:
        UnsupportedError: If m ≠ 2.
        PreconditionError: If t is not synchronous and non-signaling.
        InconsistencyError: If w_{x,y} and w_{y,x} differ beyond tolerance.
    """
    tol = _tol(tol)
    if t.m != 2:
        raise UnsupportedError(f"restrict needs two outcomes, got m={t.m}", "two-outcome")
    report = validate(t, tol)
    if not (report.is_nonsignaling and report.is_synchronous):
        raise PreconditionError(
            f"restrict needs a synchronous non-signaling tensor; failed {report.failed}",
            ",".join(report.failed),
        )

    w = t.p[:, :, 0, 0]
    asymmetry = float(np.abs(w - w.T).max())
    if asymmetry > tol:
        raise InconsistencyError(
            f"w is not symmetric: max |w[x,y] - w[y,x]| = {asymmetry:.3e}", "symmetry"
        )
    return CorrelationMatrix(n=t.n, w=(w + w.T) / 2.0, asymmetry=asymmetry)


def matrix_violations(w: np.ndarray, tol: float) -> list[tuple[str, float]]:
    """Every defining inequality of D_r(n) that ``w`` breaks, with its residual."""
    d = np.diag(w)
    checks = {
        "w[x,y] = w[y,x]": np.abs(w - w.T).max(),
        "w[x,y] >= 0": max(0.0, -w.min()),
        "w[x,y] <= min(w[x,x], w[y,y])": max(
            0.0, (w - np.minimum(d[:, None], d[None, :])).max()
        ),
        "1 + w[x,y] - w[x,x] - w[y,y] >= 0": max(
            0.0, -(1.0 + w - d[:, None] - d[None, :]).min()
        ),
    }
    return [(name, float(value)) for name, value in checks.items() if value > tol]


def expand_array(w: np.ndarray) -> np.ndarray:
    """
    The two-outcome tensor (x, y, i, j) of a correlation matrix.

    Works on float and on ``Fraction`` object arrays alike. On the diagonal the
    formula reduces to diag(w_{x,x}, 1 − w_{x,x}).
    """
    n = w.shape[0]
    d = np.diag(w)
    p = np.empty((n, n, 2, 2), dtype=w.dtype)
    p[:, :, 0, 0] = w
    p[:, :, 0, 1] = d[:, None] - w
    p[:, :, 1, 0] = d[None, :] - w
    p[:, :, 1, 1] = 1 + w - d[:, None] - d[None, :]
    return p


def expand(matrix: CorrelationMatrix, tol: Optional[float] = None) -> CorrelationTensor:
    """
    Inverse of :func:`restrict`.

    Raises:
        InfeasibleMatrixError: Naming the first failed inequality.
    """
    tol = _tol(tol)
    violations = matrix_violations(matrix.w, tol)
    if violations:
        name, value = violations[0]
        raise InfeasibleMatrixError(
            f"matrix violates {name} by {value:.3e}", constraint=name
        )
    return CorrelationTensor(n=matrix.n, m=2, p=expand_array(np.asarray(matrix.w)))


# ─── C^s(n,m) ↔ C^s(nm,2) ─────────────────────────────────────────────────────


def pairing_matrix(p: np.ndarray) -> np.ndarray:
    """W_{(x,i),(y,j)} = p(i,j|x,y) as an nm × nm matrix."""
    n, m = p.shape[0], p.shape[2]
    return p.transpose(0, 2, 1, 3).reshape(n * m, n * m)


def embed_outcomes(q: CorrelationTensor, tol: Optional[float] = None) -> CorrelationTensor:
    """
    Embed q ∈ C^s(n,m) into C^s(nm,2) by E_{0,(x,i)} = F_{x,i}, E_{1,(x,i)} = I − F_{x,i}.

    Raises:
        PreconditionError: If q signals (marginals undefined).
    """
    tol = _tol(tol)
    if constraint_residuals(q.p)["nonsignaling"] > tol:
        raise PreconditionError("embed_outcomes needs a non-signaling tensor", "nonsignaling")

    margins = marginals(q, tol)
    W = pairing_matrix(q.p)
    a = margins.pA.reshape(-1)
    b = margins.pB.reshape(-1)
    nm = q.n * q.m
    p = np.empty((nm, nm, 2, 2))
    p[:, :, 0, 0] = W
    p[:, :, 0, 1] = a[:, None] - W
    p[:, :, 1, 0] = b[None, :] - W
    p[:, :, 1, 1] = 1.0 - a[:, None] - b[None, :] + W
    return CorrelationTensor(n=nm, m=2, p=p)


def project_outcomes(
    p: CorrelationTensor, n: int, m: int, tol: Optional[float] = None
) -> ProjectionReport:
    """
    π(p)(i,j|x,y) := p(0,0|(x,i),(y,j)), reported as membership in F^s(n,m).

    Non-membership is returned as a report listing the violated constraint
    families, not raised.

    Raises:
        MalformedInputError: If p is not a two-outcome tensor over n·m questions.
    """
    tol = _tol(tol)
    if p.m != 2 or p.n != n * m:
        raise MalformedInputError(
            f"expected a two-outcome tensor over {n * m} questions, got n={p.n}, m={p.m}",
            "tensor-shape",
        )
    violated: list[str] = []
    if constraint_residuals(p.p)["synchronous"] > tol:
        violated.append("source-synchronous")

    q = p.p[:, :, 0, 0].reshape(n, m, n, m).transpose(0, 2, 1, 3)
    candidate = CorrelationTensor(n=n, m=m, p=q)
    report = validate(candidate, tol)
    violated.extend(report.failed)
    in_f = not violated
    logger.debug("Outcome projection", extra={"n": n, "m": m, "violated": violated})
    return ProjectionReport(
        in_f=in_f,
        tensor=candidate if in_f else None,
        violated=violated,
        max_violation=report.max_violation,
        report=report,
    )


def is_in_f(p: CorrelationTensor, n: int, m: int, tol: Optional[float] = None) -> bool:
    """Membership of an (nm,2) tensor in F^s(n,m)."""
    return project_outcomes(p, n, m, tol).in_f


# ─── Two-question remark fixture ──────────────────────────────────────────────


def remark_tensors() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The tensors p, q, s over two questions and two outcomes, as exact ``Fraction`` arrays.

    All three share diagonal blocks diag(1/2, 1/2); off-diagonal blocks are all
    1/4 for p, all 1/2 for q and all 0 for s.
    """
    half, quarter = Fraction(1, 2), Fraction(1, 4)

    def build(off: Fraction) -> np.ndarray:
        t = np.empty((2, 2, 2, 2), dtype=object)
        for x in range(2):
            for y in range(2):
                if x == y:
                    t[x, y] = np.array([[half, Fraction(0)], [Fraction(0), half]], dtype=object)
                else:
                    t[x, y] = np.full((2, 2), off, dtype=object)
        return t

    return build(quarter), build(half), build(Fraction(0))


def remark_decomposition_holds() -> bool:
    """
    Exact check of π⁻¹(p) = ½π⁻¹(q) + ½π⁻¹(s), where π⁻¹ expands the pairing matrix.

    p is a synchronous non-signaling correlation while q and s are not
    correlations at all, so the set of projected correlations is not a face.
    """
    p, q, s = remark_tensors()
    lhs = expand_array(pairing_matrix(p))
    rhs = Fraction(1, 2) * expand_array(pairing_matrix(q)) + Fraction(1, 2) * expand_array(
        pairing_matrix(s)
    )
    return bool(np.all(lhs == rhs))


def as_tensor(exact: np.ndarray) -> CorrelationTensor:
    """Float view of an exact (x, y, i, j) array."""
    n, m = exact.shape[0], exact.shape[2]
    return CorrelationTensor(n=n, m=m, p=exact.astype(float))
