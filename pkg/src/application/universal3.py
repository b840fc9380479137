"""
The universal algebra of three projections A, B, C subject to
[A, aB + bC] = [B, aA + C] = 0 (direction (a, b, 1) after rescaling).

Its irreducible representations are eight characters (α, β, γ) ∈ {0,1}³ and,
when the parameters allow it, one copy of M_2:

    A = [[1, 0], [0, 0]]
    B = [[t, s], [s, 1−t]]                 s = sqrt(t(1−t))
    C = [[z, −(a/b)s], [−(a/b)s, 1−z]]

with t = (b² + 2a²b − a²b² − a²)/(4a²b) and z = ½ ± ½·sqrt(1 − (4a²/b²)t(1−t)).
Every trace on the algebra is a convex combination of the trace atoms
listed by :func:`build_rep`.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Optional, Sequence, Union

import numpy as np

from src.application.tracial_models import commutator_defect, two_outcome_model
from src.config.settings import get_settings
from src.domain import (
    AtomKind,
    BlockAlgebra,
    BlockOperator,
    CorrelationMatrix,
    DegenerateDirection,
    Direction3,
    GridRow,
    InconsistencyError,
    MalformedInputError,
    PreconditionError,
    RepVerification,
    TraceAtom,
    TracialModel,
    TracialState,
    Universal3Rep,
)

logger = logging.getLogger(__name__)

GRID_VALUES: tuple[float, ...] = (-3, -2, -1.5, -1, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1, 1.5, 2, 3)
RANDOM_RANGE = 3.0


def _norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


def _comm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def _sign(v: float) -> int:
    return int(np.sign(v))


def relation_tol(a: float, b: float, tol: Optional[float] = None) -> float:
    """Relation tolerance scaled by the size of the entries of aA + C and aB + bC."""
    tol = get_settings().operator_tol if tol is None else tol
    return tol * max(1.0, abs(a), abs(b))


# ─── Direction ────────────────────────────────────────────────────────────────


def normalize_direction(x: Direction3) -> Union[tuple[float, float], DegenerateDirection]:
    """
    (a/c, b/c) for a direction with no zero component.

    The relations are invariant under any nonzero real rescaling, negative c
    included. Directions with vanishing components return a tag naming them.
    """
    if x.degenerate:
        return DegenerateDirection(zeros=x.zero_components)
    return x.a / x.c, x.b / x.c


# ─── Construction ─────────────────────────────────────────────────────────────


def t_parameter(a: float, b: float) -> float:
    return (b * b + 2 * a * a * b - a * a * b * b - a * a) / (4 * a * a * b)


def discriminant(a: float, b: float, t: float) -> float:
    return 1.0 - (4 * a * a / (b * b)) * t * (1.0 - t)


def m2_matrices(a: float, b: float, t: float, z: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three 2×2 matrices of the M_2 representation."""
    s = np.sqrt(t * (1.0 - t))
    r = a / b
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    B = np.array([[t, s], [s, 1.0 - t]])
    C = np.array([[z, -r * s], [-r * s, 1.0 - z]])
    return A, B, C


def _branch_residual(a: float, b: float, t: float, z: float) -> float:
    A, B, C = m2_matrices(a, b, t, z)
    return _norm(_comm(B, a * A + C))


def _linear_z(a: float, b: float, t: float) -> float:
    """The z that zeroes [B, aA + C]; the relation is linear in z."""
    return 0.5 - (a / b) * (t - 0.5) - a / 2.0


def _z_defect(a: float, b: float, t: float, z: float) -> float:
    """Worst of ‖[B, aA + C]‖ and ‖C² − C‖ for a candidate z."""
    _, _, C = m2_matrices(a, b, t, z)
    return max(_branch_residual(a, b, t, z), _norm(C @ C - C))


def scalar_atoms() -> list[TraceAtom]:
    """The eight characters (α, β, γ), in lexicographic order."""
    atoms = []
    for alpha, beta, gamma in product((0, 1), repeat=3):
        atoms.append(
            TraceAtom(
                diag=(float(alpha), float(beta), float(gamma)),
                offdiag=(float(alpha * beta), float(alpha * gamma), float(beta * gamma)),
                kind=AtomKind.SCALAR,
                label=f"{alpha}{beta}{gamma}",
            )
        )
    return atoms


def m2_atom(a: float, b: float, t: float, z: float) -> TraceAtom:
    """Normalized trace tr/2 on the M_2 block."""
    bc = t * z + (1.0 - t) * (1.0 - z) - 2.0 * (a / b) * t * (1.0 - t)
    return TraceAtom(
        diag=(0.5, 0.5, 0.5),
        offdiag=(t / 2.0, z / 2.0, bc / 2.0),
        kind=AtomKind.M2,
        label="m2",
    )


def build_rep(a: float, b: float, branch: Optional[int] = None) -> Universal3Rep:
    """
    Build the representation for normalized direction (a, b, 1).

    The z branch is the one minimizing ‖[B, aA + C]‖; both residuals are
    kept on the result. The chosen root is then compared with the linear
    solve of that relation and the more accurate of the two is kept, which
    matters when the roots nearly coincide. Passing ``branch`` (+1 or −1)
    forces a branch and skips the residual check.

    Raises:
        PreconditionError: If a or b is zero.
        InconsistencyError: If the selected branch misses the relation tolerance.
    """
    if a == 0.0 or b == 0.0:
        raise PreconditionError(f"build_rep needs nonzero a and b, got ({a}, {b})", "nonzero-ab")
    if branch not in (None, 1, -1):
        raise MalformedInputError(f"branch must be +1 or -1, got {branch}", "branch")

    tol = relation_tol(a, b)
    t = t_parameter(a, b)
    atoms = scalar_atoms()
    disc = discriminant(a, b, t) if 0.0 < t < 1.0 else -1.0
    # The discriminant equals (2z − 1)² in exact arithmetic; rounding can push it below zero.
    has_m2 = 0.0 < t < 1.0 and disc >= -1e-12
    if not has_m2:
        logger.debug("No two-dimensional irrep", extra={"a": a, "b": b, "t": t})
        return Universal3Rep(a=a, b=b, t=t, has_m2=False, atoms=tuple(atoms))

    root = np.sqrt(max(disc, 0.0))
    candidates = {1: 0.5 + 0.5 * root, -1: 0.5 - 0.5 * root}
    residuals = {sign: _branch_residual(a, b, t, z) for sign, z in candidates.items()}
    double_root = residuals[1] <= tol and residuals[-1] <= tol

    if branch is not None:
        z_sign = branch
        z = candidates[branch]
    else:
        z_sign = 1 if residuals[1] < residuals[-1] else -1
        # The square root loses digits near a double root; the linear solve does not.
        z = min((candidates[z_sign], _linear_z(a, b, t)), key=lambda v: _z_defect(a, b, t, v))
        defect = _z_defect(a, b, t, z)
        if defect > tol:
            raise InconsistencyError(
                f"no z makes C a projection with [B, aA + C] = 0 at (a, b) = ({a}, {b}): "
                f"branch residuals {residuals[1]:.3e}, {residuals[-1]:.3e}, best {defect:.3e}",
                "z-branch",
            )
        if residuals[z_sign] > tol:
            double_root = True
            logger.debug("Near-double z root refined", extra={"a": a, "b": b, "z": z})

    atoms.append(m2_atom(a, b, t, z))
    rep = Universal3Rep(
        a=a,
        b=b,
        t=t,
        z=z,
        has_m2=True,
        atoms=tuple(atoms),
        matrices=m2_matrices(a, b, t, z),
        z_sign=z_sign,
        branch_residuals=(residuals[1], residuals[-1]),
        double_root=double_root,
    )
    logger.debug(
        "Universal rep built",
        extra={"a": a, "b": b, "t": t, "z": z, "z_sign": z_sign, "residuals": rep.branch_residuals},
    )
    return rep


# ─── Verification ─────────────────────────────────────────────────────────────


def verify_rep(rep: Universal3Rep, tol: Optional[float] = None) -> RepVerification:
    """
    Residuals of the projection conditions and all three commutation relations
    on the M_2 block, plus the commutant check of
    H = (aB + bC)² − (a + b)(aB + bC).

    The third relation follows from −[C, bA + B] = [A, aB + bC] + [B, aA + C];
    it is measured directly rather than inferred.

    Raises:
        PreconditionError: If the rep has no M_2 block.
    """
    if not rep.has_m2 or rep.matrices is None:
        raise PreconditionError("verify_rep needs a rep with an M_2 block", "has-m2")
    a, b = rep.a, rep.b
    tol = relation_tol(a, b, tol)
    A, B, C = rep.matrices

    idempotent = tuple(_norm(P @ P - P) for P in (A, B, C))
    hermitian = max(_norm(P - P.conj().T) for P in (A, B, C))
    X = a * B + b * C
    H = X @ X - (a + b) * X
    dimension_bound = max(_norm(_comm(H, P)) for P in (A, B, C))

    report = RepVerification(
        a=a,
        b=b,
        idempotent=idempotent,  # type: ignore[arg-type]
        hermitian=hermitian,
        relation_a=_norm(_comm(A, X)),
        relation_b=_norm(_comm(B, a * A + C)),
        relation_c=_norm(_comm(C, b * A + B)),
        dimension_bound=dimension_bound,
        passed=False,
    )
    return report.model_copy(update={"passed": report.max_residual <= tol})


# ─── Traces ───────────────────────────────────────────────────────────────────


def _check_weights(rep: Universal3Rep, weights: Sequence[float]) -> np.ndarray:
    lam = np.asarray(weights, dtype=float)
    if lam.shape != (len(rep.atoms),):
        raise MalformedInputError(
            f"{lam.size} weights for {len(rep.atoms)} atoms", "weights-shape"
        )
    if lam.min() < -1e-12 or abs(lam.sum() - 1.0) > 1e-9:
        raise MalformedInputError(
            f"atom weights must be a probability vector, got {lam.tolist()}", "weights-simplex"
        )
    return np.clip(lam, 0.0, None)


def correlation_from_trace(rep: Universal3Rep, weights: Sequence[float]) -> CorrelationMatrix:
    """The 3×3 correlation matrix of the trace Σ_k λ_k·atom_k."""
    lam = _check_weights(rep, weights)
    diag = lam @ np.array([atom.diag for atom in rep.atoms])
    off = lam @ np.array([atom.offdiag for atom in rep.atoms])
    w = np.diag(diag)
    for value, (i, j) in zip(off, ((0, 1), (0, 2), (1, 2))):
        w[i, j] = w[j, i] = value
    return CorrelationMatrix(n=3, w=w)


def realizing_model(rep: Universal3Rep, weights: Sequence[float]) -> TracialModel:
    """
    A tracial model with one block per atom whose correlation is
    :func:`correlation_from_trace` of the same weights.

    Zero-weight blocks are kept, so the trace need not be faithful.
    """
    lam = _check_weights(rep, weights)
    dims = tuple(1 for atom in rep.atoms if atom.kind == AtomKind.SCALAR)
    scalar_count = len(dims)
    if rep.has_m2:
        dims = dims + (2,)
    projections = []
    for q in range(3):
        blocks: list[np.ndarray] = [
            np.array([[atom.diag[q]]]) for atom in rep.atoms[:scalar_count]
        ]
        if rep.has_m2 and rep.matrices is not None:
            blocks.append(rep.matrices[q])
        projections.append(BlockOperator(blocks=tuple(blocks)))
    state = TracialState(weights=tuple(float(v) for v in lam / lam.sum()))
    return two_outcome_model(projections, BlockAlgebra(block_dims=dims), state)


# ─── Grid verification ────────────────────────────────────────────────────────


def _grid_row(point: tuple[float, float]) -> GridRow:
    a, b = point
    rep = build_rep(a, b)
    report = verify_rep(rep)
    plus, minus = rep.branch_residuals or (0.0, 0.0)
    tol = relation_tol(a, b)
    passing = (plus <= tol) + (minus <= tol)
    model = realizing_model(rep, [0.0] * 8 + [1.0])
    defect = commutator_defect(model, (a, b, 1.0))
    return GridRow(
        a=a,
        b=b,
        t=rep.t,
        z=rep.z if rep.z is not None else float("nan"),
        z_sign=rep.z_sign or 0,
        branch_residuals=(plus, minus),
        exactly_one_branch=passing == 1 or rep.double_root,
        double_root=rep.double_root,
        sign_a=_sign(a),
        sign_q=_sign(a * a * (b * b - 1.0) + b * b),
        max_residual=max(report.max_residual, defect),
        passed=report.passed and defect <= tol,
    )


def grid_points(
    values: Sequence[float] = GRID_VALUES, random_points: int = 100, seed: int = 0
) -> list[tuple[float, float]]:
    """Grid pairs with an M_2 block, followed by ``random_points`` seeded pairs that have one."""
    points = [
        (float(a), float(b))
        for a, b in product(values, values)
        if build_rep(float(a), float(b)).has_m2
    ]
    rng = np.random.default_rng(seed)
    drawn = 0
    attempts = 0
    while drawn < random_points:
        attempts += 1
        if attempts > 100 * max(random_points, 1):
            raise InconsistencyError("random grid draw found too few M_2 points", "grid-draw")
        a, b = rng.uniform(-RANDOM_RANGE, RANDOM_RANGE, size=2)
        if a == 0.0 or b == 0.0 or not build_rep(float(a), float(b)).has_m2:
            continue
        points.append((float(a), float(b)))
        drawn += 1
    return points


def verify_grid(
    values: Sequence[float] = GRID_VALUES,
    random_points: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> list[GridRow]:
    """
    Build and verify the representation at every grid point with an M_2 block.

    Rows come back in point order regardless of ``workers``.
    """
    points = grid_points(values, random_points, seed)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_row, points))
    else:
        rows = [_grid_row(point) for point in points]
    failed = sum(1 for row in rows if not row.passed)
    logger.info(
        "Universal grid verified",
        extra={"points": len(rows), "failed": failed, "double_roots": sum(r.double_root for r in rows)},
    )
    return rows


def z_sign_table(rows: Sequence[GridRow]) -> list[dict[str, int]]:
    """
    Empirical z-branch rule: for each (sign a, sign of a²(b²−1)+b²) cell,
    how often the + and − branches were selected.
    """
    counts: Counter[tuple[int, int, int]] = Counter(
        (row.sign_a, row.sign_q, row.z_sign) for row in rows if not row.double_root
    )
    cells = sorted({(sa, sq) for sa, sq, _ in counts})
    return [
        {
            "sign_a": sa,
            "sign_q": sq,
            "plus": counts[(sa, sq, 1)],
            "minus": counts[(sa, sq, -1)],
        }
        for sa, sq in cells
    ]
