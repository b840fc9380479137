"""
Support values of y-slices of D_r(n):

    u_r(y, x) = sup { Σ_{i<j} x_{ij} w_{ij} : w ∈ D_r(n), diag(w) = y }
    l_r(y, x) = −u_r(y, −x)

For r = loc the traces are distributions over the 2ⁿ commutative atoms. For
r = q and n = 3 an optimum satisfies the commutation relations of the
universal algebra for x, whose traces form the simplex over its (at most
nine) atoms, so u_q is a small linear program as well. Directions with a
zero component are attained commutatively and fall back to the local slice.
"""

from __future__ import annotations

import logging
from itertools import combinations, product
from typing import Optional, Sequence

import numpy as np

from src.application import correlation_sets
from src.application.tracial_models import commutator_defect, synthesize, two_outcome_model
from src.application.universal3 import build_rep, normalize_direction, realizing_model
from src.config.settings import get_settings
from src.domain import (
    AtomKind,
    BlockAlgebra,
    BlockOperator,
    CorrelationClass,
    CorrelationMatrix,
    DegenerateDirection,
    Direction3,
    DominanceEntry,
    DominanceReport,
    DominanceStatus,
    InfeasibleProgramError,
    LPSolution,
    MalformedInputError,
    PairBounds,
    SampleSet,
    Side,
    SliceQuery,
    SliceResult,
    TraceAtom,
    TracialModel,
    TracialState,
    UnsupportedError,
    pair_count,
    pair_indices,
)

logger = logging.getLogger(__name__)

LOCAL_MAX_QUESTIONS = 4
QUERY_STEPS = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)


# ─── Pair bounds ──────────────────────────────────────────────────────────────


def pair_bounds(yP: float, yQ: float) -> PairBounds:
    """
    Range [max(0, yP + yQ − 1), min(yP, yQ)] of τ(PQ) given τ(P) = yP, τ(Q) = yQ.

    Witnesses are indicator functions of subintervals of [0, 1]: both
    projections start at 0 for the upper end, Q ends at 1 for the lower end.

    Raises:
        MalformedInputError: If yP or yQ is outside [0, 1].
    """
    for v in (yP, yQ):
        if not 0.0 <= v <= 1.0:
            raise MalformedInputError(f"pair_bounds needs values in [0,1], got {v}", "y-range")
    return PairBounds(
        lower=max(0.0, yP + yQ - 1.0),
        upper=min(yP, yQ),
        lower_witness=((0.0, yP), (1.0 - yQ, 1.0)),
        upper_witness=((0.0, yP), (0.0, yQ)),
    )


def pair_bounds_value(y: Sequence[float], x: Sequence[float], side: Side = Side.UPPER) -> float:
    """
    Composite of pair bounds: each nonzero x_{ij} pushes w_{ij} to the end of
    its interval that helps the requested side.

    Exact whenever the pairs with x_{ij} ≠ 0 form no cycle, which covers
    every three-question direction with a zero component.
    """
    n = len(y)
    if len(x) != pair_count(n):
        raise MalformedInputError(f"x has {len(x)} entries for n={n}", "x")
    total = 0.0
    for coeff, (i, j) in zip(x, pair_indices(n)):
        if coeff == 0.0:
            continue
        bounds = pair_bounds(y[i], y[j])
        prefer_upper = (coeff > 0) == (side == Side.UPPER)
        total += coeff * (bounds.upper if prefer_upper else bounds.lower)
    return total


# ─── Linear program over atoms ────────────────────────────────────────────────


def local_atoms(n: int) -> list[TraceAtom]:
    """The 2ⁿ characters α ∈ {0,1}ⁿ with diag α and w_{ij} = α_iα_j."""
    atoms = []
    for alpha in product((0, 1), repeat=n):
        atoms.append(
            TraceAtom(
                diag=tuple(float(v) for v in alpha),
                offdiag=tuple(float(alpha[i] * alpha[j]) for i, j in pair_indices(n)),
                kind=AtomKind.SCALAR,
                label="".join(str(v) for v in alpha),
            )
        )
    return atoms


def lp_solve(
    atoms: Sequence[TraceAtom],
    x: Sequence[float],
    y: Sequence[float],
    side: Side = Side.UPPER,
    tol: Optional[float] = None,
) -> LPSolution:
    """
    Optimize Σ_k λ_k x·offdiag_k over λ ≥ 0 with Σλ = 1 and Σ_k λ_k diag_k = y.

    Enumerates every support of size at most the number of equalities in
    lexicographic order, solves the square system, and keeps feasible basic
    solutions. An incumbent is replaced only by a strictly better value, so
    ties go to the lexicographically smallest support.

    Raises:
        UnsupportedError: If there are more atoms than ``lp_max_atoms``.
        InfeasibleProgramError: If no basic solution is feasible.
    """
    settings = get_settings()
    tol = settings.validation_tol if tol is None else tol
    K = len(atoms)
    if K == 0 or K > settings.lp_max_atoms:
        raise UnsupportedError(
            f"lp_solve handles 1..{settings.lp_max_atoms} atoms, got {K}", "lp-atoms"
        )

    diag = np.array([atom.diag for atom in atoms], dtype=float)
    off = np.array([atom.offdiag for atom in atoms], dtype=float)
    target = np.asarray(y, dtype=float)
    if diag.shape[1] != target.size:
        raise MalformedInputError(f"y has {target.size} entries, atoms {diag.shape[1]}", "y")
    cost = off @ np.asarray(x, dtype=float)
    if side == Side.LOWER:
        cost = -cost

    M = np.vstack([np.ones(K), diag.T])
    rhs = np.concatenate([[1.0], target])
    equalities = M.shape[0]

    supports = sorted(
        s for size in range(1, min(equalities, K) + 1) for s in combinations(range(K), size)
    )
    best: Optional[tuple[float, np.ndarray, tuple[int, ...]]] = None
    min_residual = np.inf
    for support in supports:
        cols = M[:, support]
        lam, _, rank, _ = np.linalg.lstsq(cols, rhs, rcond=None)
        if rank < len(support):
            continue
        residual = float(np.abs(cols @ lam - rhs).max())
        min_residual = min(min_residual, residual + max(0.0, -float(lam.min())))
        if residual > tol or lam.min() < -tol:
            continue
        value = float(cost[list(support)] @ lam)
        if best is None or value > best[0] + settings.lp_tie_tol:
            best = (value, lam, support)

    if best is None:
        raise InfeasibleProgramError(
            f"no basic solution of the {K}-atom program is feasible for y={target.tolist()}",
            bases_checked=len(supports),
            min_residual=float(min_residual),
        )
    value, lam, support = best
    weights = np.zeros(K)
    weights[list(support)] = np.clip(lam, 0.0, None)
    logger.debug(
        "LP solved",
        extra={"atoms": K, "bases_checked": len(supports), "support": support, "side": side.value},
    )
    return LPSolution(
        value=-value if side == Side.LOWER else value,
        weights=tuple(float(v) for v in weights),
        support=support,
        bases_checked=len(supports),
    )


# ─── Slices ───────────────────────────────────────────────────────────────────


def _local_model(atoms: Sequence[TraceAtom], weights: np.ndarray) -> TracialModel:
    """Commutative model: one 1×1 block per atom."""
    n = len(atoms[0].diag)
    dims = (1,) * len(atoms)
    projections = [
        BlockOperator(blocks=tuple(np.array([[atom.diag[q]]]) for atom in atoms)) for q in range(n)
    ]
    state = TracialState(weights=tuple(float(v) for v in weights / weights.sum()))
    return two_outcome_model(projections, BlockAlgebra(block_dims=dims), state)


def _resynthesis_residual(model: TracialModel, y: Sequence[float], achieved: np.ndarray) -> float:
    matrix = correlation_sets.restrict(synthesize(model))
    return float(
        max(
            np.abs(matrix.diagonal - np.asarray(y)).max(),
            np.abs(matrix.upper() - achieved).max(initial=0.0),
        )
    )


def _solve(query: SliceQuery, atoms: Sequence[TraceAtom]) -> tuple[LPSolution, np.ndarray]:
    """Upper side directly; lower side as −u(y, −x)."""
    if query.side == Side.UPPER:
        solution = lp_solve(atoms, query.x, query.y, Side.UPPER)
    else:
        flipped = lp_solve(atoms, query.negated().x, query.y, Side.UPPER)
        solution = flipped.model_copy(update={"value": -flipped.value})
    achieved = np.asarray(solution.weights) @ np.array([atom.offdiag for atom in atoms])
    return solution, achieved


def slice_local(query: SliceQuery) -> SliceResult:
    """
    Exact u_loc or l_loc over the 2ⁿ commutative atoms.

    Raises:
        UnsupportedError: If n exceeds the local atom cap.
    """
    if query.n > LOCAL_MAX_QUESTIONS:
        raise UnsupportedError(
            f"exact local slices support n <= {LOCAL_MAX_QUESTIONS}, got n={query.n}",
            "local-n",
        )
    atoms = local_atoms(query.n)
    solution, achieved = _solve(query, atoms)
    model = _local_model(atoms, np.asarray(solution.weights))
    residual = _resynthesis_residual(model, query.y, achieved)
    return SliceResult(
        query=query,
        value=solution.value,
        weights=solution.weights,
        atom_labels=tuple(atom.label for atom in atoms),
        realizing_model=model,
        achieved_w=tuple(float(v) for v in achieved),
        degenerate_path=False,
        max_residual=residual,
    )


def slice_q3(query: SliceQuery) -> SliceResult:
    """
    Exact u_q or l_q for three questions (equal to the qc values there).

    Raises:
        UnsupportedError: If n ≠ 3; larger n is only reachable by sampling.
    """
    if query.n != 3:
        raise UnsupportedError(
            f"exact quantum slices exist for n=3 only (got n={query.n}); use the sampler",
            "exact-mode",
        )
    direction = normalize_direction(Direction3(a=query.x[0], b=query.x[1], c=query.x[2]))
    if isinstance(direction, DegenerateDirection):
        local = slice_local(query)
        logger.debug("Degenerate direction", extra={"zeros": direction.zeros})
        return local.model_copy(update={"degenerate_path": True})

    a, b = direction
    rep = build_rep(a, b)
    atoms = list(rep.atoms)
    solution, achieved = _solve(query, atoms)
    model = realizing_model(rep, solution.weights)
    residual = _resynthesis_residual(model, query.y, achieved)
    if rep.has_m2:
        residual = max(residual, commutator_defect(model, query.x))
    else:
        logger.info("No M_2 block; eight-atom fallback", extra={"a": a, "b": b, "t": rep.t})
    logger.debug(
        "Quantum slice solved",
        extra={"side": query.side.value, "value": solution.value, "support": solution.support},
    )
    return SliceResult(
        query=query,
        value=solution.value,
        weights=solution.weights,
        atom_labels=tuple(atom.label for atom in atoms),
        realizing_model=model,
        achieved_w=tuple(float(v) for v in achieved),
        degenerate_path=not rep.has_m2,
        max_residual=residual,
        rep=rep,
    )


def compute_slice(query: SliceQuery) -> SliceResult:
    """Dispatch on the query's correlation class."""
    if query.cls == CorrelationClass.LOC:
        return slice_local(query)
    return slice_q3(query)


def extreme_point(result: SliceResult) -> CorrelationMatrix:
    """The full matrix with diagonal y and off-diagonal entries achieved_w."""
    n = result.query.n
    w = np.diag(np.asarray(result.query.y, dtype=float))
    for value, (i, j) in zip(result.achieved_w, pair_indices(n)):
        w[i, j] = w[j, i] = value
    return CorrelationMatrix(n=n, w=w)


def dpp_functional(t: float, cls: CorrelationClass = CorrelationClass.Q) -> float:
    """f(t) = 2·l((t, t, t), (1, 1, 1)) + 3t."""
    query = SliceQuery(y=(t, t, t), x=(1.0, 1.0, 1.0), cls=cls, side=Side.LOWER)
    return 2.0 * compute_slice(query).value + 3.0 * t


# ─── Dominance against the sampling oracle ────────────────────────────────────


def landmark_sample() -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the M_2 atom for direction (1, 1, 1)."""
    rep = build_rep(1.0, 1.0)
    atom = next(atom for atom in rep.atoms if atom.kind == AtomKind.M2)
    return np.array(atom.diag), np.array(atom.offdiag)


def with_landmark(samples: SampleSet) -> SampleSet:
    y, w = landmark_sample()
    return samples.extended(y, w)


def random_queries(
    count: int, seed: int, samples: Optional[SampleSet] = None
) -> list[SliceQuery]:
    """
    Seeded three-question q queries for dominance runs.

    y is uniform in [0.05, 0.95]³, or a sampled diagonal for every other query
    when ``samples`` are given so the neighborhood is never empty. x draws
    from a fixed step set or from normals on alternate queries; the side is a
    fair coin.
    """
    rng = np.random.default_rng(seed)
    queries = []
    for k in range(count):
        if samples is not None and len(samples) and k % 2 == 1:
            y = samples.y[rng.integers(len(samples))]
        else:
            y = rng.uniform(0.05, 0.95, size=3)
        if k % 2 == 0:
            x = rng.choice(QUERY_STEPS, size=3)
        else:
            x = rng.standard_normal(3)
        side = Side.UPPER if rng.random() < 0.5 else Side.LOWER
        queries.append(
            SliceQuery(
                y=tuple(float(v) for v in y),
                x=tuple(float(v) for v in x),
                cls=CorrelationClass.Q,
                side=side,
            )
        )
    return queries


def dominance_check(
    samples: SampleSet,
    queries: Sequence[SliceQuery],
    delta: Optional[float] = None,
    tol: Optional[float] = None,
) -> DominanceReport:
    """
    Compare sampled D_q(3) points with exact slice bounds.

    For each query, samples whose diagonal is within ``delta`` of y (sup norm)
    are scored by x·w − u_q(y, x) − L·δ with L = Σ|x_{ij}| (mirrored for the
    lower side). A positive score beyond ``tol`` is a failure; an empty
    neighborhood is reported as no data.
    """
    settings = get_settings()
    delta = settings.dominance_delta if delta is None else delta
    tol = settings.dominance_tol if tol is None else tol
    if samples.n != 3:
        raise MalformedInputError(f"dominance needs three-question samples, got n={samples.n}", "n")

    entries = []
    for query_id, query in enumerate(queries):
        bound = slice_q3(query.model_copy(update={"cls": CorrelationClass.Q})).value
        near = np.abs(samples.y - np.asarray(query.y)).max(axis=1) <= delta
        neighbors = int(near.sum())
        if neighbors == 0:
            entries.append(
                DominanceEntry(
                    query_id=query_id, bound=bound, neighbors=0, status=DominanceStatus.NO_DATA
                )
            )
            continue
        sign = 1.0 if query.side == Side.UPPER else -1.0
        objective = samples.w[near] @ np.asarray(query.x)
        allowance = float(np.abs(query.x).sum()) * delta
        excess = float((sign * (objective - bound)).max()) - allowance
        status = DominanceStatus.FAIL if excess > tol else DominanceStatus.PASS
        entries.append(
            DominanceEntry(
                query_id=query_id,
                bound=bound,
                neighbors=neighbors,
                max_excess=excess,
                status=status,
            )
        )
        if status == DominanceStatus.FAIL:
            logger.warning(
                "Sample beats slice bound",
                extra={"query_id": query_id, "excess": excess, "neighbors": neighbors},
            )

    report = DominanceReport(delta=delta, tol=tol, entries=entries)
    logger.info(
        "Dominance checked",
        extra={
            "queries": len(entries),
            "covered": report.covered,
            "failures": len(report.failures),
        },
    )
    return report
