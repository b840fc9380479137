"""
Finite-dimensional tracial models.

A model is a direct sum of full matrix blocks, a block-weighted trace
τ(X) = Σ_k λ_k tr(X_k)/d_k, and one projection-valued measure per question.
Models synthesize correlations p(i,j|x,y) = τ(E_{x,i} E_{y,j}); the same
machinery checks that trace orthogonality forces operator orthogonality, measures the commutation
relations that hold at slice optima, runs the unitary perturbation that
proves them, and samples D_q(n) as a brute-force oracle.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm, qr

from src.config.settings import get_settings
from src.domain import (
    BlockAlgebra,
    BlockOperator,
    CorrelationTensor,
    ImprovingDirection,
    MalformedInputError,
    ModelInvalidError,
    OrthogonalityVerdict,
    PreconditionError,
    SampleSet,
    TracialModel,
    TracialState,
    pair_count,
    pair_indices,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ─── Trace ────────────────────────────────────────────────────────────────────


def trace_complex(state: TracialState, op: BlockOperator) -> complex:
    """τ(X) for an arbitrary block operator."""
    if len(state.weights) != len(op.blocks):
        raise MalformedInputError(
            f"{len(state.weights)} weights for {len(op.blocks)} blocks", "trace-weights"
        )
    return complex(
        sum(lam * np.trace(b) / b.shape[0] for lam, b in zip(state.weights, op.blocks))
    )


def trace(state: TracialState, op: BlockOperator) -> float:
    """Real part of τ(X); exact for hermitian X."""
    return trace_complex(state, op).real


def norm_constant(state: TracialState, dims: Sequence[int]) -> float:
    """sqrt(max_k d_k/λ_k): ‖X‖ ≤ constant · sqrt(τ(X*X)) for a faithful trace."""
    if not state.faithful:
        raise PreconditionError("trace is not faithful", "faithful-trace")
    return float(np.sqrt(max(d / lam for d, lam in zip(dims, state.weights))))


# ─── Synthesis ────────────────────────────────────────────────────────────────


def check_pvms(model: TracialModel, tol: Optional[float] = None) -> float:
    """
    Largest PVM residual of the model: idempotence, self-adjointness,
    completeness Σ_i E_{x,i} = I and orthogonality E_{x,i}E_{x,j} = 0.

    Raises:
        ModelInvalidError: Naming the question, outcome and block at fault.
    """
    tol = get_settings().pvm_tol if tol is None else tol
    worst = 0.0
    for x, pvm in enumerate(model.pvms):
        for k, d in enumerate(model.algebra.block_dims):
            total = np.zeros((d, d), dtype=complex)
            for i, op in enumerate(pvm):
                E = op.blocks[k]
                total += E
                res = max(float(np.abs(E @ E - E).max()), float(np.abs(E - E.conj().T).max()))
                if res > tol:
                    raise ModelInvalidError(
                        f"E[{x},{i}] is not a projection in block {k} (residual {res:.3e})",
                        f"projection:x={x},i={i},block={k}",
                    )
                worst = max(worst, res)
                for j in range(i + 1, len(pvm)):
                    cross = float(np.abs(E @ pvm[j].blocks[k]).max())
                    if cross > tol:
                        raise ModelInvalidError(
                            f"E[{x},{i}] E[{x},{j}] != 0 in block {k} (residual {cross:.3e})",
                            f"orthogonality:x={x},i={i},j={j},block={k}",
                        )
                    worst = max(worst, cross)
            res = float(np.abs(total - np.eye(d)).max())
            if res > tol:
                raise ModelInvalidError(
                    f"PVM of question {x} does not sum to I in block {k} (residual {res:.3e})",
                    f"completeness:x={x},block={k}",
                )
            worst = max(worst, res)
    return worst


def synthesize(model: TracialModel, tol: Optional[float] = None) -> CorrelationTensor:
    """
    The correlation p(i,j|x,y) = τ(E_{x,i} E_{y,j}) of a tracial model.

    Raises:
        ModelInvalidError: If a PVM residual exceeds tolerance.
    """
    residual = check_pvms(model, tol)
    n, m = model.n, model.m
    p = np.zeros((n, n, m, m))
    for k, (lam, d) in enumerate(zip(model.trace.weights, model.algebra.block_dims)):
        if lam == 0.0:
            continue
        E = np.array([[op.blocks[k] for op in pvm] for pvm in model.pvms])
        p += lam / d * np.einsum("xiab,yjba->xyij", E, E).real
    logger.debug("Model synthesized", extra={"n": n, "m": m, "pvm_residual": residual})
    return CorrelationTensor(n=n, m=m, p=p)


def two_outcome_model(
    projections: Sequence[BlockOperator], algebra: BlockAlgebra, state: TracialState
) -> TracialModel:
    """Model with E_{x,0} = P_x and E_{x,1} = I − P_x."""
    identity = BlockOperator.identity(algebra.block_dims)
    return TracialModel(
        algebra=algebra,
        trace=state,
        pvms=tuple((P, identity - P) for P in projections),
    )


# ─── Random operators ─────────────────────────────────────────────────────────


def random_unitary(d: int, seed: SeedLike = None) -> np.ndarray:
    """Unitary from the QR factorization of a complex Gaussian matrix, phases fixed by R."""
    rng = _rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_projection(d: int, rank: int, seed: SeedLike = None) -> BlockOperator:
    """
    Hermitian idempotent of exact ``rank``: U diag(1^rank, 0^{d−rank}) U*.

    Raises:
        MalformedInputError: If rank is outside [0, d].
    """
    if not 0 <= rank <= d:
        raise MalformedInputError(f"rank {rank} outside [0, {d}]", "rank-range")
    if rank == 0:
        return BlockOperator.zero((d,))
    if rank == d:
        return BlockOperator.identity((d,))
    V = random_unitary(d, seed)[:, :rank]
    return BlockOperator(blocks=(V @ V.conj().T,))


def random_pvm(d: int, m: int, seed: SeedLike = None) -> list[BlockOperator]:
    """
    ``m`` projections summing to I: a random partition of the standard basis
    conjugated by a random unitary.

    For m ≤ d every part is nonempty; for m > d, d randomly chosen parts get
    one basis vector each and the rest are zero.
    """
    if m < 1:
        raise MalformedInputError(f"a PVM needs at least one outcome, got {m}", "outcomes")
    if m == 1:
        return [BlockOperator.identity((d,))]
    rng = _rng(seed)
    order = rng.permutation(d)
    if m <= d:
        cuts = np.sort(rng.choice(np.arange(1, d), size=m - 1, replace=False))
        parts = np.split(order, cuts)
    else:
        owners = rng.choice(m, size=d, replace=False)
        parts = [order[owners == i] for i in range(m)]
    U = random_unitary(d, rng)
    pvm = []
    for part in parts:
        V = U[:, np.sort(part)]
        pvm.append(BlockOperator(blocks=(V @ V.conj().T,)))
    return pvm


# ─── Trace orthogonality ──────────────────────────────────────────────────────


def orthogonality_to_pvm(
    projections: Sequence[BlockOperator], state: TracialState, tol: float
) -> OrthogonalityVerdict:
    """
    Numerical form of: τ(P_iP_j) = 0 for i ≠ j forces P_iP_j = 0, and then
    Σ_{i,j} τ(P_iP_j) = 1 forces Σ_i P_i = I.

    Uses τ((P_iP_j)*(P_iP_j)) = τ(P_iP_j) and ‖X‖ ≤ C·sqrt(τ(X*X)) with
    C = sqrt(max_k d_k/λ_k). Residuals are measured, never assumed.

    Raises:
        PreconditionError: If τ is not faithful.
    """
    if not state.faithful:
        raise PreconditionError("the trace must be faithful", "faithful-trace")
    if not projections:
        raise MalformedInputError("no projections given", "projections")
    dims = projections[0].dims
    constant = norm_constant(state, dims)

    pairing = 0.0
    product_norm = 0.0
    for i, Pi in enumerate(projections):
        for j, Pj in enumerate(projections):
            if i == j:
                continue
            pairing = max(pairing, abs(trace_complex(state, Pi @ Pj)))
            product_norm = max(product_norm, (Pi @ Pj).norm())

    total = projections[0]
    for P in projections[1:]:
        total = total + P
    trace_sum = trace(state, total @ total)
    trace_sum_residual = abs(trace_sum - 1.0)

    hypothesis = pairing <= tol
    normalization = hypothesis and trace_sum_residual <= tol
    bound_holds = product_norm <= constant * np.sqrt(pairing) + 1e-12
    sum_residual: Optional[float] = None
    if normalization:
        defect = BlockOperator.identity(dims) - total
        sum_residual = defect.norm()
        excess = max(0.0, trace(state, defect.adjoint() @ defect))
        bound_holds = bound_holds and sum_residual <= constant * np.sqrt(excess) + 1e-12

    return OrthogonalityVerdict(
        hypothesis_met=hypothesis,
        max_trace_pairing=pairing,
        max_product_norm=product_norm,
        normalization_hypothesis_met=normalization,
        trace_sum_residual=trace_sum_residual,
        sum_residual=sum_residual,
        constant=constant,
        bound_holds=bool(bound_holds),
    )


# ─── Commutation relations at optima ──────────────────────────────────────────


def direction_matrix(x: Sequence[float], n: int) -> np.ndarray:
    """Symmetric n×n matrix with zero diagonal from pair weights x_{i,j}, i<j."""
    if len(x) != pair_count(n):
        raise MalformedInputError(f"{len(x)} pair weights for n={n}", "x")
    X = np.zeros((n, n))
    for value, (i, j) in zip(x, pair_indices(n)):
        X[i, j] = X[j, i] = value
    return X


def commutator_defect(
    model: Union[TracialModel, Sequence[BlockOperator]], x: Sequence[float]
) -> float:
    """
    max_i ‖[P_i, Σ_{j≠i} x_{ij} P_j]‖, taking P_i = E_{i,0} for a model.

    Zero iff the projections satisfy the relations of the universal algebra
    for direction x.
    """
    projections = model.projections() if isinstance(model, TracialModel) else list(model)
    n = len(projections)
    X = direction_matrix(x, n)
    defect = 0.0
    for i, Pi in enumerate(projections):
        combo = BlockOperator.zero(Pi.dims)
        for j, Pj in enumerate(projections):
            if j != i and X[i, j] != 0.0:
                combo = combo + Pj.scaled(X[i, j])
        defect = max(defect, Pi.commutator(combo).norm())
    return defect


def improving_direction(
    A: BlockOperator, B: BlockOperator, state: TracialState
) -> ImprovingDirection:
    """
    H = i[B,A] and the slope f′(0) = τ([B,A]*[B,A]) of f(t) = τ(A e^{iHt} B e^{−iHt}).

    The slope is positive iff A and B do not commute, so a slice optimum
    must satisfy the commutation relations.

    Raises:
        PreconditionError: If A or B is not hermitian.
    """
    if not (A.hermitian and B.hermitian):
        raise PreconditionError("improving_direction needs hermitian A and B", "hermitian")
    K = B.commutator(A)
    H = K.scaled(1j)
    derivative = trace(state, K.adjoint() @ K)
    return ImprovingDirection(H=H, derivative=derivative)


def perturbation_value(
    A: BlockOperator, B: BlockOperator, H: BlockOperator, t: float, state: TracialState
) -> float:
    """f(t) = τ(A e^{iHt} B e^{−iHt})."""
    blocks = []
    for a, b, h in zip(A.blocks, B.blocks, H.blocks):
        U = expm(1j * t * h)
        blocks.append(a @ U @ b @ U.conj().T)
    return trace(state, BlockOperator(blocks=tuple(blocks)))


def finite_difference(
    A: BlockOperator, B: BlockOperator, H: BlockOperator, state: TracialState, h: float = 1e-4
) -> float:
    """Central difference (f(h) − f(−h)) / 2h."""
    return (
        perturbation_value(A, B, H, h, state) - perturbation_value(A, B, H, -h, state)
    ) / (2.0 * h)


# ─── Sampling oracle for D_q(n) ───────────────────────────────────────────────


def _sample_chunk(
    args: tuple[np.random.SeedSequence, int, int, int, int],
) -> tuple[np.ndarray, np.ndarray]:
    """One independently seeded stream of ``size`` samples."""
    seed_seq, size, n, d, max_blocks = args
    rng = np.random.default_rng(seed_seq)
    pairs = pair_indices(n)

    block_counts = rng.integers(1, max_blocks + 1, size=size)
    active = np.arange(max_blocks)[None, :] < block_counts[:, None]
    weights = rng.gamma(1.0, size=(size, max_blocks)) * active
    weights /= weights.sum(axis=1, keepdims=True)
    dims = rng.integers(1, d + 1, size=(size, max_blocks))
    ranks = rng.integers(0, dims[:, :, None] + 1, size=(size, max_blocks, n))

    y = np.zeros((size, n))
    w = np.zeros((size, len(pairs)))
    for dim in range(1, d + 1):
        rows, cols = np.nonzero(active & (dims == dim))
        if rows.size == 0:
            continue
        count = rows.size
        g = rng.standard_normal((count, n, dim, dim)) + 1j * rng.standard_normal(
            (count, n, dim, dim)
        )
        q, _ = np.linalg.qr(g)
        r = ranks[rows, cols]  # (count, n)
        mask = np.arange(dim)[None, None, :] < r[:, :, None]
        V = q * mask[:, :, None, :]
        scale = weights[rows, cols] / dim
        np.add.at(y, rows, scale[:, None] * r)
        if pairs:
            overlap = np.einsum("sian,sjam->sijnm", V.conj(), V)
            traces = (np.abs(overlap) ** 2).sum(axis=(3, 4))
            pair_traces = np.stack([traces[:, i, j] for i, j in pairs], axis=1)
            np.add.at(w, rows, scale[:, None] * pair_traces)
    return np.clip(y, 0.0, 1.0), w


def sample_dq(
    n: int,
    d: int,
    count: int,
    seed: int,
    *,
    max_blocks: Optional[int] = None,
    chunk_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> SampleSet:
    """
    Points (τ(P_i))_i and (τ(P_iP_j))_{i<j} of random tracial models.

    Each sample draws 1..max_blocks blocks of dimension ≤ d, Dirichlet block
    weights, and per question and block a projection of random rank. The index
    range is split into chunks with independently spawned seeds, so serial and
    parallel runs return identical sets.
    """
    settings = get_settings()
    max_blocks = max_blocks or settings.sample_max_blocks
    chunk_size = chunk_size or settings.sample_chunk_size
    workers = workers or settings.sample_workers
    if d * max_blocks > settings.max_total_dim:
        raise MalformedInputError(
            f"dim {d} × {max_blocks} blocks exceeds max_total_dim {settings.max_total_dim}",
            "max-total-dim",
        )

    sizes = [min(chunk_size, count - start) for start in range(0, count, chunk_size)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(s, size, n, d, max_blocks) for s, size in zip(streams, sizes)]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_chunk, jobs))
    else:
        parts = [_sample_chunk(job) for job in jobs]

    y = np.vstack([part[0] for part in parts]) if parts else np.zeros((0, n))
    w = np.vstack([part[1] for part in parts]) if parts else np.zeros((0, pair_count(n)))
    logger.info(
        "D_q samples drawn",
        extra={"n": n, "dim": d, "count": count, "streams": len(jobs), "workers": workers},
    )
    return SampleSet(n=n, y=y, w=w)
