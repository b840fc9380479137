"""
Unit tests for tracial models: synthesis, random operators, trace
orthogonality, commutation defects, the unitary perturbation and sampling.
"""

from itertools import product

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from src.application import tracial_models as tm
from src.application.correlation_sets import restrict, validate
from src.domain import (
    BlockAlgebra,
    BlockOperator,
    MalformedInputError,
    ModelInvalidError,
    PreconditionError,
    TracialModel,
    TracialState,
)

E11 = np.array([[1.0, 0.0], [0.0, 0.0]])
PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])
HALF_TRACE = TracialState(weights=(1.0,))


def _op(*blocks):
    return BlockOperator(blocks=tuple(np.asarray(b) for b in blocks))


def _random_hermitian(rng, dims):
    blocks = []
    for d in dims:
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = (g + g.conj().T) / 2
        blocks.append(h / np.linalg.norm(h, 2))
    return BlockOperator(blocks=tuple(blocks))


class TestTrace:
    def test_normalized_block_trace(self):
        state = TracialState(weights=(0.25, 0.75))
        X = _op(np.eye(1), np.diag([1.0, 0.0]))
        assert tm.trace(state, X) == pytest.approx(0.25 + 0.75 * 0.5)

    def test_weight_count_mismatch(self):
        with pytest.raises(MalformedInputError):
            tm.trace(TracialState(weights=(0.5, 0.5)), _op(np.eye(2)))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(MalformedInputError):
            TracialState(weights=(0.5, 0.6))


class TestTraceAxioms:
    """Unit, cyclicity and positivity of block traces on random elements."""

    @staticmethod
    def _random_element(rng, dims):
        return _op(
            *(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for d in dims)
        )

    @staticmethod
    def _random_state(rng, count):
        weights = rng.dirichlet(np.ones(count))
        return TracialState(weights=tuple(weights / weights.sum()))

    @seed(20240502)
    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_axioms(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        dims = tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(1, 4))))
        state = self._random_state(rng, len(dims))
        X = self._random_element(rng, dims)
        Y = self._random_element(rng, dims)

        assert tm.trace(state, BlockOperator.identity(dims)) == pytest.approx(1.0, abs=1e-12)
        assert abs(tm.trace_complex(state, X @ Y) - tm.trace_complex(state, Y @ X)) <= 1e-12 * max(
            1.0, X.norm() * Y.norm()
        )
        assert tm.trace(state, X.adjoint() @ X) >= -1e-12

    def test_zero_weight_block_is_invisible(self):
        state = TracialState(weights=(1.0, 0.0))
        X = _op(np.zeros((1, 1)), np.eye(2))
        assert tm.trace(state, X.adjoint() @ X) == 0.0


class TestSynthesize:
    """Tests for p(i,j|x,y) = τ(E_{x,i} E_{y,j})."""

    def test_qubit_model(self, qubit_model):
        t = tm.synthesize(qubit_model)
        assert t.p[0, 0, 0, 0] == pytest.approx(0.5)
        assert t.p[0, 1, 0, 0] == pytest.approx(0.25)
        assert validate(t).all_pass

    def test_synthesized_correlations_are_synchronous(self, random_model):
        t = tm.synthesize(random_model)
        assert validate(t, 1e-12).all_pass

    def test_non_idempotent_named(self):
        model = tm.two_outcome_model(
            [_op([[0.5, 0.0], [0.0, 0.0]])], BlockAlgebra(block_dims=(2,)), HALF_TRACE
        )
        with pytest.raises(ModelInvalidError) as exc:
            tm.synthesize(model)
        assert exc.value.constraint == "projection:x=0,i=0,block=0"

    def test_overlapping_outcomes_named(self):
        P = _op(E11)
        model = TracialModel(
            algebra=BlockAlgebra(block_dims=(2,)), trace=HALF_TRACE, pvms=((P, P),)
        )
        with pytest.raises(ModelInvalidError) as exc:
            tm.synthesize(model)
        assert exc.value.constraint == "orthogonality:x=0,i=0,j=1,block=0"

    def test_incomplete_pvm_named(self):
        model = TracialModel(
            algebra=BlockAlgebra(block_dims=(2,)),
            trace=HALF_TRACE,
            pvms=((_op(E11), BlockOperator.zero((2,))),),
        )
        with pytest.raises(ModelInvalidError) as exc:
            tm.synthesize(model)
        assert exc.value.constraint == "completeness:x=0,block=0"

    def test_two_outcome_bridge(self, qubit_model):
        matrix = restrict(tm.synthesize(qubit_model))
        assert np.allclose(matrix.w, [[0.5, 0.25], [0.25, 0.5]])


class TestRandomOperators:
    @pytest.mark.parametrize("d,rank", [(1, 0), (1, 1), (3, 0), (3, 2), (4, 4)])
    def test_projection_rank(self, d, rank):
        P = tm.random_projection(d, rank, seed=3)
        block = P.blocks[0]
        assert P.projection
        assert np.trace(block).real == pytest.approx(rank)

    def test_rank_out_of_range(self):
        with pytest.raises(MalformedInputError):
            tm.random_projection(2, 3)

    def test_unitary(self):
        U = tm.random_unitary(4, seed=1)
        assert np.abs(U.conj().T @ U - np.eye(4)).max() <= 1e-12

    def test_pvm_partition_of_basis(self):
        pvm = tm.random_pvm(3, 3, seed=2)
        total = sum(P.blocks[0] for P in pvm)
        assert np.abs(total - np.eye(3)).max() <= 1e-12
        assert sorted(round(np.trace(P.blocks[0]).real) for P in pvm) == [1, 1, 1]

    def test_pvm_more_outcomes_than_dimension(self):
        pvm = tm.random_pvm(2, 4, seed=2)
        ranks = sorted(round(np.trace(P.blocks[0]).real) for P in pvm)
        assert ranks == [0, 0, 1, 1]

    def test_seeded_determinism(self):
        a = tm.random_pvm(3, 2, seed=9)
        b = tm.random_pvm(3, 2, seed=9)
        assert all(np.array_equal(x.blocks[0], y.blocks[0]) for x, y in zip(a, b))


class TestOrthogonality:
    """Trace-orthogonal projections are orthogonal and complete."""

    @pytest.mark.parametrize("rng_seed", range(5))
    def test_partition_projections(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        small = tm.random_pvm(2, 3, rng)
        large = tm.random_pvm(3, 3, rng)
        projections = [_op(s.blocks[0], g.blocks[0]) for s, g in zip(small, large)]
        verdict = tm.orthogonality_to_pvm(projections, TracialState(weights=(0.3, 0.7)), 1e-9)
        assert verdict.hypothesis_met
        assert verdict.max_product_norm <= 1e-6
        assert verdict.normalization_hypothesis_met
        assert verdict.sum_residual <= 1e-6
        assert verdict.bound_holds

    def test_constant(self):
        verdict = tm.orthogonality_to_pvm(
            [_op(np.eye(1), E11)], TracialState(weights=(0.5, 0.5)), 1e-9
        )
        assert verdict.constant == pytest.approx(2.0)

    def test_overlap_detected(self):
        verdict = tm.orthogonality_to_pvm([_op(E11), _op(PLUS)], HALF_TRACE, 1e-9)
        assert not verdict.hypothesis_met
        assert verdict.max_trace_pairing == pytest.approx(0.25)
        assert verdict.sum_residual is None
        assert verdict.bound_holds

    def test_requires_faithful_trace(self):
        with pytest.raises(PreconditionError):
            tm.orthogonality_to_pvm(
                [_op(np.eye(1), E11)], TracialState(weights=(1.0, 0.0)), 1e-9
            )


class TestCommutatorDefect:
    def test_commuting_projections(self):
        projections = [_op(np.diag([1.0, 0.0])), _op(np.diag([1.0, 1.0])), _op(np.diag([0.0, 1.0]))]
        assert tm.commutator_defect(projections, (1.0, 2.0, -1.0)) == 0.0

    def test_noncommuting_pair(self, qubit_model):
        assert tm.commutator_defect(qubit_model, (1.0,)) == pytest.approx(0.5)

    def test_zero_weight_ignores_pair(self, qubit_model):
        assert tm.commutator_defect(qubit_model, (0.0,)) == 0.0

    def test_direction_length_checked(self, qubit_model):
        with pytest.raises(MalformedInputError):
            tm.commutator_defect(qubit_model, (1.0, 1.0))


class TestImprovingDirection:
    """Optima must satisfy the commutation relations."""

    def test_qubit_pair(self):
        direction = tm.improving_direction(_op(E11), _op(PLUS), HALF_TRACE)
        assert direction.derivative == pytest.approx(0.25)
        assert direction.H.hermitian

    def test_commuting_pair_has_zero_slope(self):
        direction = tm.improving_direction(_op(E11), _op(np.eye(2)), HALF_TRACE)
        assert direction.derivative == pytest.approx(0.0)

    def test_requires_hermitian(self):
        with pytest.raises(PreconditionError):
            tm.improving_direction(_op([[0.0, 1.0], [0.0, 0.0]]), _op(E11), HALF_TRACE)

    def test_value_at_zero(self):
        H = tm.improving_direction(_op(E11), _op(PLUS), HALF_TRACE).H
        assert tm.perturbation_value(_op(E11), _op(PLUS), H, 0.0, HALF_TRACE) == pytest.approx(0.25)

    @seed(20240501)
    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_slope_matches_finite_difference(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        dims = (2, 3)
        weights = rng.dirichlet(np.ones(2))
        state = TracialState(weights=tuple(weights / weights.sum()))
        A = _random_hermitian(rng, dims)
        B = _random_hermitian(rng, dims)
        if A.commutator(B).norm() <= 1e-6:
            return
        direction = tm.improving_direction(A, B, state)
        numeric = tm.finite_difference(A, B, direction.H, state, h=1e-4)
        assert direction.derivative > 0.0
        assert abs(numeric - direction.derivative) <= 1e-6 * direction.derivative


class TestSampleDq:
    """Tests for the D_q(n) sampling oracle."""

    def test_shapes_and_pair_bounds(self, small_samples):
        y, w = small_samples.y, small_samples.w
        assert y.shape == (400, 3)
        assert w.shape == (400, 3)
        assert y.min() >= 0.0 and y.max() <= 1.0
        for k, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
            assert np.all(w[:, k] <= np.minimum(y[:, i], y[:, j]) + 1e-12)
            assert np.all(w[:, k] >= np.maximum(0.0, y[:, i] + y[:, j] - 1.0) - 1e-12)

    def test_deterministic(self):
        a = tm.sample_dq(3, 2, 50, seed=4)
        b = tm.sample_dq(3, 2, 50, seed=4)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.w, b.w)

    def test_parallel_matches_serial(self):
        serial = tm.sample_dq(3, 2, 120, seed=8, chunk_size=40, workers=1)
        parallel = tm.sample_dq(3, 2, 120, seed=8, chunk_size=40, workers=2)
        assert np.array_equal(serial.y, parallel.y)
        assert np.array_equal(serial.w, parallel.w)

    def test_dimension_cap(self):
        with pytest.raises(MalformedInputError):
            tm.sample_dq(3, 20, 10, seed=1, max_blocks=3)

    def test_single_question(self):
        samples = tm.sample_dq(1, 2, 10, seed=1)
        assert samples.w.shape == (10, 0)

    @pytest.mark.parametrize("n", [2, 3])
    def test_commutative_samples_satisfy_local_facets(self, n):
        # Every inequality with coefficients in {-1, 0, 1} on (1, y, w) that holds
        # on all deterministic points; the facets of the local polytope are among them.
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        deterministic = np.array(
            [
                [1.0, *alpha, *(alpha[i] * alpha[j] for i, j in pairs)]
                for alpha in product((0.0, 1.0), repeat=n)
            ]
        )
        coefficients = np.array(list(product((-1.0, 0.0, 1.0), repeat=1 + n + len(pairs))))
        valid = coefficients[(deterministic @ coefficients.T).min(axis=0) >= 0.0]
        assert len(valid) >= 4 * len(pairs)

        samples = tm.sample_dq(n, 1, 2000, seed=6)
        points = np.hstack([np.ones((len(samples.y), 1)), samples.y, samples.w])
        assert (points @ valid.T).min() >= -1e-12
