"""
Unit tests for slice support values: pair bounds, the atom LP, local and
quantum slices, and dominance checks.
"""

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from src.application import slices
from src.application.universal3 import scalar_atoms
from src.domain import (
    CorrelationClass,
    DominanceStatus,
    InfeasibleProgramError,
    MalformedInputError,
    SampleSet,
    Side,
    SliceQuery,
    UnsupportedError,
)


HALF = (0.5, 0.5, 0.5)
ONES = (1.0, 1.0, 1.0)


def _query(y, x, cls="q", side="upper"):
    return SliceQuery(n=len(y), y=tuple(y), x=tuple(x), cls=CorrelationClass(cls), side=Side(side))


unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
weight = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False).filter(lambda v: abs(v) >= 0.25)


class TestPairBounds:
    def test_example(self):
        bounds = slices.pair_bounds(0.7, 0.6)
        assert bounds.lower == pytest.approx(0.3)
        assert bounds.upper == pytest.approx(0.6)

    def test_half(self):
        bounds = slices.pair_bounds(0.5, 0.5)
        assert (bounds.lower, bounds.upper) == (0.0, 0.5)

    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
    def test_identity_forces_value(self, t):
        bounds = slices.pair_bounds(1.0, t)
        assert bounds.lower == pytest.approx(t)
        assert bounds.upper == pytest.approx(t)

    def test_out_of_range(self):
        with pytest.raises(MalformedInputError):
            slices.pair_bounds(1.2, 0.5)

    def test_witness_overlaps(self):
        bounds = slices.pair_bounds(0.7, 0.6)

        def overlap(witness):
            (a0, a1), (b0, b1) = witness
            return max(0.0, min(a1, b1) - max(a0, b0))

        assert overlap(bounds.upper_witness) == pytest.approx(bounds.upper)
        assert overlap(bounds.lower_witness) == pytest.approx(bounds.lower)

    def test_composite_value(self):
        value = slices.pair_bounds_value((0.5, 0.6, 0.7), (0.0, 1.0, -1.0))
        assert value == pytest.approx(0.2)


class TestLpSolve:
    def test_single_atom(self):
        atom = scalar_atoms()[7]
        solution = slices.lp_solve([atom], ONES, ONES)
        assert solution.weights == (1.0,)
        assert solution.value == pytest.approx(3.0)

    def test_local_lower(self):
        solution = slices.lp_solve(scalar_atoms(), ONES, HALF, Side.LOWER)
        assert solution.value == pytest.approx(0.5, abs=1e-12)
        assert solution.bases_checked == 8 + 28 + 56 + 70

    def test_infeasible(self):
        with pytest.raises(InfeasibleProgramError) as exc:
            slices.lp_solve(scalar_atoms(), ONES, (1.5, 0.5, 0.5))
        assert exc.value.bases_checked > 0
        assert exc.value.constraint == "lp-feasibility"

    def test_atom_cap(self):
        with pytest.raises(UnsupportedError):
            slices.lp_solve(slices.local_atoms(4) + slices.local_atoms(4)[:1], (0,) * 6, (0.5,) * 4)

    def test_deterministic_ties(self):
        a = slices.lp_solve(scalar_atoms(), (0.0, 0.0, 0.0), HALF)
        b = slices.lp_solve(scalar_atoms(), (0.0, 0.0, 0.0), HALF)
        assert a.support == b.support


class TestSliceLocal:
    def test_lower(self):
        result = slices.slice_local(_query(HALF, ONES, "loc", "lower"))
        assert result.value == pytest.approx(0.5, abs=1e-12)

    def test_upper(self):
        result = slices.slice_local(_query(HALF, ONES, "loc", "upper"))
        assert result.value == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("side", ["upper", "lower"])
    def test_full_diagonal(self, side):
        x = (0.5, -2.0, 1.5)
        result = slices.slice_local(_query(ONES, x, "loc", side))
        assert result.value == pytest.approx(sum(x))

    def test_four_questions(self):
        result = slices.slice_local(_query((0.5,) * 4, (1.0,) * 6, "loc", "lower"))
        assert result.realizing_model.algebra.block_count == 16
        assert result.max_residual <= 1e-10

    def test_too_many_questions(self):
        with pytest.raises(UnsupportedError):
            slices.slice_local(_query((0.5,) * 5, (1.0,) * 10, "loc"))

    def test_realizing_model_is_commutative(self):
        result = slices.slice_local(_query((0.3, 0.6, 0.8), (1.0, -1.0, 2.0), "loc"))
        assert set(result.realizing_model.algebra.block_dims) == {1}
        assert result.max_residual <= 1e-10


class TestSliceQ3:
    """Exact quantum slices for three questions."""

    def test_quantum_local_gap(self):
        q = slices.slice_q3(_query(HALF, ONES, "q", "lower"))
        loc = slices.slice_local(_query(HALF, ONES, "loc", "lower"))
        assert q.value == pytest.approx(0.375, abs=1e-12)
        assert loc.value - q.value == pytest.approx(0.125, abs=1e-12)
        assert q.weights[-1] == pytest.approx(1.0)
        assert q.atom_labels[-1] == "m2"

    def test_direction_near_double_root(self):
        x = (-1.068095033663107, -0.7299905135306866, 1.0)
        result = slices.slice_q3(_query(HALF, x, "q", "lower"))
        loc = slices.slice_local(_query(HALF, x, "loc", "lower"))
        assert result.value <= loc.value + 1e-12

    def test_upper_matches_local(self):
        result = slices.slice_q3(_query(HALF, ONES))
        assert result.value == pytest.approx(1.5, abs=1e-12)

    def test_degenerate_direction(self):
        y, x = (0.5, 0.6, 0.7), (0.0, 1.0, -1.0)
        q = slices.slice_q3(_query(y, x))
        loc = slices.slice_local(_query(y, x, "loc"))
        assert q.degenerate_path
        assert q.value == pytest.approx(0.2, abs=1e-12)
        assert abs(q.value - loc.value) <= 1e-12

    def test_requires_three_questions(self):
        with pytest.raises(UnsupportedError) as exc:
            slices.slice_q3(_query((0.5,) * 4, (1.0,) * 6))
        assert exc.value.constraint == "exact-mode"

    def test_no_m2_fallback(self):
        result = slices.slice_q3(_query(HALF, (0.1, 1.0, 1.0), side="lower"))
        assert result.degenerate_path
        assert len(result.weights) == 8

    def test_realizing_model_residuals(self):
        result = slices.slice_q3(_query(HALF, ONES, "q", "lower"))
        assert result.max_residual <= 1e-10
        assert result.rep is not None and result.rep.has_m2

    def test_achieved_w_matches_value(self):
        result = slices.slice_q3(_query((0.4, 0.7, 0.5), (1.0, -2.0, 0.5), side="lower"))
        assert np.dot(result.query.x, result.achieved_w) == pytest.approx(result.value, abs=1e-12)

    def test_extreme_point(self):
        result = slices.slice_q3(_query(HALF, ONES, "q", "lower"))
        matrix = slices.extreme_point(result)
        assert np.allclose(np.diag(matrix.w), 0.5)
        assert np.allclose(matrix.upper(), 0.125)

    def test_compute_slice_dispatch(self):
        assert slices.compute_slice(_query(HALF, ONES, "loc", "lower")).value == pytest.approx(0.5)
        assert slices.compute_slice(_query(HALF, ONES, "q", "lower")).value == pytest.approx(0.375)

    @seed(7)
    @settings(max_examples=60, deadline=None)
    @given(st.tuples(unit, unit, unit), st.tuples(weight, weight, weight))
    def test_lower_is_negated_upper(self, y, x):
        lower = slices.slice_q3(_query(y, x, side="lower"))
        negated_x = tuple(-v for v in x)
        upper = slices.slice_q3(_query(y, negated_x, side="upper"))
        assert lower.value == pytest.approx(-upper.value, abs=1e-12)

    @seed(11)
    @settings(max_examples=60, deadline=None)
    @given(st.tuples(unit, unit, unit), st.tuples(weight, weight, weight), st.sampled_from(["upper", "lower"]))
    def test_local_set_is_inside_quantum_set(self, y, x, side):
        q = slices.slice_q3(_query(y, x, "q", side)).value
        loc = slices.slice_local(_query(y, x, "loc", side)).value
        if side == "upper":
            assert loc <= q + 1e-10
        else:
            assert q <= loc + 1e-10


class TestDegenerateAgreement:
    """Directions with a zero component are attained commutatively."""

    def test_seeded_queries(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            y = rng.uniform(0.0, 1.0, size=3)
            x = rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], size=3)
            x[rng.choice(3, size=rng.integers(1, 4), replace=False)] = 0.0
            side = "upper" if rng.random() < 0.5 else "lower"
            q = slices.slice_q3(_query(y, x, "q", side)).value
            loc = slices.slice_local(_query(y, x, "loc", side)).value
            closed = slices.pair_bounds_value(y, x, Side(side))
            assert abs(q - loc) <= 1e-12
            assert abs(q - closed) <= 1e-12


class TestDppFunctional:
    def test_midpoint(self):
        assert slices.dpp_functional(0.5) == pytest.approx(9 / 4, abs=1e-12)
        assert slices.dpp_functional(0.5, CorrelationClass.LOC) == pytest.approx(2.5, abs=1e-12)

    def test_endpoints(self):
        assert slices.dpp_functional(0.0) == pytest.approx(0.0, abs=1e-12)
        assert slices.dpp_functional(1.0) == pytest.approx(9.0, abs=1e-12)


class TestDominance:
    """Sampled D_q(3) points against exact bounds."""

    def test_landmark_sample(self):
        y, w = slices.landmark_sample()
        assert np.allclose(y, 0.5)
        assert np.allclose(w, 0.125)

    def test_random_queries(self, small_samples):
        queries = slices.random_queries(30, seed=3, samples=small_samples)
        assert len(queries) == 30
        assert queries == slices.random_queries(30, seed=3, samples=small_samples)
        assert all(q.cls == CorrelationClass.Q and q.n == 3 for q in queries)

    def test_small_run_is_clean(self, small_samples):
        queries = slices.random_queries(20, seed=1, samples=small_samples)
        report = slices.dominance_check(slices.with_landmark(small_samples), queries)
        assert report.clean
        assert report.covered >= 10

    def test_landmark_attains_lower_bound(self, small_samples):
        samples = slices.with_landmark(small_samples)
        report = slices.dominance_check(samples, [_query(HALF, ONES, side="lower")], delta=0.0)
        entry = report.entries[0]
        assert entry.status == DominanceStatus.PASS
        assert entry.bound == pytest.approx(0.375)
        assert entry.max_excess == pytest.approx(0.0, abs=1e-12)

    def test_empty_neighborhood_is_no_data(self):
        samples = SampleSet(n=3, y=np.array([[0.0, 0.0, 0.0]]), w=np.zeros((1, 3)))
        report = slices.dominance_check(samples, [_query(HALF, ONES)], delta=0.01)
        assert report.entries[0].status == DominanceStatus.NO_DATA
        assert not report.clean

    def test_violation_reported(self):
        samples = SampleSet(n=3, y=np.array([HALF]), w=np.array([[0.0, 0.0, 0.0]]))
        report = slices.dominance_check(samples, [_query(HALF, ONES, side="lower")], delta=0.0)
        assert report.entries[0].status == DominanceStatus.FAIL
        assert report.entries[0].max_excess == pytest.approx(0.375)

    def test_requires_three_questions(self):
        samples = SampleSet(n=2, y=np.zeros((1, 2)), w=np.zeros((1, 1)))
        with pytest.raises(MalformedInputError):
            slices.dominance_check(samples, [])
