"""
Test fixtures and shared configuration for all tests.
"""

import logging
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure project root is on path
PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

# Keep test logs quiet and machine-readable; set BEFORE importing settings
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ.setdefault("LOG_FORMAT", "json")

FIXTURES = PROJECT_ROOT / "tests" / "fixtures"


# ── Settings ──────────────────────────────────────────────────────────────────


@pytest.fixture(autouse=True)
def restore_root_logging():
    """configure_logging replaces root handlers; put pytest's back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def test_settings():
    """Settings with defaults and a small sampling budget."""
    from src.config.settings import Settings

    return Settings(sample_count=500, query_count=20)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


# ── Correlations ──────────────────────────────────────────────────────────────


@pytest.fixture
def remark_exact():
    """The remark tensors p, q, s as exact Fraction arrays."""
    from src.application.correlation_sets import remark_tensors

    return remark_tensors()


@pytest.fixture
def remark_p():
    from src.application.correlation_sets import as_tensor, remark_tensors

    return as_tensor(remark_tensors()[0])


@pytest.fixture
def two_question_matrix():
    """A feasible element of D(2): w = [[.5, .2], [.2, .4]]."""
    from src.domain import CorrelationMatrix

    return CorrelationMatrix(n=2, w=np.array([[0.5, 0.2], [0.2, 0.4]]))


# ── Tracial models ────────────────────────────────────────────────────────────


@pytest.fixture
def qubit_model():
    """
    Two questions on M_2 with the normalized trace: P_0 = e11 and P_1 the
    projection onto (1, 1)/√2, so τ(P_0P_1) = 1/4.
    """
    from src.application.tracial_models import two_outcome_model
    from src.domain import BlockAlgebra, BlockOperator, TracialState

    P0 = BlockOperator(blocks=(np.array([[1.0, 0.0], [0.0, 0.0]]),))
    P1 = BlockOperator(blocks=(np.array([[0.5, 0.5], [0.5, 0.5]]),))
    return two_outcome_model(
        [P0, P1], BlockAlgebra(block_dims=(2,)), TracialState(weights=(1.0,))
    )


@pytest.fixture
def random_model():
    """Three questions, three outcomes, blocks M_2 ⊕ M_3 with weights (.4, .6)."""
    from src.application.tracial_models import random_pvm
    from src.domain import BlockAlgebra, BlockOperator, TracialModel, TracialState

    rng = np.random.default_rng(11)
    pvms = []
    for _ in range(3):
        small = random_pvm(2, 3, rng)
        large = random_pvm(3, 3, rng)
        pvms.append(
            tuple(
                BlockOperator(blocks=(s.blocks[0], g.blocks[0])) for s, g in zip(small, large)
            )
        )
    return TracialModel(
        algebra=BlockAlgebra(block_dims=(2, 3)),
        trace=TracialState(weights=(0.4, 0.6)),
        pvms=tuple(pvms),
    )


# ── Universal algebra ─────────────────────────────────────────────────────────


@pytest.fixture
def rep11():
    from src.application.universal3 import build_rep

    return build_rep(1.0, 1.0)


@pytest.fixture
def rep12():
    from src.application.universal3 import build_rep

    return build_rep(1.0, 2.0)


@pytest.fixture
def small_samples():
    """A small seeded D_q(3) sample set."""
    from src.application.tracial_models import sample_dq

    return sample_dq(3, 3, 400, seed=5)
