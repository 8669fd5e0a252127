import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpideals.errors import CapacityError, DomainError, InterpolationError
from lpideals.lp_core import BlockOperator, BlockSpace, lp_norm
from lpideals.opnorm import (
    PowerIterConfig, opnorm_bracket, opnorm_exact_1_to_q, opnorm_exact_from_inf,
    opnorm_exact_to_inf, opnorm_power, opnorm_upper, opnorm_upper_interpolation, ratio,
)

H1 = np.array([[1.0, 1.0], [1.0, -1.0]])


def brute_from_inf(M, q):
    """Independent oracle: max over all sign vectors of |Mx|_q."""
    return max(lp_norm(M @ np.array(s), q) for s in itertools.product((1, -1), repeat=M.shape[1]))


def test_exact_1_to_q():
    T = BlockOperator.between([[1.0, 2.0], [0.0, 1.0]], 1, 1)
    assert opnorm_exact_1_to_q(T) == 3.0
    val, w = opnorm_exact_1_to_q(T, return_witness=True)
    assert ratio(T, w) == val


def test_exact_to_inf():
    T = BlockOperator.between([[1.0, 2.0], [3.0, -4.0]], 2, "inf")
    assert opnorm_exact_to_inf(T) == pytest.approx(5.0)


def test_h1_from_inf_to_l1():
    # brute force over the four sign vectors gives 2
    T = BlockOperator.between(H1, "inf", 1)
    assert opnorm_exact_from_inf(T) == 2.0
    assert brute_from_inf(H1, 1) == 2.0


@pytest.mark.parametrize("q", [1, 1.5, 2, 3, math.inf])
def test_from_inf_matches_brute_force(q):
    M = np.random.default_rng(3).standard_normal((4, 7))
    T = BlockOperator.between(M, "inf", q)
    assert opnorm_exact_from_inf(T) == pytest.approx(brute_from_inf(M, q), rel=1e-12)


def test_from_inf_capacity():
    T = BlockOperator.between(np.ones((1, 30)), "inf", 1)
    with pytest.raises(CapacityError):
        opnorm_exact_from_inf(T)


def test_power_zero_matrix():
    est = opnorm_power(BlockOperator.between(np.zeros((2, 3)), 1.5, 3))
    assert est.value == 0.0


def test_config_validation():
    with pytest.raises(DomainError):
        PowerIterConfig(max_iters=0)


@pytest.mark.parametrize("p,q", [(1.5, 1.5), (3, 1.5), (2, 1), (1.2, 4), (4, 4)])
def test_identity_brackets(p, q):
    T = BlockOperator.between(np.eye(5), p, q)
    expected = 1.0 if p <= q else 5 ** (1 / q - 1 / p)
    br = opnorm_bracket(T)
    assert br.lower == pytest.approx(expected, rel=1e-9)
    assert br.upper == pytest.approx(expected, rel=1e-9)


def test_diagonal_bracket():
    br = opnorm_bracket(BlockOperator.between(np.diag([1.0, -3.0, 2.0]), 1.7, 1.7))
    assert br.lower == pytest.approx(3.0) and br.upper == pytest.approx(3.0)


def test_gaussian_bracket_against_monte_carlo():
    M = np.random.default_rng(0).standard_normal((6, 6))
    T = BlockOperator.between(M, 1.5, 3)
    br = opnorm_bracket(T)
    X = np.random.default_rng(1).standard_normal((200_000, 6))
    mc = (lp_norm(X @ M.T, 3, axis=1) / lp_norm(X, 1.5, axis=1)).max()
    assert br.lower >= 0.98 * mc
    assert br.upper >= br.lower


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_interpolation_between_classical_anchors(n):
    # (4/3, 4) sits halfway between (1, inf) and (2, 2); U_n = 2^{-n/4} H_n has norm <= 1 there
    H = np.array([[1.0]])
    for _ in range(n):
        H = np.block([[H, H], [H, -H]])
    T = BlockOperator.between(2 ** (-n / 4) * H, "4/3", 4)
    val = opnorm_upper_interpolation(T, "4/3", 4, [(1, "inf", None), (2, 2, None)])
    assert val == pytest.approx(1.0, rel=1e-12)


def test_interpolation_without_closed_form():
    T = BlockOperator.between(H1, 1.5, 3)
    with pytest.raises(InterpolationError):
        opnorm_upper_interpolation(T, 1.5, 3, [(1.5, 1.5, None), (2, 2, None)])


def test_block_reduction_on_sum_spaces():
    dom = BlockSpace.sum(1.5, [(2, 2), (2, 3)])
    cod = BlockSpace.sum(3, [(2, 2), (2, 3)])
    T = BlockOperator(np.eye(5), dom, cod)
    br = opnorm_bracket(T)
    assert br.lower == pytest.approx(1.0) and br.upper == pytest.approx(1.0)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 1.3, 2, 2.5, math.inf]),
       st.sampled_from([1, 1.5, 2, 4, math.inf]), st.integers(1, 5), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_bracket_is_consistent(seed, p, q, rows, cols):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, cols))
    T = BlockOperator.between(M, p, q)
    br = opnorm_bracket(T, PowerIterConfig(restarts=2))
    assert br.lower <= br.upper * (1 + 1e-9)
    assert ratio(T, br.witness) == pytest.approx(br.lower, rel=1e-9)
    X = rng.standard_normal((500, cols))
    sampled = (lp_norm(X @ M.T, q, axis=1) / lp_norm(X, p, axis=1)).max()
    assert sampled <= br.upper * (1 + 1e-9)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_upper_is_homogeneous(seed):
    M = np.random.default_rng(seed).standard_normal((3, 4))
    u1 = opnorm_upper(BlockOperator.between(M, 1.5, 3))[0]
    u2 = opnorm_upper(BlockOperator.between(-2.5 * M, 1.5, 3))[0]
    assert u2 == pytest.approx(2.5 * u1, rel=1e-9)
