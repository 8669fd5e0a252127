import numpy as np
import pytest

from lpideals.constructions import (
    TruncationPlan, build_S, build_T, build_Tpq, build_U, formal_identity_section, hadamard,
    hadamard_scale, scaled_hadamard_block,
)
from lpideals.errors import CapacityError, ConfigError, DomainError
from lpideals.khintchine import khintchine_system
from lpideals.lp_core import block_norm, lp_norm
from lpideals.opnorm import opnorm_bracket


def test_hadamard_small():
    assert np.array_equal(hadamard(0), [[1]])
    assert np.array_equal(hadamard(1), [[1, 1], [1, -1]])
    H3 = hadamard(3)
    assert np.array_equal(H3 @ H3.T, 8 * np.eye(8, dtype=np.int64))
    assert H3.dtype.kind == "i"


def test_hadamard_capacity():
    with pytest.raises(CapacityError):
        hadamard(14)
    with pytest.raises(DomainError):
        hadamard(-1)


def test_scale_formula():
    assert hadamard_scale(3, "4/3", 3) == pytest.approx(2 ** -1)
    assert hadamard_scale(2, 1.5, 4) == pytest.approx(2 ** (-2 / 3))


def test_scaled_block_n0():
    U0 = scaled_hadamard_block(0, 1.5, 3)
    assert U0.matrix.tolist() == [[1.0]]


@pytest.mark.parametrize("p,q", [(1.5, 4), (1.2, 2.5), (1.8, 3)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_scaled_block_norm_at_most_one(p, q, n):
    br = opnorm_bracket(scaled_hadamard_block(n, p, q))
    assert br.upper <= 1 + 1e-9
    assert br.lower >= 0.5


def test_scaled_block_requires_range():
    with pytest.raises(ConfigError):
        scaled_hadamard_block(2, 2.5, 3)


def test_build_U_structure():
    U = build_U(1.5, 3, TruncationPlan(3))
    assert U.shape == (14, 14)
    assert np.array_equal(U.block(1, 1), scaled_hadamard_block(2, 1.5, 3).matrix)
    for a in range(3):
        for b in range(3):
            if a != b:
                assert not U.block(a, b).any()
    U1 = build_U(1.5, 3, TruncationPlan(1))
    assert np.array_equal(U1.matrix, scaled_hadamard_block(1, 1.5, 3).matrix)


def test_build_U_norm():
    assert opnorm_bracket(build_U(1.5, 4, TruncationPlan(4))).upper <= 1 + 1e-9


def test_plan_validation():
    with pytest.raises(ConfigError):
        TruncationPlan(0)
    with pytest.raises(ConfigError):
        TruncationPlan(3, "quadratic")
    with pytest.raises(CapacityError):
        TruncationPlan(13)
    assert TruncationPlan(8).total_dim == 2 * (2 ** 8 - 1)


def test_formal_identity():
    I = formal_identity_section(1.5, 3, 5)
    br = opnorm_bracket(I)
    assert br.lower == pytest.approx(1.0) and br.upper == pytest.approx(1.0)
    ones = np.ones(5)
    assert lp_norm(I(ones), 3) / lp_norm(ones, 1.5) == pytest.approx(5 ** (1 / 3 - 2 / 3))
    assert formal_identity_section(1, 2, 1).matrix.tolist() == [[1.0]]
    with pytest.raises(DomainError):
        formal_identity_section(3, 1.5, 2)


def test_build_Tpq():
    T = build_Tpq(1.5, 3, TruncationPlan(3, "linear"))
    assert T.shape == (6, 6) and np.array_equal(T.matrix, np.eye(6))
    x = np.zeros(6)
    x[1:3] = [0.6, 0.8]
    assert block_norm(T(x), T.codomain) == pytest.approx(1.0)
    assert build_Tpq(1.5, 3, TruncationPlan(1, "linear")).shape == (1, 1)


@pytest.mark.parametrize("p,q", [(1.5, 3), (1.2, 4)])
def test_S_maps_system_to_unit_vectors(p, q):
    plan = TruncationPlan(5, "khintchine")
    S = build_S(p, q, plan)
    for n in range(1, 6):
        sys = khintchine_system(n, p)
        img = S.block(n - 1, n - 1) @ sys.vectors.T
        assert np.abs(img - np.eye(n)).max() <= 1e-12
        for m in range(1, 6):
            if m != n:
                assert not S.block(m - 1, n - 1).any()


def test_S_single_block():
    p = 1.5
    S = build_S(p, 3, TruncationPlan(1, "khintchine"))
    c = 2 ** (-1 / 3)  # 2^{-1/p'} with p' = 3
    np.testing.assert_allclose(S.matrix, [[c, -c]])
    x = 2 ** (-1 / p) * np.array([1.0, -1.0])
    assert S(x)[0] == pytest.approx(1.0)


def test_S_kernel():
    S = build_S(1.5, 3, TruncationPlan(2, "khintchine"))
    v = np.zeros(6)
    v[2:] = [1, -1, -1, 1]  # r_1 r_2, orthogonal to both Rademacher rows of block 2
    assert np.abs(S(v)).max() <= 1e-15


def test_T_columns():
    q = 3
    T = build_T(1.5, q, TruncationPlan(4, "khintchine"))
    np.testing.assert_allclose(build_T(1.5, q, TruncationPlan(1, "khintchine")).matrix,
                               [[2 ** (-1 / q)], [-(2 ** (-1 / q))]])
    for n in range(1, 5):
        blk = T.block(n - 1, n - 1)
        np.testing.assert_allclose(lp_norm(blk, q, axis=0), 1.0, rtol=1e-14)
        G = blk.T @ blk
        assert np.abs(G - np.diag(np.diag(G))).max() <= 1e-14


def test_mismatched_systems():
    plan = TruncationPlan(2, "khintchine")
    with pytest.raises(ConfigError):
        build_S(1.5, 3, plan, [khintchine_system(1, 1.5)])
    with pytest.raises(ConfigError):
        build_S(1.5, 3, plan, [khintchine_system(1, 1.5), khintchine_system(2, 1.2)])
    with pytest.raises(ConfigError):
        build_T(1.5, 3, plan, [khintchine_system(1, 1.5), khintchine_system(2, 1.5)])
