import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lpideals.errors import CompositionError, DegenerateInputError, DimensionError, DomainError
from lpideals.lp_core import (
    INF, ONE, TWO, BlockOperator, BlockSpace, Exponent, adjoint, block_diagonal, block_duality_map,
    block_norm, compose, direct_sum, dual_exponent, duality_map, identity, lp_norm,
    operator_from_json, operator_to_json,
)

exponents = st.one_of(
    st.sampled_from([1, 1.5, 2, 3, math.inf, "4/3"]),
    st.fractions(min_value=1, max_value=20, max_denominator=50),
)
vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3, allow_nan=False))


class TestExponent:
    def test_dual_pairs(self):
        assert dual_exponent(2) == TWO
        assert dual_exponent(1) == INF
        assert dual_exponent("inf") == ONE
        assert dual_exponent(1.5) == Exponent.of(3)
        assert dual_exponent("4/3") == Exponent.of(4)

    def test_float_parsing_is_decimal(self):
        assert Exponent.of(1.2).value == Fraction(6, 5)
        assert Exponent.of(1.2).dual() == Exponent.of(6)

    @given(exponents)
    def test_double_dual(self, p):
        e = Exponent.of(p)
        assert e.dual().dual() == e

    @pytest.mark.parametrize("bad", [0.5, 0, -1, float("nan"), "-inf"])
    def test_rejects_below_one(self, bad):
        with pytest.raises((DomainError, ValueError)):
            Exponent.of(bad)

    def test_ordering(self):
        assert Exponent.of(1) < Exponent.of(1.5) < TWO < INF
        assert not INF < INF


class TestNorms:
    def test_known_values(self):
        x = np.array([3.0, -4.0])
        assert lp_norm(x, 2) == pytest.approx(5.0)
        assert lp_norm(x, 1) == 7.0
        assert lp_norm(x, INF) == 4.0

    def test_overflow_safe(self):
        x = np.full(4, 1e300)
        assert lp_norm(x, 3) == pytest.approx(1e300 * 4 ** (1 / 3))

    def test_empty_vector(self):
        with pytest.raises(DimensionError):
            lp_norm(np.array([]), 2)

    @given(vectors, exponents)
    def test_monotone_in_p(self, x, p):
        e = Exponent.of(p)
        assert lp_norm(x, e) >= lp_norm(x, INF) * (1 - 1e-12)
        assert lp_norm(x, e) <= lp_norm(x, 1) * (1 + 1e-12) + 1e-300

    @given(vectors, exponents)
    def test_duality_map_norms(self, x, p):
        if not np.any(x):
            return
        e = Exponent.of(p)
        xs = duality_map(x, e)
        assert lp_norm(xs, e.dual()) == pytest.approx(1.0, rel=1e-9)
        assert xs @ x == pytest.approx(lp_norm(x, e), rel=1e-9)

    def test_duality_map_zero(self):
        with pytest.raises(DegenerateInputError):
            duality_map(np.zeros(3), 2)


class TestBlockSpace:
    def test_plain_detection(self):
        assert BlockSpace.sum(2, [(2, 3), (2, 4)]).plain_exponent == TWO
        assert BlockSpace.sum(2, [(3, 1), (2, 4)]).plain_exponent == TWO
        assert BlockSpace.sum(2, [(3, 2), (2, 4)]).plain_exponent is None

    def test_block_norm(self):
        sp = BlockSpace.sum(1, [(2, 2), (INF, 2)])
        x = np.array([3.0, 4.0, -1.0, 7.0])
        assert block_norm(x, sp) == pytest.approx(5.0 + 7.0)

    def test_offsets(self):
        sp = BlockSpace.sum(2, [(2, n) for n in (1, 2, 3)])
        assert sp.total_dim == 6
        assert sp.offsets == (0, 1, 3, 6)
        assert sp.block_slice(2) == slice(3, 6)

    def test_json_round_trip(self):
        sp = BlockSpace.sum("3/2", [(2, 2), ("inf", 3)])
        assert BlockSpace.from_json(sp.to_json()) == sp

    @given(st.lists(st.tuples(exponents, st.integers(1, 4)), min_size=1, max_size=4), exponents,
           st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=60)
    def test_block_duality(self, blocks, outer, seed):
        sp = BlockSpace.sum(outer, blocks)
        x = np.random.default_rng(seed).standard_normal(sp.total_dim)
        xs = block_duality_map(x, sp)
        assert block_norm(xs, sp.dual()) == pytest.approx(1.0, rel=1e-9)
        assert xs @ x == pytest.approx(block_norm(x, sp), rel=1e-9)


class TestOperators:
    def test_shape_check(self):
        with pytest.raises(DimensionError):
            BlockOperator(np.eye(3), BlockSpace.lp(2, 2), BlockSpace.lp(2, 3))

    def test_matrix_is_frozen_copy(self):
        m = np.eye(2)
        T = BlockOperator.between(m, 2, 2)
        m[0, 0] = 5
        assert T.matrix[0, 0] == 1
        with pytest.raises(ValueError):
            T.matrix[0, 0] = 3

    def test_compose_checks_spaces(self):
        A = BlockOperator.between(np.eye(2), 2, 3)
        B = BlockOperator.between(np.eye(2), 1, 2)
        assert np.array_equal((A @ B).matrix, np.eye(2))
        with pytest.raises(CompositionError):
            compose(B, A)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_adjoint_reverses_composition(self, seed):
        rng = np.random.default_rng(seed)
        A = BlockOperator.between(rng.standard_normal((3, 4)), 2, 3)
        B = BlockOperator.between(rng.standard_normal((4, 5)), 1.5, 2)
        lhs = adjoint(compose(A, B))
        rhs = compose(adjoint(B), adjoint(A))
        np.testing.assert_allclose(lhs.matrix, rhs.matrix, rtol=1e-12, atol=1e-12)
        assert lhs.domain.equivalent(rhs.domain) and lhs.codomain.equivalent(rhs.codomain)

    def test_direct_sum_and_block_diagonal(self):
        A = BlockOperator.between(np.ones((1, 2)), 2, 2)
        B = BlockOperator.between(2 * np.ones((2, 1)), 2, 2)
        D = direct_sum(A, B)
        assert D.shape == (3, 3)
        np.testing.assert_array_equal(D.block(1, 0), np.zeros((2, 2)))
        E = block_diagonal([A, B], 2, 2)
        assert np.array_equal(D.matrix, E.matrix)

    def test_direct_sum_outer_mismatch(self):
        A = BlockOperator.between(np.eye(2), 2, 2)
        B = BlockOperator.between(np.eye(2), 3, 3)
        with pytest.raises(CompositionError):
            direct_sum(A, B)

    def test_identity_and_apply(self):
        sp = BlockSpace.lp(1.5, 3)
        I = identity(sp)
        assert np.array_equal(I([1, 2, 3]), [1, 2, 3])
        with pytest.raises(DimensionError):
            I([1, 2])

    def test_json_round_trip(self):
        T = BlockOperator(np.arange(6.0).reshape(2, 3), BlockSpace.sum(2, [(1, 1), (3, 2)]),
                          BlockSpace.lp("inf", 2))
        obj = operator_to_json(T)
        assert obj["data"] == [0, 1, 2, 3, 4, 5]
        assert operator_from_json(obj) == T
