import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpideals.constructions import TruncationPlan, build_S, build_T
from lpideals.errors import ConfigError, DimensionError
from lpideals.ideal_functionals import (
    DecayRow, DecayTable, FunctionalSpec, SamplerConfig, decay_experiment_phi, decay_experiment_psi,
    loglog_slope, phi_chain, phi_n, phi_spec, psi_chain, psi_n, psi_spec, separation_certificate,
)
from lpideals.khintchine import khintchine_system
from lpideals.lp_core import BlockOperator, BlockSpace
from lpideals.opnorm import opnorm_bracket


@pytest.mark.parametrize("p,q", [(1.5, 3), (1.2, 4)])
def test_exact_values(p, q):
    plan = TruncationPlan(6, "khintchine")
    S, T = build_S(p, q, plan), build_T(p, q, plan)
    for n in range(1, 7):
        assert phi_n(S, phi_spec(n, p, q)) == pytest.approx(1.0, abs=1e-12)
        assert psi_n(T, psi_spec(n, p, q)) == pytest.approx(1.0, abs=1e-12)


def test_zero_operator():
    plan = TruncationPlan(3, "khintchine")
    S = build_S(1.5, 3, plan)
    Z = BlockOperator(np.zeros(S.shape), S.domain, S.codomain)
    assert phi_n(Z, phi_spec(2, 1.5, 3)) == 0.0
    T = build_T(1.5, 3, plan)
    assert psi_n(BlockOperator(np.zeros(T.shape), T.domain, T.codomain), psi_spec(2, 1.5, 3)) == 0.0


def test_one_block_hand_values():
    p, q = 1.5, 3
    u = np.array([[0.7, -0.2]])
    U = BlockOperator(u, BlockSpace.lp(p, 2), BlockSpace.lp(q, 1))
    assert phi_n(U, phi_spec(1, p, q)) == pytest.approx((0.7 + 0.2) * 2 ** (-1 / p))
    v = np.array([[0.4], [1.1]])
    V = BlockOperator(v, BlockSpace.lp(p, 1), BlockSpace.lp(q, 2))
    assert psi_n(V, psi_spec(1, p, q)) == pytest.approx(2 ** (-2 / 3) * (0.4 - 1.1))


def test_block_shape_mismatch():
    U = BlockOperator.between(np.ones((2, 2)), 1.5, 3)
    with pytest.raises(DimensionError):
        phi_n(U, phi_spec(1, 1.5, 3))
    with pytest.raises(DimensionError):
        phi_n(U, phi_spec(2, 1.5, 3))


def test_spec_validation():
    with pytest.raises(ConfigError):
        FunctionalSpec("phi", 2, 1.5, 3, khintchine_system(2, 3))
    with pytest.raises(ConfigError):
        FunctionalSpec("chi", 2, 1.5, 3, khintchine_system(2, 1.5))


def _random_S_shaped(rng, n_max, p, q):
    S = build_S(p, q, TruncationPlan(n_max, "khintchine"))
    return BlockOperator(rng.standard_normal(S.shape), S.domain, S.codomain)


@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    U, V = _random_S_shaped(rng, 3, 1.5, 3), _random_S_shaped(rng, 3, 1.5, 3)
    spec = phi_spec(3, 1.5, 3)
    W = U * a + V * b
    assert phi_n(W, spec) == pytest.approx(a * phi_n(U, spec) + b * phi_n(V, spec), abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_functional_norm_bound(seed):
    rng = np.random.default_rng(seed)
    U = _random_S_shaped(rng, 3, 1.5, 3)
    for n in (1, 2, 3):
        spec = phi_spec(n, 1.5, 3)
        assert abs(phi_n(U, spec)) <= spec.system.measured_C * opnorm_bracket(U).upper + 1e-9


def test_phi_chain_equality_for_identities():
    # B = identity: |x|_2 = 2^{n/2 - n/p} equals |x|_inf^{(2-p)/2} |x|_p^{p/2}
    p, n = 1.5, 4
    sys = khintchine_system(n, p)
    k = sys.k
    value, (chain, ok) = phi_chain(np.eye(n, k), np.eye(k), sys, sys.measured_C)
    assert ok
    assert chain["interpolation"]["lhs"] == pytest.approx(0.0, abs=1e-9)
    l2 = np.linalg.norm(sys.vectors, axis=1)
    np.testing.assert_allclose(l2, 2 ** (n / 2 - n / p), rtol=1e-12)


def test_psi_chain_for_identity():
    q, n = 3, 3
    sys = khintchine_system(n, q)
    k = sys.k
    value, (chain, ok) = psi_chain(np.eye(k), np.eye(k, n), sys, sys.measured_C)
    assert ok
    assert chain["interpolation"]["lhs"] == pytest.approx(0.0, abs=1e-9)


def test_decay_tables_small():
    cfg = SamplerConfig(samples=8, seed=1)
    for exp in (decay_experiment_phi, decay_experiment_psi):
        t = exp(1.5, 3, range(1, 6), cfg)
        assert len(t.rows) == 40
        assert t.all_pass
        assert t.slope() < 0


def test_loglog_slope():
    assert loglog_slope([3], [0.2]) is None
    assert loglog_slope([1, 2, 4], [5, 5, 5]) == pytest.approx(0.0)
    assert loglog_slope([1, 2, 4], [1, 0.5, 0.25]) == pytest.approx(-1.0)


def test_decay_table_zero_rows():
    t = DecayTable("phi", 1.5, 3, [DecayRow(1, 0, 0.0, 1.0, 1.0)])
    assert t.all_pass and t.slope() is None


def test_certificate_degenerate_and_deterministic():
    c1, *_ = separation_certificate(1.5, 3, 1, seed=3, samples=4)
    c2, *_ = separation_certificate(1.5, 3, 1, seed=3, samples=4)
    assert c1 == c2
    assert c1["pass"]
    assert c1["exact"]["phi_S"] == [pytest.approx(1.0)]


def test_certificate_rejects_bad_exponents():
    with pytest.raises(ConfigError):
        separation_certificate(2.5, 3, 2)
