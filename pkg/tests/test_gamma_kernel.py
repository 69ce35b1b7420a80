import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dixiecup import gamma_kernel as gk

from oracles import erlang_logF, erlang_log_phi, erlang_logQ

SHAPES = st.integers(min_value=1, max_value=30)
ARGS = st.floats(min_value=1e-6, max_value=800.0, allow_nan=False)


@pytest.mark.parametrize("m", [1, 2, 3, 5, 10, 25])
@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.5, 1.0, 3.0, 10.0, 40.0, 150.0, 700.0])
def test_log_kernels_match_high_precision(m, x):
    assert gk.log_Q(m, x) == pytest.approx(erlang_logQ(m, x), rel=1e-12, abs=1e-13)
    assert gk.log_F(m, x) == pytest.approx(erlang_logF(m, x), rel=1e-12, abs=1e-13)
    assert gk.log_reverse_hazard(m, x) == pytest.approx(erlang_log_phi(m, x), rel=1e-11, abs=1e-12)


def test_exponential_case_closed_forms():
    x = np.array([0.1, 1.0, 5.0, 50.0])
    assert np.allclose(gk.survival_Q(1, x).value, np.exp(-x), rtol=1e-15)
    assert np.allclose(gk.density_f(1, x).value, np.exp(-x), rtol=1e-15)
    assert np.allclose(gk.cdf_F(1, x).value, -np.expm1(-x), rtol=1e-14)
    assert np.allclose(gk.upper_hazard_h(1, x), 1.0, rtol=1e-14)


def test_deep_tail_stays_finite_in_log_scale():
    # Q_3(1000) ~ 5e-429 underflows, its log does not
    lq = gk.log_Q(3, 1000.0)
    assert math.isfinite(lq)
    assert lq == pytest.approx(-1000.0 + 2 * math.log(1000.0) + math.log(1 + 2e-3 + 2e-6) - math.log(2), rel=1e-13)
    assert gk.survival_Q(3, 1000.0).value == 0.0


def test_lower_tail_without_cancellation():
    # F_5(1e-4) = y^5/5! (1 - 5y/6 + ...)
    y = 1e-4
    expected = 5 * math.log(y) - math.log(120) + math.log1p(-5 * y / 6 + 15 * y * y / 42)
    assert gk.log_F(5, y) == pytest.approx(expected, rel=1e-12)


def test_reverse_hazard_small_argument_expansion():
    # phi_m(y) = m/y - m/(m+1) + O(y)
    for m in (1, 2, 4):
        y = 1e-6
        assert gk.reverse_hazard_phi(m, y) == pytest.approx(m / y - m / (m + 1), rel=1e-9)


def test_log_elasticity_limits():
    assert gk.log_elasticity_e(3, 1e-9) == pytest.approx(-1.0, abs=1e-8)
    # large y: e(y) ~ m - 1 - y
    assert gk.log_elasticity_e(3, 200.0) == pytest.approx(2.0 - 200.0, rel=1e-12)


def test_scalar_and_array_shapes():
    assert isinstance(gk.log_Q(2, 1.0), float)
    out = gk.log_Q(2, np.array([1.0, 2.0]))
    assert isinstance(out, np.ndarray) and out.shape == (2,)
    kv = gk.survival_Q(2, 1.5)
    assert kv.value == pytest.approx(math.exp(kv.log_value))


@pytest.mark.parametrize("bad", [0, -1, 1.5, True])
def test_shape_validation(bad):
    with pytest.raises(ValueError):
        gk.log_Q(bad, 1.0)


def test_domain_validation():
    with pytest.raises(ValueError):
        gk.reverse_hazard_phi(2, 0.0)
    with pytest.raises(ValueError):
        gk.upper_hazard_h(2, -1.0)
    with pytest.raises(ValueError):
        gk.log_elasticity_e(2, 0.0)


@given(SHAPES, ARGS)
def test_complementarity(m, x):
    q = gk.survival_Q(m, x).value
    f = gk.cdf_F(m, x).value
    assert abs(q + f - 1.0) <= 1e-13


@given(SHAPES, ARGS, st.floats(min_value=1.001, max_value=3.0))
def test_survival_decreasing_cdf_increasing(m, x, c):
    # either side may saturate in double precision, never both
    dq = gk.log_Q(m, x) - gk.log_Q(m, c * x)
    df = gk.log_F(m, c * x) - gk.log_F(m, x)
    assert dq >= 0 and df >= 0 and (dq > 0 or df > 0)


@given(SHAPES, st.floats(min_value=1e-4, max_value=600.0))
def test_reverse_hazard_is_density_over_cdf(m, y):
    lhs = gk.log_reverse_hazard(m, y)
    assert lhs == pytest.approx(gk.log_f(m, y) - gk.log_F(m, y), rel=1e-11, abs=1e-11)


@given(SHAPES, st.floats(min_value=1e-4, max_value=600.0))
def test_elasticity_negative_and_consistent(m, y):
    e = gk.log_elasticity_e(m, y)
    assert e < 0
    phi = gk.reverse_hazard_phi(m, y)
    assert e == pytest.approx(m - 1 - y - y * phi, rel=1e-9, abs=1e-9)


@given(st.integers(1, 10), st.floats(min_value=1e-3, max_value=500.0))
def test_upper_hazard_nondecreasing(m, t):
    assert gk.upper_hazard_h(m, 1.01 * t) >= gk.upper_hazard_h(m, t) * (1 - 1e-12)


def test_log_grid_density():
    g = gk.log_grid(1e-3, 1e3)
    assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e3)
    assert len(g) == 1201


def test_monotone_helpers():
    assert gk.strictly_increasing([1, 2, 3])
    assert not gk.strictly_increasing([1, 3, 2])
    assert gk.strictly_decreasing([3, 2, 1])
    assert not gk.strictly_decreasing([1, 2])
