import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from dixiecup import poissonized as pz
from dixiecup.errors import DomainExit
from dixiecup.exact_moments import mean_variance
from dixiecup.models import CollectorModel, ProbabilityVector


def model(p, m):
    return CollectorModel(m, ProbabilityVector.from_weights(p))


def test_cdf_of_two_exponentials():
    mod = model([0.6, 0.4], 1)
    t = np.array([0.5, 2.0, 10.0])
    expected = (1 - np.exp(-0.6 * t)) * (1 - np.exp(-0.4 * t))
    assert np.allclose(pz.completion_cdf(mod, t), expected, rtol=1e-14)
    assert pz.completion_cdf(mod, 0.0) == 0.0


def test_density_integrates_to_one_and_gives_mean():
    mod = model([0.5, 0.3, 0.2], 2)
    total, _ = integrate.quad(lambda t: pz.completion_density(mod, t), 1e-12, np.inf, limit=200)
    mean, _ = integrate.quad(lambda t: t * pz.completion_density(mod, t), 1e-12, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)
    assert mean == pytest.approx(mean_variance(mod).mean, rel=1e-8)


def test_density_is_derivative_of_cdf():
    mod = model([0.5, 0.25, 0.25], 3)
    t, d = 7.0, 1e-5
    fd = (pz.completion_cdf(mod, t + d) - pz.completion_cdf(mod, t - d)) / (2 * d)
    assert pz.completion_density(mod, t) == pytest.approx(fd, rel=1e-7)


def test_grouping_matches_ungrouped():
    a = model([0.25] * 4, 2)
    b = model([0.25 + 1e-16, 0.25, 0.25, 0.25 - 1e-16], 2)
    assert pz.completion_cdf(a, 9.0) == pytest.approx(pz.completion_cdf(b, 9.0), rel=1e-13)


def test_radial_derivative_matches_finite_difference():
    direction = pz.RadialDirection.normalized([2.0, -1.0, -0.5, -0.5])
    m, theta = 2, 0.1
    t = np.array([2.0, 8.0, 20.0])
    d = 1e-6

    def cdf(th):
        q = direction.q(th)
        return pz.completion_cdf(CollectorModel(m, ProbabilityVector(q / q.sum())), t)

    fd = -(cdf(theta + d) - cdf(theta - d)) / (2 * d)
    assert np.allclose(pz.radial_derivative_w(direction, m, theta, t), fd, rtol=1e-6)


def test_size_bias_ratio_identity():
    direction = pz.RadialDirection.toward([0.5, 0.3, 0.2])
    m, theta = 2, 0.7
    t = np.array([0.5, 3.0, 12.0, 40.0])
    q = direction.q(theta)
    mod = CollectorModel(m, ProbabilityVector(q / q.sum()))
    w = pz.radial_derivative_w(direction, m, theta, t)
    g = pz.completion_density(mod, t)
    assert np.allclose(pz.size_bias_ratio(direction, m, theta, t), w / (t * g), rtol=1e-10)
    # (1/theta) (1/(N M) - 1) form
    mm = pz.weighted_mean_M(q, m, t)
    assert np.allclose(pz.size_bias_ratio(direction, m, theta, t), (1 / (3 * mm) - 1) / theta, rtol=1e-9)


def test_weighted_mean_limits():
    q = np.array([0.6, 0.4])
    # t -> 0: phi ~ m / (q t), so M tends to the harmonic mean N / sum(1/q)
    assert pz.weighted_mean_M(q, 1, 1e-9) == pytest.approx(2 / (1 / 0.6 + 1 / 0.4), rel=1e-6)
    # t -> infinity: the smallest q dominates
    assert pz.weighted_mean_M(q, 1, 2000.0) == pytest.approx(0.4, rel=1e-12)
    assert pz.weighted_mean_M(np.full(4, 0.25), 3, 5.0) == pytest.approx(0.25, rel=1e-14)


def test_extreme_times_stay_finite():
    direction = pz.RadialDirection.toward([0.7, 0.2, 0.1])
    t = np.array([1e-8, 1e5])
    assert np.all(np.isfinite(pz.size_bias_ratio(direction, 4, 1.0, t)))
    assert np.all(np.isfinite(pz.weighted_mean_M(direction.q(1.0), 4, t)))
    assert np.all(pz.radial_derivative_w(direction, 4, 1.0, t) >= 0)


def test_direction_validation():
    with pytest.raises(ValueError):
        pz.RadialDirection([1.0, 1.0])
    with pytest.raises(ValueError):
        pz.RadialDirection([0.0, 0.0])
    with pytest.raises(ValueError):
        pz.RadialDirection([1.0])
    direction = pz.RadialDirection([0.1, -0.1])
    assert direction.exit_theta == pytest.approx(5.0)
    with pytest.raises(DomainExit):
        direction.q(5.0)
    with pytest.raises(ValueError):
        pz.radial_derivative_w(direction, 1, 0.0, 1.0)


def test_toward_lands_on_target():
    p = np.array([0.5, 0.3, 0.2])
    assert np.allclose(pz.RadialDirection.toward(p).q(1.0), p, atol=1e-16)


def test_default_grid_scale():
    g = pz.default_time_grid(CollectorModel.uniform(3, 2))
    assert g[0] == pytest.approx(0.06) and g[-1] == pytest.approx(600.0)


@settings(max_examples=20)
@given(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=2, max_size=6), st.integers(1, 4))
def test_mlr_monotonicity(weights, m):
    p = ProbabilityVector.from_weights(weights)
    if p.is_uniform():
        return
    direction = pz.RadialDirection.toward(p.p)
    grid = pz.default_time_grid(CollectorModel(m, p), per_decade=40)
    ratio = pz.size_bias_ratio(direction, m, 1.0, grid)
    mm = pz.weighted_mean_M(p, m, grid)
    w = pz.radial_derivative_w(direction, m, 1.0, grid)
    assert np.all(np.diff(ratio) > -1e-12 * (1 + np.abs(ratio[:-1])))
    assert np.all(np.diff(mm) < 1e-12 * (1 + np.abs(mm[:-1])))
    assert np.all(w >= -1e-14 * np.abs(w).max())
