import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dixiecup import montecarlo as mc
from dixiecup.exact_moments import mean_variance
from dixiecup.models import CollectorModel, ProbabilityVector


def cfg(p, m, trials=20000, seed=0, workers=1):
    return mc.SimConfig(trials, seed, CollectorModel(m, ProbabilityVector.from_weights(p)), workers)


def test_same_output_for_any_worker_count():
    a = mc.sample_discrete(cfg([0.5, 0.3, 0.2], 2, trials=10000, workers=1))
    b = mc.sample_discrete(cfg([0.5, 0.3, 0.2], 2, trials=10000, workers=3))
    assert np.array_equal(a, b)
    c = mc.sample_poissonized(cfg([0.5, 0.3, 0.2], 2, trials=10000, workers=2))
    d = mc.sample_poissonized(cfg([0.5, 0.3, 0.2], 2, trials=10000, workers=1))
    assert np.array_equal(c, d)


def test_full_blocks_unchanged_by_trial_count():
    a = mc.sample_discrete(cfg([0.6, 0.4], 1, trials=5000))
    b = mc.sample_discrete(cfg([0.6, 0.4], 1, trials=9000))
    n = mc.BLOCK_SIZE
    assert np.array_equal(a[:n], b[:n])


def test_seeds_give_different_streams():
    a = mc.sample_discrete(cfg([0.6, 0.4], 1, trials=1000, seed=0))
    b = mc.sample_discrete(cfg([0.6, 0.4], 1, trials=1000, seed=1))
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("method", ["skip", "direct"])
def test_discrete_moments_within_tolerance(method):
    c = cfg([0.5, 0.3, 0.2], 2, trials=40000, seed=11)
    stats = mc.simulate_discrete(c, method)
    exact = mean_variance(c.model)
    assert abs(stats.mean - exact.mean) < 4 * stats.std_error_mean
    assert abs(stats.variance - exact.var_T) < 4 * stats.std_error_variance


def test_skip_and_direct_same_law():
    c = cfg([0.4, 0.4, 0.2], 1, trials=30000, seed=5)
    a = mc.sample_discrete(c, "skip")
    b = mc.sample_discrete(c, "direct")
    # compare empirical CDFs on the common support
    grid = np.arange(3, 40)
    fa = np.searchsorted(np.sort(a), grid, side="right") / a.size
    fb = np.searchsorted(np.sort(b), grid, side="right") / b.size
    assert np.max(np.abs(fa - fb)) < 1.95 * math.sqrt(2 / a.size) * 1.2


def test_direct_with_alias_table():
    c = cfg(np.arange(1, 21, dtype=float), 1, trials=4000, seed=2)
    stats = mc.simulate_discrete(c, "direct")
    exact = mean_variance(c.model)
    assert abs(stats.mean - exact.mean) < 4 * stats.std_error_mean


def test_samples_are_integers_at_least_mn():
    t = mc.sample_discrete(cfg([0.5, 0.3, 0.2], 3, trials=2000))
    assert np.all(t >= 9) and np.all(t == np.round(t))


def test_poissonized_mean_is_expected_completion():
    c = cfg([0.7, 0.2, 0.1], 2, trials=40000, seed=4)
    stats = mc.simulate_poissonized(c)
    exact = mean_variance(c.model)
    assert abs(stats.mean - exact.mean) < 4 * stats.std_error_mean
    assert abs(stats.variance - exact.var_X) < 4 * stats.std_error_variance


def test_transfer_report():
    rep = mc.transfer_report(cfg([0.5, 0.3, 0.2], 2, trials=30000, seed=9))
    assert rep.ok
    assert set(rep.to_dict()) >= {"mean_z", "var_transfer_z", "ok"}


def test_active_clock_deterministic_case():
    rep = mc.simulate_active_clock(cfg([0.5, 0.5], 1, trials=500))
    assert rep.psi_sum_mean == 2.0
    assert rep.var_H == 0.0
    assert rep.total == 2.0 and rep.exact_var_T == pytest.approx(2.0)
    assert rep.ok


def test_active_clock_identity():
    rep = mc.simulate_active_clock(cfg([0.5, 0.3, 0.2], 2, trials=40000, seed=3))
    assert abs(rep.z) < 4


def test_useful_hit_masses_structure():
    masses = mc.useful_hit_masses(cfg([0.5, 0.3, 0.2], 2, trials=100))
    assert masses.shape == (100, 6)
    assert np.all(masses[:, 0] == 1.0)
    assert np.all(np.diff(masses, axis=1) <= 1e-15)
    assert np.all(masses > 0)


def test_psi():
    assert mc.psi(1.0) == 0.0
    assert mc.psi(0.5) == pytest.approx(2.0)


def test_alias_table_exact_probabilities():
    p = np.array([0.5, 0.25, 0.125, 0.125])
    table = mc.AliasTable(p)
    assert np.allclose(table.implied_probabilities(), p, atol=1e-15)
    draws = table.sample(mc.block_generator(0, 0), 100000)
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.allclose(freq, p, atol=0.006)


@settings(max_examples=30)
@given(st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=1, max_size=40))
def test_alias_table_property(weights):
    p = np.asarray(weights) / np.sum(weights)
    table = mc.AliasTable(p)
    assert len(table) == p.size
    assert np.allclose(table.implied_probabilities(), p, atol=1e-12)


def test_config_validation():
    model = CollectorModel.uniform(2, 1)
    with pytest.raises(ValueError):
        mc.SimConfig(0, 0, model)
    with pytest.raises(ValueError):
        mc.SimConfig(10, -1, model)
    with pytest.raises(ValueError):
        mc.sample_discrete(mc.SimConfig(10, 0, model), method="magic")


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("DIXIECUP_THREADS", "4")
    assert mc.default_workers() == 4
    monkeypatch.setenv("DIXIECUP_THREADS", "junk")
    assert mc.default_workers() == 1


def test_sample_stats():
    s = mc.SampleStats.from_samples([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5 and s.variance == pytest.approx(5 / 3)
    assert mc.SampleStats.from_samples([7.0]).variance == 0.0
