import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.optimize import brentq

from levyexit import _backend
from levyexit import measures as M
from levyexit import sampling as S
from levyexit.rng import RngStream

BACKENDS = sorted(_backend.BACKENDS)


def test_stable_table_quantiles():
    m = M.stable_measure(1.0)
    t = S.build_jump_table(m, 1.0)
    assert t.quantile(0.5) == pytest.approx(2.0, rel=1e-6)
    # tail beyond the table follows the end slope
    assert t.quantile(1e-20) == pytest.approx(1e20, rel=1e-6)
    assert t.p_plus == 0.5


def test_log_perturbed_table_quantiles():
    m = M.log_perturbed_stable_measure(1.0)
    t = S.build_jump_table(m, 1e-3)
    t0 = M.one_sided_tail(m, 1e-3)
    for q in (0.9, 0.5, 1e-2, 1e-4, 1e-6):
        exact = brentq(lambda x: M.one_sided_tail(m, x) / t0 - q, 1e-3, 1e12, rtol=1e-14)
        assert t.quantile(q) == pytest.approx(exact, rel=1e-5)


@given(st.floats(0.3, 1.9), st.floats(1e-3, 1.0))
@settings(max_examples=15, deadline=None)
def test_stable_table_matches_pareto(alpha, q):
    t = S.build_jump_table(M.stable_measure(alpha), 0.01)
    assert t.quantile(q) == pytest.approx(0.01 * q ** (-1 / alpha), rel=1e-6)


def test_asymmetric_side_weights():
    m = M.expression_measure("where(u > 0, 1.0, 0.5) * abs(u)**-1.5")
    t = S.build_jump_table(m, 0.1)
    assert t.p_plus == pytest.approx(2 / 3, rel=1e-9)


def test_jump_size_distribution():
    m = M.stable_measure(1.5)
    rng = RngStream(5, 0)
    x = np.array([S.sample_jump_size(m, 0.1, rng) for _ in range(4000)])
    assert np.all(np.abs(x) > 0.1)
    # |J| / 0.1 is Pareto(1.5)
    assert stats.kstest(np.abs(x) / 0.1, stats.pareto(1.5).cdf).pvalue > 1e-3
    assert abs(np.mean(x > 0) - 0.5) < 5 * 0.5 / math.sqrt(x.size)


def test_gaussian_increment():
    rng = RngStream(1, 2)
    x = np.array([S.sample_gaussian_increment(2.0, 0.5, 0.1, rng) for _ in range(4000)])
    assert stats.kstest(x, stats.norm(scale=math.sqrt(0.25 * 2.0 * 0.1)).cdf).pvalue > 1e-3
    assert S.sample_gaussian_increment(0.0, 0.5, 0.1, rng) == 0.0


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5])
def test_stable_increment_law(alpha):
    # eps L_dt with measure du/|u|^(1+alpha) equals eps sigma dt^(1/alpha) S
    rng = RngStream(3, 0)
    eps, dt = 0.5, 0.01
    x = np.array([S.sample_stable_increment(alpha, eps, dt, rng) for _ in range(4000)])
    scale = eps * M.stable_scale_constant(alpha) * dt ** (1 / alpha)
    assert stats.kstest(x / scale, stats.levy_stable(alpha, 0.0).cdf).pvalue > 1e-3


def test_sampler_modes():
    stable = S.NoiseSampler(M.LevyTriplet(jumps=M.stable_measure(1.0)), 0.1)
    assert stable.mode == S.MODE_STABLE
    dec = S.NoiseSampler(M.LevyTriplet(jumps=M.stable_measure(1.0)), 0.1, method="decomposition")
    assert dec.mode == S.MODE_POISSON
    assert dec.small_jump_mode == S.GAUSSIAN_PROXY
    assert dec.gauss_var == pytest.approx(M.truncated_moment2(M.stable_measure(1.0).scaled(0.1), 1e-3))
    low = S.NoiseSampler(M.LevyTriplet(jumps=M.stable_measure(0.7)), 0.1, method="decomposition")
    assert low.small_jump_mode == S.DROP and low.gauss_var == 0.0
    gauss = S.NoiseSampler(M.LevyTriplet(0.0, 1.0), 0.1)
    assert gauss.mode == S.MODE_GAUSS and gauss.gauss_var == pytest.approx(0.01)
    with pytest.raises(ValueError):
        S.NoiseSampler(M.LevyTriplet(), 0.0)


def test_pure_drift_is_deterministic():
    s = S.NoiseSampler(M.LevyTriplet(0.3), 2.0)
    x = S.sample_increments(s, 0.01, 100, seed=1)
    np.testing.assert_allclose(x, 2.0 * 0.3 * 0.01, rtol=1e-15)


@pytest.mark.parametrize("backend", BACKENDS)
def test_general_increment_advances_stream(backend):
    s = S.NoiseSampler(M.LevyTriplet(jumps=M.log_perturbed_stable_measure(1.0)), 0.1)
    rng = RngStream(0, 4)
    a = S.sample_general_increment(s, 0.01, rng, backend)
    assert rng.counter >= 2
    b = S.sample_general_increment(s, 0.01, RngStream(0, 4), backend)
    assert a == b


@pytest.mark.parametrize("kind", ["stable", "gauss", "poisson", "asym"])
def test_backends_agree_on_increments(kind):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    t = {
        "stable": M.LevyTriplet(jumps=M.stable_measure(1.3)),
        "gauss": M.LevyTriplet(0.1, 2.0),
        "poisson": M.LevyTriplet(0.0, 0.5, M.log_perturbed_stable_measure(1.0)),
        "asym": M.LevyTriplet(0.2, 0.0, M.expression_measure("where(u > 0, 1.0, 0.5) * abs(u)**-1.5")),
    }[kind]
    s = S.NoiseSampler(t, 0.2)
    a = S.sample_increments(s, 0.01, 2000, seed=9, backend="python")
    b = S.sample_increments(s, 0.01, 2000, seed=9, backend="compiled")
    # same draws; libm and numpy may differ in the last ulps of log/sin/pow
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_increments_independent_of_threads():
    if "compiled" not in _backend.BACKENDS:
        pytest.skip("compiled backend not built")
    s = S.NoiseSampler(M.LevyTriplet(jumps=M.log_perturbed_stable_measure(1.0)), 0.1)
    a = S.sample_increments(s, 0.01, 5000, seed=2, threads=1, backend="compiled")
    b = S.sample_increments(s, 0.01, 5000, seed=2, threads=4, backend="compiled")
    np.testing.assert_array_equal(a, b)


def test_validate_sampler_needs_enough_samples():
    s = S.NoiseSampler(M.LevyTriplet(0.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        S.validate_sampler(s, 0.1, 1000, [1.0])


def test_validate_sampler_detects_wrong_law():
    s = S.NoiseSampler(M.LevyTriplet(0.0, 1.0), 1.0)
    wrong = S.NoiseSampler(M.LevyTriplet(0.0, 1.3), 1.0)
    rep = S.validate_sampler(s, 1.0, 20_000, [0.5, 1.0, 2.0])
    assert rep.passed
    object.__setattr__(wrong, "gauss_var", 1.0)  # sampler draws d=1, model expects d=1.3
    assert not S.validate_sampler(wrong, 1.0, 20_000, [0.5, 1.0, 2.0]).passed
