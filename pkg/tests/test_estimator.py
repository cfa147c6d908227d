import io
import math

import numpy as np
import pytest

from levyexit import measures as M
from levyexit.dynamics import Domain, Potential
from levyexit.errors import CensoringError
from levyexit.estimator import (CSV_COLUMNS, ExitExperimentConfig, estimate_mean_exit, read_csv,
                                stream_ids, summarize, sweep, to_csv_text)

STABLE1 = M.LevyTriplet(jumps=M.stable_measure(1.0))


def cfg(**kw):
    base = dict(noise=STABLE1, epsilons=(0.3,), n_paths=400, dt=1e-2, threads=1)
    base.update(kw)
    return ExitExperimentConfig(**base)


def test_start_outside_gives_zero():
    c = cfg(x0=1.5, require_well=False)
    e = estimate_mean_exit(c, 0.3)
    assert e.mean == 0.0 and e.stderr == 0.0 and e.censored_fraction == 0.0


def test_deterministic_drift_exit():
    c = cfg(noise=M.LevyTriplet(), potential=Potential.polynomial([-1.0]), x0=0.9, dt=1e-3,
            t_cap=10.0, require_well=False)
    e = estimate_mean_exit(c, 0.3)
    assert abs(e.mean - 0.1) <= 1e-3 * (1 + 1e-9)
    assert e.stderr == 0.0
    assert e.ci95_low <= e.mean <= e.ci95_high


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(epsilons=(0.1, 0.2))
    with pytest.raises(ValueError):
        cfg(n_paths=50)
    with pytest.raises(ValueError):
        cfg(x0=0.95, domain=Domain(1, 1, 0.1))
    with pytest.raises(ValueError):
        cfg(potential=Potential.polynomial([0.0, -1.0]))
    assert cfg(dt=None, potential=Potential.quadratic(2.0)).dt == pytest.approx(5e-4)


def test_default_cap_from_predictor():
    c = cfg()
    assert c.predicted_mean(0.1) == pytest.approx(5.0)
    assert c.cap_for(0.1) == pytest.approx(5e4)
    assert cfg(noise=M.LevyTriplet(0.0, 1.0)).cap_for(0.1) == 1e6


def test_singleton_sweep_equals_estimate():
    c = cfg()
    assert sweep(c)[0] == estimate_mean_exit(c, 0.3)


def test_stream_ids():
    ids = stream_ids(2, 3)
    assert list(ids) == [2 << 32, (2 << 32) + 1, (2 << 32) + 2]


def test_threads_do_not_change_csv():
    base = dict(noise=M.LevyTriplet(jumps=M.log_perturbed_stable_measure(1.0)),
                epsilons=(0.3, 0.2), n_paths=500, dt=1e-2)
    a = to_csv_text(sweep(ExitExperimentConfig(threads=1, **base)), 1e-2, 0)
    b = to_csv_text(sweep(ExitExperimentConfig(threads=3, **base)), 1e-2, 0)
    assert a == b


def test_seed_changes_result():
    assert estimate_mean_exit(cfg(seed=1), 0.3).mean != estimate_mean_exit(cfg(seed=2), 0.3).mean


def test_clt_stderr_scaling():
    # average the ratio over a few seeds to keep the check tight but stable
    r = [estimate_mean_exit(cfg(n_paths=8000, seed=s), 0.3).stderr
         / estimate_mean_exit(cfg(n_paths=4000, seed=s + 10), 0.3).stderr for s in range(3)]
    assert np.mean(r) == pytest.approx(1 / math.sqrt(2), rel=0.15)


def test_means_increase_as_eps_decreases():
    est = sweep(cfg(epsilons=(0.3, 0.15, 0.075), n_paths=1000))
    means = [e.mean for e in est]
    assert means[0] < means[1] < means[2]


def test_censoring_gate(caplog):
    times = np.array([1.0, 2.0, 5.0, 5.0])
    sides = np.array([1, -1, 0, 0], dtype=np.int8)
    e = summarize(0.1, times, sides, 5.0)
    assert e.censored_fraction == 0.5 and not e.reliable
    with pytest.raises(CensoringError):
        summarize(0.1, times, np.array([1, 0, 0, 0], dtype=np.int8), 5.0)


def test_censoring_reported_in_sweep():
    c = cfg(t_cap=0.05, n_paths=200)
    est = sweep(c)
    assert est[0].error is not None and math.isnan(est[0].mean)


def test_csv_round_trip():
    est = sweep(cfg(epsilons=(0.3, 0.2)))
    text = to_csv_text(est, 1e-2, 0)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    back = read_csv(io.StringIO("# comment\n" + text))
    for (eps, mean, se), e in zip(back, est):
        assert eps == e.epsilon
        assert mean == pytest.approx(e.mean, rel=1e-11)
        assert se == pytest.approx(e.stderr, rel=1e-11)


def test_read_csv_requires_columns():
    with pytest.raises(ValueError):
        read_csv(io.StringIO("a,b\n1,2\n"))
