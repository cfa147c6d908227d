import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyexit import conditions as C
from levyexit import measures as M

EX2 = M.log_perturbed_stable_measure(1.0)
G_EX2 = C.ScaleFunction.power_over_log(1.0)


def ex2_tail_oracle(r):
    # r >= 1: 2 int_r^inf du / ((ln u + 1) u^2) = 2 e E1(ln r + 1)
    return float(2 * mp.e * mp.e1(mp.log(r) + 1))


def test_scale_functions():
    assert C.ScaleFunction.power(1.5)(0.01) == pytest.approx(1e-3)
    assert G_EX2(0.01) == pytest.approx(0.01 / math.log(100))
    with pytest.raises(ValueError):
        G_EX2(1.5)
    g = C.ScaleFunction.expression("eps**2 * (1 + eps)")
    assert g(0.1) == pytest.approx(0.011)
    g.check_decreasing()
    with pytest.raises(ValueError):
        C.ScaleFunction.expression("1 / eps").check_decreasing()


@given(st.floats(0.2, 1.9), st.floats(0.1, 10.0), st.floats(1e-8, 0.5))
def test_stable_ratio_closed_form(alpha, gamma, eps):
    r = C.scaled_tail_ratio(M.stable_measure(alpha), C.ScaleFunction.power(alpha), gamma, eps)
    assert r == pytest.approx(2 / alpha * gamma ** -alpha, rel=1e-10)


@given(st.floats(0.1, 4.0), st.floats(1e-8, 0.5))
@settings(max_examples=25, deadline=None)
def test_ratio_unwinds_to_tail_mass(gamma, eps):
    r = C.scaled_tail_ratio(EX2, G_EX2, gamma, eps)
    assert r * G_EX2(eps) == pytest.approx(M.tail_mass(EX2, gamma / eps), rel=1e-12)


def test_self_normalised_ratio_is_one():
    g = C.ScaleFunction.custom(lambda e: M.tail_mass(EX2, 1 / e))
    for eps in (0.1, 1e-3, 1e-6):
        assert C.scaled_tail_ratio(EX2, g, 1.0, eps) == pytest.approx(1.0, rel=1e-12)


def test_example2_ratio_at_1e6():
    # the finite-eps ratio sits 12 % below its limit 2; value by the E1 oracle
    eps = 1e-6
    oracle = ex2_tail_oracle(1 / eps) / G_EX2(eps)
    r = C.scaled_tail_ratio(EX2, G_EX2, 1.0, eps)
    assert r == pytest.approx(oracle, rel=1e-7)
    assert r == pytest.approx(1.7533795538, rel=1e-8)


def test_condition_A():
    rep = C.check_condition_A(M.stable_measure(1.0), C.ScaleFunction.power(1.0))
    assert rep.passed
    for g in (0.5, 1.0, 2.0, 4.0):
        assert rep.constants[f"K({g:g})"] == pytest.approx(2 / g, rel=1e-12)
    rep = C.check_condition_A(EX2, G_EX2)
    assert rep.passed
    # largest ratio stays below the small-eps bound (2/alpha) r^-alpha at gamma = r
    for g in (0.5, 1.0, 2.0, 4.0):
        assert rep.constants[f"K({g:g})"] <= 2 / g
    assert not C.check_condition_A(M.stable_measure(1.0), C.ScaleFunction.power(2.0)).passed


def test_condition_B():
    rep = C.check_condition_B(M.stable_measure(1.0), C.ScaleFunction.power(1.0), 0.1)
    assert rep.passed and rep.constants["K"] == 32
    rep = C.check_condition_B(EX2, G_EX2, 0.1)
    assert rep.passed and math.isfinite(rep.constants["K"])
    rep = C.check_condition_B(M.stable_measure(1.0), C.ScaleFunction.power(1.0), 2.1)
    assert rep.constants["K"] == 2
    assert not C.check_condition_B(M.stable_measure(1.0), C.ScaleFunction.power(1.0), 1e-9).passed


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 4.0])
def test_limit_tail_stable(gamma):
    lt = C.limit_tail(M.stable_measure(1.0), C.ScaleFunction.power(1.0), gamma, C.DEFAULT_EPS_GRID)
    assert lt.converged
    assert lt.value * gamma == pytest.approx(2.0, rel=1e-12)


def test_limit_tail_stable_alpha():
    a = 1.5
    lt = C.limit_tail(M.stable_measure(a), C.ScaleFunction.power(a), 2.0, C.DEFAULT_EPS_GRID)
    assert lt.value * a * 2 ** a == pytest.approx(2.0, rel=1e-12)


def test_limit_tail_needs_four_points():
    with pytest.raises(ValueError):
        C.limit_tail(EX2, G_EX2, 1.0, (0.1, 0.01, 0.001))
    with pytest.raises(ValueError):
        C.limit_tail(EX2, G_EX2, 1.0, (0.1, 0.01, 0.02, 0.001))


def test_limit_tail_flags_divergence():
    # ratios growing like 1/eps never settle
    lt = C.limit_tail(M.stable_measure(1.0), C.ScaleFunction.power(2.0), 1.0, C.DEFAULT_EPS_GRID)
    assert not lt.converged


def test_limit_exit_mass():
    mass, ok = C.limit_exit_mass(EX2, G_EX2, 1.0, 2.0)
    assert ok and mass == pytest.approx(1.0 + 0.5, rel=0.02)


def test_variance_forms_agree():
    for m in (EX2, M.stable_measure(0.7)):
        for eps in (0.1, 1e-3, 1e-6):
            y = C.variance_integral(m, 0.5, eps, "y")
            u = C.variance_integral(m, 0.5, eps, "u")
            assert u == pytest.approx(y, rel=1e-6)


def test_variance_integral_stable_oracle():
    # int u^2/(1+u^2) |u|^-2 du over R = pi, scaled: eps * pi
    for eps in (0.1, 1e-4):
        assert C.variance_integral(M.stable_measure(1.0), 0.0, eps) == pytest.approx(math.pi * eps, rel=1e-8)


def test_condition_D():
    rep = C.check_condition_D(M.stable_measure(1.0), 0.0, C.ScaleFunction.power(1.0),
                              g1=C.ScaleFunction.power(1.0))
    assert rep.passed and rep.constants["n"] == 1
    assert rep.constants["K"] == pytest.approx(math.pi, rel=1e-8)
    rep = C.check_condition_D(EX2, 0.0, G_EX2, g1=G_EX2)
    assert rep.passed
    rep = C.check_condition_D(None, 1.0, C.ScaleFunction.expression("eps**2"))
    assert rep.passed
    assert all(r == pytest.approx(1.0, rel=1e-12) for _, _, r in rep.rows)
    # g2 much larger than g1: no power n <= 8 fits under g1
    rep = C.check_condition_D(M.stable_measure(1.0), 0.0, C.ScaleFunction.power(1.0),
                              g1=C.ScaleFunction.power(20.0))
    assert not rep.passed and rep.constants["n"] is None


def test_condition_E():
    rep = C.check_condition_E(EX2, G_EX2)
    assert rep.passed and all(r == 0.0 for _, _, r in rep.rows)
    one_sided = M.expression_measure("where(u > 1, u**-2.0, 0.0)")
    rep = C.check_condition_E(one_sided, C.ScaleFunction.power(1.0), (0.1, 0.05, 0.02, 0.01))
    f = lambda y: 0.1 * y / (1 + (0.1 * y) ** 2) / y ** 2
    oracle = float(mp.quad(f, [1, 10, mp.inf])) / 0.1
    assert rep.rows[0][2] == pytest.approx(oracle, rel=1e-7)
    assert rep.passed
    assert not C.check_condition_E(one_sided, C.ScaleFunction.power(3.0)).passed


def test_tail_slope_hint():
    assert C.tail_slope_hint(M.stable_measure(1.5)) == pytest.approx(1.5, rel=1e-9)
    assert 1.0 < C.tail_slope_hint(EX2) < 1.2


def test_report_csv_rows():
    rep = C.check_condition_B(M.stable_measure(1.0), C.ScaleFunction.power(1.0), 0.1,
                              (0.1, 0.01, 0.001, 1e-4))
    rows = list(rep.csv_rows())
    assert rows[0][0] == "B" and rows[-1][-1] == "pass"
