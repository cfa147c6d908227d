import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyexit import measures as M
from levyexit.errors import NumericalFailure

alphas = st.floats(0.2, 1.9)
radii = st.floats(1e-3, 1e3)


def lp_tail_oracle(r, alpha=1.0):
    """nu(R minus [-r, r]) for the log-perturbed density, by mpmath."""
    f = lambda u: 1 / ((abs(mp.log(u)) + 1) * u ** (1 + alpha))
    pts = [r, 1, mp.inf] if r < 1 else [r, mp.inf]
    return 2 * float(mp.quad(f, pts))


@given(alphas, radii)
def test_stable_tail_mass_closed_form(alpha, r):
    m = M.stable_measure(alpha)
    assert M.tail_mass(m, r) == pytest.approx(2 / alpha * r ** -alpha, rel=1e-14)


@given(alphas, radii)
@settings(max_examples=25, deadline=None)
def test_stable_tail_mass_matches_quadrature(alpha, r):
    m = M.stable_measure(alpha)
    quad = 2 * m.side_integral(lambda u: 1.0, r, math.inf, 1)
    assert quad == pytest.approx(M.tail_mass(m, r), rel=1e-7)


@given(alphas, radii)
@settings(max_examples=25, deadline=None)
def test_stable_truncated_moment_closed_form(alpha, r):
    m = M.stable_measure(alpha)
    quad = 2 * m.side_integral(lambda u: u * u, 0.0, r, 1)
    assert M.truncated_moment2(m, r) == pytest.approx(2 * r ** (2 - alpha) / (2 - alpha), rel=1e-12)
    assert quad == pytest.approx(M.truncated_moment2(m, r), rel=1e-7)


def test_stable_examples():
    assert M.tail_mass(M.stable_measure(1.0), 2.0) == 1.0
    assert M.truncated_moment2(M.stable_measure(1.0), 1.0) == 2.0


def test_log_perturbed_tail_at_one():
    m = M.log_perturbed_stable_measure(1.0)
    # 2 int_1^inf du / ((ln u + 1) u^2) = 2 e E1(1)
    exact = float(2 * mp.e * mp.e1(1))
    assert M.tail_mass(m, 1.0) == pytest.approx(exact, rel=1e-9)
    assert M.truncated_moment2(m, 1.0) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("r", [1e-3, 0.3, 2.0, 1e4, 1e8])
def test_log_perturbed_tail_against_mpmath(r):
    m = M.log_perturbed_stable_measure(1.0)
    assert M.tail_mass(m, r) == pytest.approx(lp_tail_oracle(r), rel=1e-7)


def test_levy_integral_log_perturbed():
    m = M.log_perturbed_stable_measure(1.0)
    f = lambda u: u ** 2 / (1 + u ** 2) / ((abs(mp.log(u)) + 1) * u ** 2)
    assert M.levy_integral(m) == pytest.approx(2 * float(mp.quad(f, [0, 1, mp.inf])), rel=1e-7)


def test_symmetry_short_circuits():
    for m in (M.stable_measure(1.3), M.log_perturbed_stable_measure(0.7)):
        assert M.compensator_drift(m) == 0.0
        t = M.LevyTriplet(0.0, 0.0, m)
        assert M.scale_triplet(t, 0.01).drift == 0.0
        assert M.characteristic_exponent(t, 3.0).imag == 0.0


def test_one_sided_compensator():
    m = M.expression_measure("where(u > 1, u**-2.0, 0.0)")
    # int_1^inf u/(1+u^2) u^-2 du = ln(2)/2
    assert M.compensator_drift(m) == pytest.approx(0.5 * math.log(2.0), rel=1e-8)
    assert M.one_sided_tail(m, 2.0, -1) == 0.0
    assert M.one_sided_tail(m, 2.0, 1) == pytest.approx(0.5, rel=1e-9)


def test_non_levy_density_rejected():
    with pytest.raises(NumericalFailure):
        M.custom_measure(lambda u: np.abs(u) ** -3.5, symmetric=True)


def test_bad_densities_rejected():
    with pytest.raises(ValueError):
        M.custom_measure(lambda u: -np.abs(u) ** -1.5)
    with pytest.raises(ValueError):
        M.custom_measure(lambda u: np.where(u > 0, 1.0, 2.0) * np.abs(u) ** -1.5, symmetric=True)
    with pytest.raises(ValueError):
        M.stable_measure(2.0)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0, 1.5])
def test_stable_exponent_closed_form(alpha):
    t = M.LevyTriplet(jumps=M.stable_measure(alpha))
    if alpha == 1.0:
        c = math.pi
    else:
        c = 2 * math.gamma(1 - alpha) * math.cos(math.pi * alpha / 2) / alpha
    for lam in (0.5, 1.0, 7.0, -3.0):
        psi = M.characteristic_exponent(t, lam)
        assert psi.real == pytest.approx(-c * abs(lam) ** alpha, rel=1e-7)
        assert abs(psi.imag) < 1e-12


def test_log_perturbed_exponent_against_mpmath():
    m = M.log_perturbed_stable_measure(1.0)
    lam = 2.5
    w = lambda u: 1 / ((abs(mp.log(u)) + 1) * u ** 2)
    f = lambda u: (mp.cos(lam * u) - 1) * w(u)
    # (0, 1e-3] in s = -ln u; the slowly decaying non-oscillating part of
    # the tail also in log space, the oscillating part by quadosc
    near0 = mp.quad(lambda s: f(mp.exp(-s)) * mp.exp(-s), [mp.log(1e3), 20, 50, 200, mp.inf])
    head = mp.quad(f, [1e-3, 0.01, 0.1, 1 / lam, 1, 2, 4])
    osc = mp.quadosc(lambda u: mp.cos(lam * u) * w(u), [4, mp.inf], omega=lam)
    flat = mp.quad(lambda s: w(mp.exp(s)) * mp.exp(s), [mp.log(4), 10, 100, mp.inf])
    oracle = 2 * float(near0 + head + osc - flat)
    psi = M.characteristic_exponent(M.LevyTriplet(jumps=m), lam)
    assert psi.real == pytest.approx(oracle, rel=1e-8)


def test_asymmetric_exponent_against_mpmath():
    m = M.expression_measure("where(u > 0, 1.0, 0.5) * abs(u)**-1.5")
    lam = 1.7
    # weights 1 (right) and 0.5 (left): real part 1.5 x, odd part 0.5 x one side
    cos_head = mp.quad(lambda u: (mp.cos(lam * u) - 1) * u ** -1.5, [0, 1])
    cos_tail = mp.quadosc(lambda u: mp.cos(lam * u) * u ** -1.5, [1, mp.inf], omega=lam) - 2
    sin_head = mp.quad(lambda u: (mp.sin(lam * u) - lam * u) * u ** -1.5, [0, 1])
    sin_tail = mp.quadosc(lambda u: mp.sin(lam * u) * u ** -1.5, [1, mp.inf], omega=lam)
    psi = M.characteristic_exponent(M.LevyTriplet(jumps=m), lam)
    assert psi.real == pytest.approx(1.5 * float(cos_head + cos_tail), rel=1e-8)
    assert psi.imag == pytest.approx(0.5 * float(sin_head + sin_tail), rel=1e-8)


@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
@settings(max_examples=20, deadline=None)
def test_triplet_scaling_semigroup_stable(e1, e2):
    t = M.LevyTriplet(0.3, 0.7, M.stable_measure(1.2))
    a = M.scale_triplet(M.scale_triplet(t, e1), e2)
    b = M.scale_triplet(t, e1 * e2)
    assert a.variance == pytest.approx(b.variance, rel=1e-12)
    assert a.drift == pytest.approx(b.drift, rel=1e-12)
    assert a.jumps.scale == pytest.approx(b.jumps.scale, rel=1e-12)


@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
@settings(max_examples=10, deadline=None)
def test_triplet_scaling_semigroup_asymmetric(e1, e2):
    m = M.expression_measure("where(u > 0, 1.0, 0.5) * abs(u)**-1.5")
    t = M.LevyTriplet(0.2, 0.0, m)
    a = M.scale_triplet(M.scale_triplet(t, e1), e2)
    b = M.scale_triplet(t, e1 * e2)
    assert a.drift == pytest.approx(b.drift, rel=1e-7, abs=1e-10)


def test_scaled_exponent_identity():
    # psi_{eps L}(lam) = psi_L(eps lam)
    m = M.expression_measure("where(u > 0, 1.0, 0.5) * abs(u)**-1.5")
    t = M.LevyTriplet(0.2, 0.3, m)
    for eps in (0.1, 3.0):
        lhs = M.characteristic_exponent(M.scale_triplet(t, eps), 2.0)
        rhs = M.characteristic_exponent(t, 2.0 * eps)
        assert abs(lhs - rhs) < 1e-6 * abs(rhs)


def test_scale_identity_at_one():
    t = M.LevyTriplet(0.2, 0.3, M.stable_measure(1.0))
    assert M.scale_triplet(t, 1.0) is t


def test_tabulated_measure_reproduces_power_law(tmp_path):
    u = np.geomspace(1e-3, 1e3, 200)
    m = M.tabulated_measure(u, u ** -2.5)
    assert m.symmetric
    assert M.tail_mass(m, 1.0) == pytest.approx(2 / 1.5, rel=1e-6)
    assert M.tail_mass(m, 1e5) == pytest.approx(2 / 1.5 * 1e5 ** -1.5, rel=1e-4)
    p = tmp_path / "eta.csv"
    np.savetxt(p, np.column_stack([u, u ** -2.5]), delimiter=",")
    m2 = M.load_tabulated_measure(p)
    assert M.tail_mass(m2, 2.0) == pytest.approx(M.tail_mass(m, 2.0), rel=1e-12)


def test_scale_constant():
    assert M.stable_scale_constant(1.0) == pytest.approx(math.pi, rel=1e-9)
    for a in (0.5, 1.5):
        c = 2 * math.gamma(1 - a) * math.cos(math.pi * a / 2) / a
        assert M.stable_scale_constant(a) == pytest.approx(c ** (1 / a), rel=1e-8)
