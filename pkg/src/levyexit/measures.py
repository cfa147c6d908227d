"""Levy jump measures, generating triplets and their integral functionals.

A jump measure is stored as a *base* density ``eta`` together with a spatial
scale ``s``; the measure it represents is ``eta(u / s) / s du``, i.e. the jump
measure of ``s * L_t``.  Every functional is evaluated on the base density
after the substitution ``u = s * y``, so scaling never degrades quadrature.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import NumericalFailure

QUAD_EPSREL = 1e-8
QUAD_LIMIT = 500

STABLE = "stable"
LOG_PERTURBED_STABLE = "log_perturbed_stable"
CUSTOM = "custom"


def _quad(fn, lo, hi, **kwargs):
    """scipy ``quad`` that turns every convergence warning into an error."""
    opts = dict(epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    opts.update(kwargs)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(fn, lo, hi, **opts)
        except integrate.IntegrationWarning as exc:
            raise NumericalFailure(f"quadrature on [{lo}, {hi}] failed: {exc}") from exc
    if not math.isfinite(value):
        raise NumericalFailure(f"quadrature on [{lo}, {hi}] returned {value}")
    return value


def _half_quad(fn, lo, hi, knots=()):
    """Integrate ``fn`` over ``(lo, hi)`` on the positive half line.

    The range is split at ``knots`` (points of reduced smoothness).  A piece
    touching 0 is integrated in ``u`` (the adaptive rule copes with algebraic
    end-point singularities); pieces spanning more than a decade and the
    improper piece to infinity are integrated in ``v = ln u``.
    """
    if not 0.0 <= lo < hi:
        if lo == hi:
            return 0.0
        raise ValueError(f"bad integration range ({lo}, {hi})")

    def g(v):
        # beyond u ~ 1e130 every Levy tail is below quadrature tolerance
        if v > 300.0:
            return 0.0
        u = math.exp(v)
        return fn(u) * u

    edges = [lo] + sorted(k for k in set(knots) if lo < k < hi) + [hi]
    total = 0.0
    for u0, u1 in zip(edges[:-1], edges[1:]):
        if u0 == 0.0 or (u1 < 10.0 * u0):
            total += _quad(fn, u0, u1)
        else:
            total += _quad(g, math.log(u0), math.inf if math.isinf(u1) else math.log(u1))
    return total


# ---------------------------------------------------------------------------
# densities


def _stable_density(alpha):
    def eta(u):
        return np.abs(u) ** (-1.0 - alpha)

    return eta


def _log_perturbed_density(alpha):
    def eta(u):
        au = np.abs(u)
        return 1.0 / ((np.abs(np.log(au)) + 1.0) * au ** (1.0 + alpha))

    return eta


@dataclass(frozen=True)
class JumpMeasure:
    """Absolutely continuous Levy measure ``nu(du) = eta_s(u) du`` on R minus 0.

    Parameters
    ----------
    base_density : callable
        Vectorised ``eta`` of the unscaled measure.
    kind : str
        ``"stable"``, ``"log_perturbed_stable"`` or ``"custom"``.
    alpha : float, optional
        Stability index for the built-in kinds.
    symmetric : bool
        Declared symmetry; spot-checked at construction and used for exact
        zero short cuts of odd functionals.
    scale : float
        Spatial scale ``s``; the represented density is ``eta(u/s)/s``.
    breakpoints : tuple of float
        Positive ``|u|`` values (base units) where ``eta`` is not smooth.
    """

    base_density: Callable = field(repr=False)
    kind: str = CUSTOM
    alpha: Optional[float] = None
    symmetric: bool = False
    scale: float = 1.0
    breakpoints: tuple = (1.0,)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.alpha is not None and not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.check:
            self._validate()
            object.__setattr__(self, "check", False)

    def _validate(self):
        grid = np.logspace(-3.0, 3.0, 32)
        pos = np.asarray(self.base_density(grid), dtype=float)
        neg = np.asarray(self.base_density(-grid), dtype=float)
        if np.any(~np.isfinite(pos)) or np.any(~np.isfinite(neg)):
            raise ValueError("jump density is not finite on the check grid")
        if np.any(pos < 0) or np.any(neg < 0):
            raise ValueError("jump density must be nonnegative")
        if self.symmetric and np.any(np.abs(pos - neg) > 1e-12 * (1.0 + pos)):
            raise ValueError("density declared symmetric but eta(u) != eta(-u)")
        # Levy condition: int u^2/(1+u^2) eta(u) du < infinity
        try:
            levy_integral(self)
        except NumericalFailure as exc:
            raise NumericalFailure(
                f"Levy condition check failed (integral diverges?): {exc}"
            ) from exc

    def __call__(self, u):
        """Density of the (scaled) measure at ``u``."""
        s = self.scale
        return self.base_density(np.asarray(u, dtype=float) / s) / s

    def scaled(self, eps):
        """Jump measure of ``eps * L_t``: density ``eta(u/eps)/eps``."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        return replace(self, scale=self.scale * eps, check=False)

    def side_integral(self, fn, lo, hi, sign=1, knots=()):
        """``int_lo^hi fn(u) eta_s(sign * u) du`` for ``0 <= lo < hi <= inf``.

        ``knots`` are extra non-smooth points of ``fn`` in ``u`` units.
        """
        s = self.scale
        eta = self.base_density

        def integrand(y):
            return fn(s * y) * float(eta(sign * y))

        yknots = set(self.breakpoints) | {k / s for k in knots}
        return _half_quad(integrand, lo / s, hi / s, yknots)


def stable_measure(alpha):
    """Symmetric alpha-stable jump measure ``du / |u|^(1+alpha)``."""
    return JumpMeasure(_stable_density(alpha), kind=STABLE, alpha=float(alpha),
                       symmetric=True, breakpoints=())


def log_perturbed_stable_measure(alpha):
    """``du / ((|ln|u|| + 1) |u|^(1+alpha))``: stable density damped by a log factor."""
    return JumpMeasure(_log_perturbed_density(alpha), kind=LOG_PERTURBED_STABLE,
                       alpha=float(alpha), symmetric=True, breakpoints=(1.0,))


def custom_measure(density, symmetric=False, breakpoints=(1.0,), alpha=None):
    return JumpMeasure(density, kind=CUSTOM, alpha=alpha, symmetric=symmetric,
                       breakpoints=tuple(breakpoints))


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("abs", "exp", "log", "log1p", "sqrt", "sin", "cos", "tanh",
                 "where", "minimum", "maximum", "sign", "pi", "heaviside")
}


def expression_measure(expr, symmetric=False, breakpoints=(1.0,)):
    """Custom measure from a numpy expression in the variable ``u``.

    Example: ``"where(u > 1, u**-2.0, 0.0)"``.
    """
    code = compile(expr, "<density>", "eval")
    for name in code.co_names:
        if name != "u" and name not in _EXPR_NAMESPACE:
            raise ValueError(f"unknown name {name!r} in density expression")

    def eta(u):
        arr = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(eval(code, {"__builtins__": {}}, dict(_EXPR_NAMESPACE, u=arr)),
                             dtype=float)
        out = np.where(arr == 0, 0.0, np.broadcast_to(out, arr.shape))
        return out if out.ndim else float(out)

    return custom_measure(eta, symmetric=symmetric, breakpoints=breakpoints)


def tabulated_measure(u, eta, breakpoints=None):
    """Density from a table, interpolated linearly in ``(log|u|, log eta)``.

    Outside the table each side is extended as a power law with the slope of
    its end segments.  A table with only positive ``u`` is mirrored and the
    measure is marked symmetric.
    """
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if u.shape != eta.shape or u.ndim != 1:
        raise ValueError("table must have two columns of equal length")
    if np.any(u == 0) or np.any(eta <= 0):
        raise ValueError("table needs u != 0 and eta(u) > 0")
    sides = {}
    for sign in (1, -1):
        sel = np.sign(u) == sign
        if sel.sum() == 1:
            raise ValueError("need at least two table points per side")
        if sel.any():
            order = np.argsort(np.abs(u[sel]))
            sides[sign] = (np.log(np.abs(u[sel]))[order], np.log(eta[sel])[order])
    symmetric = -1 not in sides
    if symmetric:
        sides[-1] = sides[1]

    def side_eval(sign, au):
        if sign not in sides:
            return np.zeros_like(au)
        lx, ly = sides[sign]
        x = np.log(au)
        out = np.interp(x, lx, ly)
        lo_slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        hi_slope = (ly[-1] - ly[-2]) / (lx[-1] - lx[-2])
        out = np.where(x < lx[0], ly[0] + lo_slope * (x - lx[0]), out)
        out = np.where(x > lx[-1], ly[-1] + hi_slope * (x - lx[-1]), out)
        return np.exp(out)

    def density(v):
        v = np.asarray(v, dtype=float)
        au = np.abs(v)
        with np.errstate(divide="ignore"):
            res = np.where(v > 0, side_eval(1, np.where(au > 0, au, 1.0)),
                           side_eval(-1, np.where(au > 0, au, 1.0)))
        res = np.where(v == 0, 0.0, res)
        return res if res.ndim else float(res)

    if breakpoints is None:
        breakpoints = tuple(float(np.exp(x)) for s in sides.values() for x in (s[0][0], s[0][-1]))
    return custom_measure(density, symmetric=symmetric, breakpoints=breakpoints)


def load_tabulated_measure(path):
    """Read a two-column text file ``u eta(u)``, whitespace or comma separated.

    Lines starting with ``#`` are comments.
    """
    with open(path) as fh:
        rows = [ln.replace(",", " ") for ln in fh]
    data = np.loadtxt(rows, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return tabulated_measure(data[:, 0], data[:, 1])


# ---------------------------------------------------------------------------
# triplets


@dataclass(frozen=True)
class LevyTriplet:
    """Generating triplet ``(drift, variance, jumps)`` of a scalar Levy process.

    ``drift`` is written both theta and a in the literature; the truncation
    function of the drift is the indicator of ``|y| < 1``.
    """

    drift: float = 0.0
    variance: float = 0.0
    jumps: Optional[JumpMeasure] = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"variance must be nonnegative, got {self.variance}")
        if not math.isfinite(self.drift):
            raise ValueError("drift must be finite")

    @property
    def symmetric(self):
        return self.drift == 0.0 and (self.jumps is None or self.jumps.symmetric)


# ---------------------------------------------------------------------------
# functionals


def one_sided_tail(m, r, sign=1):
    """``nu((r, inf))`` for ``sign=1`` or ``nu((-inf, -r))`` for ``sign=-1``."""
    if not r > 0:
        raise ValueError("r must be positive")
    if m.kind == STABLE:
        return (r / m.scale) ** (-m.alpha) / m.alpha
    if m.symmetric and sign == -1:
        sign = 1
    return m.side_integral(lambda u: 1.0, r, math.inf, sign)


def tail_mass(m, r):
    """Tail mass ``T(r) = nu(R \\ [-r, r])``: rate of jumps larger than ``r``."""
    if not r > 0:
        raise ValueError("r must be positive")
    if m.kind == STABLE:
        return 2.0 / m.alpha * (r / m.scale) ** (-m.alpha)
    if m.symmetric:
        return 2.0 * one_sided_tail(m, r, 1)
    return one_sided_tail(m, r, 1) + one_sided_tail(m, r, -1)


def truncated_moment2(m, r):
    """``int_{|u| <= r} u^2 nu(du)``."""
    if not r > 0:
        raise ValueError("r must be positive")
    if m.kind == STABLE:
        a = m.alpha
        return 2.0 * m.scale ** a * r ** (2.0 - a) / (2.0 - a)
    sq = lambda u: u * u
    pos = m.side_integral(sq, 0.0, r, 1)
    return 2.0 * pos if m.symmetric else pos + m.side_integral(sq, 0.0, r, -1)


def levy_integral(m):
    """``int u^2/(1+u^2) nu(du)``, finite exactly for Levy measures."""
    fn = lambda u: u * u / (1.0 + u * u)
    knots = (1.0,)
    pos = m.side_integral(fn, 0.0, math.inf, 1, knots)
    return 2.0 * pos if m.symmetric else pos + m.side_integral(fn, 0.0, math.inf, -1, knots)


def compensator_drift(m):
    """``int u/(1+u^2) nu(du)``; exactly zero for declared-symmetric measures.

    Each half line is integrated separately, so a measure for which the
    integral is not absolutely convergent raises :class:`NumericalFailure`.
    """
    if m.symmetric:
        return 0.0
    fn = lambda u: u / (1.0 + u * u)
    return (m.side_integral(fn, 0.0, math.inf, 1, (1.0,))
            - m.side_integral(fn, 0.0, math.inf, -1, (1.0,)))


def _sin_minus_x(x):
    if abs(x) < 0.1:
        x2 = x * x
        return -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    return math.sin(x) - x


def _oscillatory_tail(m, lam, sign, weight):
    """``int_1^inf w(lam u) eta_s(sign u) du`` with ``w`` = cos or sin."""
    s = m.scale
    eta = m.base_density
    knots = sorted(k for k in set(m.breakpoints) | {1.0 / s} if k > 1.0 / s)
    y0 = 1.0 / s
    total = 0.0
    fn = math.cos if weight == "cos" else math.sin
    for y1 in knots:
        total += _quad(lambda y: fn(lam * s * y) * float(eta(sign * y)), y0, y1)
        y0 = y1
    omega = lam * s
    if omega == 0.0:
        if weight == "sin":
            return total
        return total + m.side_integral(lambda u: 1.0, y0 * s, math.inf, sign)
    sgn = 1.0
    if omega < 0:
        omega = -omega
        sgn = -1.0 if weight == "sin" else 1.0
    # the Fourier-integral rule needs an absolute tolerance; tie it to the mass
    mass = m.side_integral(lambda u: 1.0, y0 * s, math.inf, sign)
    tail = _quad(lambda y: float(eta(sign * y)), y0, math.inf, weight=weight, wvar=omega,
                 epsabs=max(QUAD_EPSREL * 1e-2 * mass, 1e-300))
    return total + sgn * tail


def _jump_exponent(m, lam):
    """Compensated jump part of the Levy-Khintchine exponent."""
    if lam == 0.0:
        return 0.0 + 0.0j
    sides = (1,) if m.symmetric else (1, -1)
    re = 0.0
    im = 0.0
    for sign in sides:
        # |u| < 1: cos(x) - 1 = -2 sin^2(x/2) avoids cancellation near 0
        near = m.side_integral(lambda u: -2.0 * math.sin(0.5 * lam * u) ** 2, 0.0, 1.0, sign)
        far = _oscillatory_tail(m, lam, sign, "cos") - one_sided_tail(m, 1.0, sign)
        re += near + far
        if not m.symmetric:
            odd = (m.side_integral(lambda u: _sin_minus_x(lam * u), 0.0, 1.0, sign)
                   + _oscillatory_tail(m, lam, sign, "sin"))
            im += sign * odd
    if m.symmetric:
        re *= 2.0
    return complex(re, im)


def characteristic_exponent(t, lam):
    """Levy-Khintchine exponent ``psi`` with ``E exp(i lam L_1) = exp(psi(lam))``."""
    lam = float(lam)
    psi = complex(-0.5 * t.variance * lam * lam, t.drift * lam)
    if t.jumps is not None:
        psi += _jump_exponent(t.jumps, lam)
    return psi


def _truncation_shift(m, eps):
    """``int v (1{|v| < 1/eps} - 1{|v| < 1}) nu(dv)`` (finite for any Levy measure)."""
    if m.symmetric or eps == 1.0:
        return 0.0
    lo, hi, sgn = (1.0, 1.0 / eps, 1.0) if eps < 1.0 else (1.0 / eps, 1.0, -1.0)
    ident = lambda u: u
    return sgn * (m.side_integral(ident, lo, hi, 1) - m.side_integral(ident, lo, hi, -1))


def scale_triplet(t, eps):
    """Generating triplet of ``eps * L_t``.

    drift ``eps*theta - eps*int y 1{|y|<1} nu(dy) + int y 1{|y|<1} nu(d(y/eps))``,
    variance ``eps^2 d``, jump density ``eta(u/eps)/eps``.  The two drift
    corrections are combined into one integral over ``1 <= |v| < 1/eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps == 1.0:
        return t
    jumps = None
    drift = eps * t.drift
    if t.jumps is not None:
        drift += eps * _truncation_shift(t.jumps, eps)
        jumps = t.jumps.scaled(eps)
    return LevyTriplet(drift=drift, variance=t.variance * eps * eps, jumps=jumps)


@lru_cache(maxsize=64)
def stable_scale_constant(alpha):
    """``sigma`` such that ``du/|u|^(1+alpha)`` is the measure of ``sigma * S``.

    ``S`` is the standard symmetric stable law with ``E exp(i lam S) =
    exp(-|lam|^alpha)``.  Obtained from the exponent of the measure itself,
    ``sigma^alpha = -psi(1)``, evaluated by quadrature.
    """
    psi1 = characteristic_exponent(LevyTriplet(jumps=stable_measure(alpha)), 1.0)
    return (-psi1.real) ** (1.0 / alpha)


def measure_from_name(kind, alpha=None):
    """Built-in measure by config name."""
    if kind == STABLE:
        return stable_measure(alpha)
    if kind == LOG_PERTURBED_STABLE:
        return log_perturbed_stable_measure(alpha)
    raise ValueError(f"unknown measure kind {kind!r}")

