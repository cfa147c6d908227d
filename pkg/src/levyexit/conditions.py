"""Numerical checks of the small-noise scaling conditions on a jump measure.

Conditions (A)-(E) are asymptotic statements in ``eps``; on a finite grid
they are operationalised as

* bounded: ``max / median`` of the ratio over the eps grid below 10;
* convergent: extrapolated estimates from successively longer tails of the
  sequence change by less than 5 %.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalFailure
from .measures import JumpMeasure, one_sided_tail, tail_mass

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

BOUNDED_SPREAD = 10.0
CONVERGENCE_TOL = 0.05
DEFAULT_EPS_GRID = tuple(np.geomspace(1e-1, 1e-8, 15))


@dataclass(frozen=True)
class ScaleFunction:
    """A candidate rate ``g(eps) > 0`` decreasing to 0 with ``eps``."""

    kind: str
    alpha: float = 1.0
    fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    label: str = ""

    @classmethod
    def power(cls, alpha):
        """``g(eps) = eps^alpha``."""
        return cls("power", float(alpha))

    @classmethod
    def power_over_log(cls, alpha):
        """``g(eps) = eps^alpha / (-ln eps)``; defined for ``eps < 1``."""
        return cls("power_over_log", float(alpha))

    @classmethod
    def custom(cls, fn, label="custom"):
        return cls("custom", math.nan, fn, label)

    @classmethod
    def expression(cls, expr):
        """Scale function from a numpy expression in ``eps``."""
        code = compile(expr, "<scale>", "eval")
        ns = {k: getattr(np, k) for k in ("exp", "log", "sqrt", "abs")}

        def fn(eps):
            return float(eval(code, {"__builtins__": {}}, dict(ns, eps=eps)))

        return cls("custom", math.nan, fn, expr)

    def __call__(self, eps):
        if not eps > 0:
            raise ValueError("eps must be positive")
        if self.kind == "power":
            return eps ** self.alpha
        if self.kind == "power_over_log":
            if not eps < 1.0:
                raise ValueError("eps^alpha/(-ln eps) needs eps < 1")
            return eps ** self.alpha / -math.log(eps)
        return float(self.fn(eps))

    def check_decreasing(self, eps_grid=DEFAULT_EPS_GRID):
        """Raise unless ``g > 0`` and ``g`` decreases along the (decreasing) grid."""
        vals = [self(e) for e in sorted(eps_grid, reverse=True)]
        if any(not v > 0 for v in vals):
            raise ValueError(f"scale function {self} is not positive on the grid")
        if any(v2 >= v1 for v1, v2 in zip(vals, vals[1:])):
            raise ValueError(f"scale function {self} does not decrease as eps -> 0")

    def __str__(self):
        if self.kind == "custom":
            return self.label
        return f"{self.kind}({self.alpha:g})"


@dataclass
class ConditionReport:
    """Outcome of one condition check.

    ``rows`` holds ``(gamma_or_K, eps, ratio)`` triples; ``constants`` the
    estimated constants (``K(gamma)``, ``K``, ``n``).
    """

    condition: str
    verdict: str
    rows: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self):
        return self.verdict == PASS

    def csv_rows(self):
        for g, e, r in self.rows:
            yield (self.condition, f"{g:.12g}", f"{e:.12g}", f"{r:.12g}", self.verdict)


def _bounded(ratios):
    ratios = np.asarray(ratios, dtype=float)
    if not np.all(np.isfinite(ratios)):
        return False
    med = np.median(np.abs(ratios))
    if med == 0.0:
        return bool(np.all(ratios == 0.0))
    return bool(np.max(np.abs(ratios)) / med < BOUNDED_SPREAD)


def _checked_grid(eps_grid):
    eps = [float(e) for e in eps_grid]
    if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ValueError("eps grid must be strictly decreasing")
    return eps


def scaled_tail_ratio(m: JumpMeasure, g1: ScaleFunction, gamma, eps):
    """``nu(R minus [-gamma/eps, gamma/eps]) / g1(eps)``: condition (A)'s ratio."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return tail_mass(m, gamma / eps) / g1(eps)


def check_condition_A(m, g1, gammas=(0.5, 1.0, 2.0, 4.0), eps_grid=DEFAULT_EPS_GRID):
    """Tail of the rescaled measure outside ``[-gamma, gamma]`` is ``O(g1(eps))``."""
    eps_grid = _checked_grid(eps_grid)
    rep = ConditionReport("A", PASS)
    try:
        for gam in gammas:
            ratios = [scaled_tail_ratio(m, g1, gam, e) for e in eps_grid]
            rep.rows += [(gam, e, r) for e, r in zip(eps_grid, ratios)]
            rep.constants[f"K({gam:g})"] = max(ratios)
            if not _bounded(ratios):
                rep.verdict = FAIL
    except NumericalFailure as exc:
        rep.verdict, rep.note = INCONCLUSIVE, str(exc)
    return rep


def check_condition_B(m, g1, delta, eps_grid=DEFAULT_EPS_GRID, max_power=20):
    """Smallest ``K`` in ``2, 4, ..., 2^max_power`` whose tail ratio is ``<= delta``."""
    eps_grid = _checked_grid(eps_grid)
    rep = ConditionReport("B", FAIL)
    try:
        for p in range(1, max_power + 1):
            K = 2.0 ** p
            ratios = [scaled_tail_ratio(m, g1, K, e) for e in eps_grid]
            rep.rows += [(K, e, r) for e, r in zip(eps_grid, ratios)]
            if max(ratios) <= delta:
                rep.verdict = PASS
                rep.constants["K"] = K
                break
    except NumericalFailure as exc:
        rep.verdict, rep.note = INCONCLUSIVE, str(exc)
    return rep


def _extrapolate(h, y, order):
    """Value at ``h = 0`` of the least-squares polynomial of degree ``order``."""
    return float(np.polyval(np.polyfit(h, y, order), 0.0))


@dataclass(frozen=True)
class LimitTail:
    value: float
    converged: bool
    estimates: tuple
    ratios: tuple


def _extrapolated_limit(eps, ratios, variable="log"):
    ratios = np.asarray(ratios, dtype=float)
    h = np.array([1.0 / abs(math.log(e)) if variable == "log" else e for e in eps])
    if np.ptp(ratios) <= 1e-12 * np.max(np.abs(ratios)):
        return LimitTail(float(ratios[-1]), True, (float(ratios[-1]),), tuple(ratios))
    lin = _extrapolate(h[-3:], ratios[-3:], 1)
    quad = _extrapolate(h[-4:], ratios[-4:], 2)
    steps = np.abs(np.diff(ratios))
    shrinking = bool(steps[-1] <= steps[0] * (1 + 1e-9))
    converged = shrinking and abs(quad - lin) <= CONVERGENCE_TOL * abs(quad)
    return LimitTail(quad, converged, (lin, quad), tuple(float(r) for r in ratios))


def limit_tail(m, g1, gamma, eps_sequence, variable="log"):
    """Extrapolated ``nu*(R minus [-gamma, gamma])`` from the tail ratios.

    Ratios are extrapolated to ``h = 0`` with ``h = 1/|ln eps|`` (the slowest
    rate among the supported scale functions; ``variable="eps"`` uses
    ``h = eps``).  Richardson-style: the estimate from the last four points
    (quadratic) is compared with the one from the last three (linear) and the
    sequence counts as converged when they agree within 5 % and the
    successive differences shrink.
    """
    eps = _checked_grid(eps_sequence)
    if len(eps) < 4:
        raise ValueError("need at least 4 eps values")
    ratios = [scaled_tail_ratio(m, g1, gamma, e) for e in eps]
    return _extrapolated_limit(eps, ratios, variable)


def limit_side_tail(m, g1, r, sign, eps_sequence, variable="log"):
    """Extrapolated ``nu*((r, inf))`` (``sign=1``) or ``nu*((-inf, -r))`` (``sign=-1``)."""
    eps = _checked_grid(eps_sequence)
    if len(eps) < 4:
        raise ValueError("need at least 4 eps values")
    ratios = [one_sided_tail(m, r / e, sign) / g1(e) for e in eps]
    return _extrapolated_limit(eps, ratios, variable)


def limit_exit_mass(m, g1, a, b, eps_sequence=DEFAULT_EPS_GRID):
    """``nu*(R minus [-b, a])`` as the sum of two extrapolated one-sided tails."""
    right = limit_side_tail(m, g1, a, 1, eps_sequence)
    left = limit_side_tail(m, g1, b, -1, eps_sequence)
    return right.value + left.value, right.converged and left.converged


def variance_integral(m, d, eps, form="y"):
    """``d eps^2 + int u^2/(1+u^2) nu(d(u/eps))``.

    ``form="y"`` integrates ``(eps y)^2/(1+(eps y)^2)`` against the original
    measure, ``form="u"`` integrates against the rescaled density.
    """
    total = d * eps * eps
    if m is None:
        return total
    if form == "u":
        ms = m.scaled(eps)
        fn = lambda u: u * u / (1.0 + u * u)
        sides = [ms.side_integral(fn, 0.0, math.inf, s, (1.0,)) for s in (1, -1)]
    else:
        fn = lambda y: (eps * y) ** 2 / (1.0 + (eps * y) ** 2)
        sides = [m.side_integral(fn, 0.0, math.inf, s, (1.0 / eps,)) for s in (1, -1)]
    return total + sides[0] + sides[1]


def check_condition_D(m, d, g2, eps_grid=DEFAULT_EPS_GRID, g1=None, max_n=8):
    """Variance integral is ``O(g2(eps))`` and ``g2^n <= g1`` for some ``n <= max_n``."""
    eps_grid = _checked_grid(eps_grid)
    rep = ConditionReport("D", PASS)
    try:
        ratios = [variance_integral(m, d, e) / g2(e) for e in eps_grid]
    except NumericalFailure as exc:
        rep.verdict, rep.note = INCONCLUSIVE, str(exc)
        return rep
    rep.rows = [(0.0, e, r) for e, r in zip(eps_grid, ratios)]
    rep.constants["K"] = max(ratios)
    if not _bounded(ratios):
        rep.verdict = FAIL
    if g1 is not None:
        found = None
        for n in range(1, max_n + 1):
            if all(g2(e) ** n <= g1(e) * (1 + 1e-12) for e in eps_grid):
                found = n
                break
        rep.constants["n"] = found
        if found is None:
            rep.verdict = FAIL
    return rep


def drift_integral(m, eps):
    """``int u/(1+u^2) nu(d(u/eps))`` by quadrature against the original measure."""
    fn = lambda y: eps * y / (1.0 + (eps * y) ** 2)
    return (m.side_integral(fn, 0.0, math.inf, 1, (1.0 / eps,))
            - m.side_integral(fn, 0.0, math.inf, -1, (1.0 / eps,)))


def check_condition_E(m, g3, eps_grid=DEFAULT_EPS_GRID):
    """Drift integral of the rescaled measure is ``O(g3(eps))``; automatic if symmetric."""
    eps_grid = _checked_grid(eps_grid)
    if m is None or m.symmetric:
        rep = ConditionReport("E", PASS, note="symmetric measure: drift integral is 0")
        rep.rows = [(0.0, e, 0.0) for e in eps_grid]
        rep.constants["K"] = 0.0
        return rep
    rep = ConditionReport("E", PASS)
    try:
        ratios = [abs(drift_integral(m, e)) / g3(e) for e in eps_grid]
    except NumericalFailure as exc:
        rep.verdict, rep.note = INCONCLUSIVE, str(exc)
        return rep
    rep.rows = [(0.0, e, r) for e, r in zip(eps_grid, ratios)]
    rep.constants["K"] = max(ratios)
    if not _bounded(ratios):
        rep.verdict = FAIL
    return rep


def check_condition_C(m, g1, gammas=(0.5, 1.0, 2.0, 4.0), eps_grid=DEFAULT_EPS_GRID):
    """Tail ratios converge for every ``gamma`` (vague convergence away from 0)."""
    eps_grid = _checked_grid(eps_grid)
    rep = ConditionReport("C", PASS)
    try:
        for gam in gammas:
            lt = limit_tail(m, g1, gam, eps_grid)
            rep.rows += [(gam, e, r) for e, r in zip(eps_grid, lt.ratios)]
            rep.constants[f"nu*({gam:g})"] = lt.value
            if not lt.converged:
                rep.verdict = INCONCLUSIVE
    except NumericalFailure as exc:
        rep.verdict, rep.note = INCONCLUSIVE, str(exc)
    return rep


def tail_slope_hint(m, eps_grid=DEFAULT_EPS_GRID):
    """Log-log slope of ``tail_mass(1/eps)`` against ``eps``: a hint for ``g1``."""
    eps = np.asarray(_checked_grid(eps_grid))
    tails = np.array([tail_mass(m, 1.0 / e) for e in eps])
    slope, _ = np.polyfit(np.log(eps), np.log(tails), 1)
    return float(slope)
