"""Small-noise predictor for the mean exit time and scaling-law fits.

Three growth laws for the mean exit time are fitted in log space:

``poly``       ``c eps^-beta``
``log_poly``   ``c |ln eps| eps^-beta``
``gauss_exp``  ``exp(c / eps^2 + beta)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .conditions import DEFAULT_EPS_GRID, ScaleFunction, limit_exit_mass
from .measures import JumpMeasure

POLY = "poly"
LOG_POLY = "log_poly"
GAUSS_EXP = "gauss_exp"
MODELS = (POLY, LOG_POLY, GAUSS_EXP)

CONCLUSIVE = "conclusive"
INCONCLUSIVE = "inconclusive"
# two fits are indistinguishable when their residual sums differ by less than
# this fraction, or (for stderr-weighted fits) by less than this many chi^2 units
RELATIVE_BAND = 0.2
CHI2_BAND = 4.0


def stable_exit_prefactor(alpha, a, b):
    """``alpha / (a^-alpha + b^-alpha)``: limit of ``eps^alpha E sigma`` for stable noise."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    return alpha / (a ** -alpha + b ** -alpha)


def stable_limit_mass(alpha, a, b):
    """Mass of ``R minus [-b, a]`` under the limit measure ``|u|^(-1-alpha) du``."""
    return 1.0 / stable_exit_prefactor(alpha, a, b)


def predict_mean_exit(nu_star: Union[float, Callable, JumpMeasure], f_tilde: ScaleFunction,
                      eps, a, b):
    """Leading-order mean exit time ``1 / (f_tilde(eps) nu*(R minus [-b, a]))``.

    Parameters
    ----------
    nu_star : float, callable or JumpMeasure
        The limit mass itself, a function ``(a, b) -> mass``, or a jump
        measure whose rescaled tails (normalised by ``f_tilde``) are
        extrapolated to ``eps -> 0``.
    f_tilde : ScaleFunction
    eps, a, b : float
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if isinstance(nu_star, JumpMeasure):
        mass, _ = limit_exit_mass(nu_star, f_tilde, a, b, DEFAULT_EPS_GRID)
    elif callable(nu_star):
        mass = float(nu_star(a, b))
    else:
        mass = float(nu_star)
    if not mass > 0 or not math.isfinite(mass):
        raise ValueError(f"limit mass outside [-b, a] is {mass}: the predictor does not apply")
    return 1.0 / (f_tilde(eps) * mass)


@dataclass(frozen=True)
class ScalingFit:
    """Weighted least-squares fit of one growth law.

    ``beta`` is the exponent for ``poly``/``log_poly`` and the additive
    offset for ``gauss_exp``; ``c`` is the prefactor, respectively the
    coefficient of ``1/eps^2``.
    """

    model: str
    beta: float
    c: float
    residual_sum: float
    r_squared: float
    n_points: int

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        if self.model == POLY:
            return self.c * eps ** -self.beta
        if self.model == LOG_POLY:
            return self.c * np.abs(np.log(eps)) * eps ** -self.beta
        return np.exp(self.c / eps ** 2 + self.beta)


@dataclass(frozen=True)
class FitReport:
    best: ScalingFit
    fits: dict
    verdict: str
    candidates: tuple

    def rows(self):
        for name in MODELS:
            f = self.fits[name]
            tag = self.verdict if name in self.candidates else "rejected"
            yield name, f.beta, f.c, f.residual_sum, f.r_squared, tag


def _points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("points must be (eps, mean[, stderr]) tuples")
    eps, mean = arr[:, 0], arr[:, 1]
    se = arr[:, 2] if arr.shape[1] == 3 else np.zeros_like(eps)
    if np.any(eps <= 0) or np.any(mean <= 0):
        raise ValueError("eps and mean must be positive")
    if np.unique(eps).size != eps.size:
        raise ValueError("eps values must be distinct")
    return eps, mean, se


def _weights(mean, se):
    # delta method: var(ln mean) = (stderr/mean)^2; unit weights if any stderr is missing
    if np.all(se > 0) and np.all(np.isfinite(se)):
        return (mean / se) ** 2, True
    return np.ones_like(mean), False


def fit_model(points: Sequence, model: str) -> ScalingFit:
    """Fit one growth law to ``(eps, mean, stderr)`` points (at least 3)."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    eps, mean, se = _points(points)
    if eps.size < 3:
        raise ValueError("need at least 3 points")
    w, _ = _weights(mean, se)
    y = np.log(mean)
    if model == POLY:
        x, offset = -np.log(eps), np.zeros_like(eps)
    elif model == LOG_POLY:
        if np.any(eps >= 1):
            raise ValueError("log_poly needs eps < 1")
        x, offset = -np.log(eps), np.log(-np.log(eps))
    else:
        x, offset = eps ** -2.0, np.zeros_like(eps)
    X = np.column_stack([x, np.ones_like(x)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], (y - offset) * sw, rcond=None)
    slope, icpt = float(coef[0]), float(coef[1])
    resid = y - offset - X @ coef
    rss = float(np.sum(w * resid ** 2))
    ybar = np.sum(w * y) / np.sum(w)
    tss = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    if model == GAUSS_EXP:
        return ScalingFit(model, icpt, slope, rss, r2, int(eps.size))
    return ScalingFit(model, slope, math.exp(icpt), rss, r2, int(eps.size))


def _indistinguishable(r1, r2, weighted):
    if r2 - r1 < RELATIVE_BAND * r2:
        return True
    return weighted and r2 - r1 < CHI2_BAND


def fit_scaling_law(points: Sequence) -> FitReport:
    """Fit all three growth laws and pick the one with the smallest residual.

    The comparison is ``inconclusive`` when the runner-up's residual sum is
    within 20 % of the best one, or, when the points carry standard errors,
    within 4 chi^2 units (about a two-sigma difference).  ``candidates`` then
    lists every model in that band.
    """
    eps, mean, se = _points(points)
    if eps.size < 4:
        raise ValueError("need at least 4 points")
    fits = {m: fit_model(points, m) for m in MODELS}
    order = sorted(MODELS, key=lambda m: fits[m].residual_sum)
    _, weighted = _weights(mean, se)
    best = fits[order[0]]
    cands = tuple(m for m in order
                  if m == order[0] or _indistinguishable(best.residual_sum, fits[m].residual_sum, weighted))
    verdict = INCONCLUSIVE if len(cands) > 1 else CONCLUSIVE
    return FitReport(best, fits, verdict, cands)
