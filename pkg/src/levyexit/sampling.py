"""Increments of ``eps * L_t`` over a time step.

Three routes, all driven by counter-based :class:`~levyexit.rng.RngStream`
draws:

* Gaussian part: Box-Muller.
* Symmetric alpha-stable measures: exact Chambers-Mallows-Stuck variates,
  scaled so that the Levy measure of the increment is exactly
  ``eps^alpha dt du/|u|^(1+alpha)``.
* Any other measure: compound Poisson for jumps larger than ``delta_cut``
  plus a Gaussian stand-in (or nothing) for the small jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import NumericalFailure
from .measures import (
    STABLE,
    JumpMeasure,
    LevyTriplet,
    characteristic_exponent,
    one_sided_tail,
    scale_triplet,
    stable_scale_constant,
    tail_mass,
    truncated_moment2,
)
from .rng import RngStream

GAUSSIAN_PROXY = "gaussian_proxy"
DROP = "drop"
DEFAULT_DELTA_CUT = 1e-3

MODE_GAUSS = 0
MODE_STABLE = 1
MODE_POISSON = 2

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# jump-size tables


@dataclass(frozen=True)
class JumpTable:
    """One-sided tail masses ``T_+(r)``, ``T_-(r)`` on a log grid from the cutoff.

    Inversion interpolates linearly in ``(log r, log T)``; beyond the last
    node the tail is continued as a power law with the end slope.
    """

    cutoff: float
    log_r: np.ndarray = field(repr=False)
    log_tp: np.ndarray = field(repr=False)
    log_tm: np.ndarray = field(repr=False)
    slope_p: float
    slope_m: float
    mass_p: float
    mass_m: float

    @property
    def p_plus(self):
        return self.mass_p / (self.mass_p + self.mass_m)

    def quantile(self, q, sign=1):
        """Jump size ``r`` with ``T_side(r) = q * T_side(cutoff)``, by bisection."""
        q = np.asarray(q, dtype=float)
        lt = self.log_tp if sign > 0 else self.log_tm
        slope = self.slope_p if sign > 0 else self.slope_m
        target = np.log(q) + lt[0]
        n = lt.shape[0]
        out = np.empty(target.shape)
        for idx, tgt in np.ndenumerate(target):
            if tgt <= lt[-1]:
                out[idx] = self.log_r[-1] + (tgt - lt[-1]) / slope
                continue
            lo, hi = 0, n - 1
            for _ in range(200):
                if hi - lo <= 1:
                    break
                mid = (lo + hi) // 2
                if lt[mid] >= tgt:
                    lo = mid
                else:
                    hi = mid
            else:
                raise NumericalFailure("tail bisection did not converge")
            out[idx] = self.log_r[lo] + (tgt - lt[lo]) * (
                (self.log_r[hi] - self.log_r[lo]) / (lt[hi] - lt[lo]))
        out = np.exp(out)
        return out if out.ndim else float(out)


def _side_table(m, r, sign):
    """Cumulative one-sided tails at the nodes ``r`` (Gauss-Legendre per cell)."""
    lo, hi = r[:-1], r[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    dens = np.asarray(m(sign * nodes), dtype=float)
    cells = half * (dens @ _GL_W)
    far = one_sided_tail(m, float(r[-1]), sign)
    return far + np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])


@lru_cache(maxsize=32)
def build_jump_table(m: JumpMeasure, cutoff: float, per_decade: int = 128,
                     decades: int = 16) -> JumpTable:
    """Tabulate the tails of ``m`` restricted to ``|u| > cutoff``."""
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    r = cutoff * np.logspace(0.0, decades, decades * per_decade + 1)
    kinks = [m.scale * k for k in m.breakpoints if r[0] < m.scale * k < r[-1]]
    r = np.unique(np.concatenate([r, kinks]))
    tp = _side_table(m, r, 1)
    tm = tp if m.symmetric else _side_table(m, r, -1)
    if tp[0] + tm[0] <= 0.0:
        raise NumericalFailure(f"no jump mass beyond cutoff {cutoff}")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(r)
        log_tp = np.log(tp) if tp[0] > 0 else np.zeros_like(r)
        log_tm = np.log(tm) if tm[0] > 0 else np.zeros_like(r)
        slope_p = (log_tp[-1] - log_tp[-2]) / (log_r[-1] - log_r[-2])
        slope_m = (log_tm[-1] - log_tm[-2]) / (log_r[-1] - log_r[-2])
    return JumpTable(cutoff, log_r, log_tp, log_tm, float(slope_p), float(slope_m),
                     float(tp[0]), float(tm[0]))


def sample_jump_size(m: JumpMeasure, delta_cut: float, rng: RngStream) -> float:
    """Draw from ``m`` restricted to ``|u| > delta_cut`` and normalised.

    The sign is chosen by the relative one-sided tail weights, the size by
    inverting the one-sided tail.
    """
    if not tail_mass(m, delta_cut) > 0:
        raise ValueError("measure has no mass beyond the cutoff")
    table = build_jump_table(m, float(delta_cut))
    u1, u2 = rng.next_pair()
    if u1 < table.p_plus:
        return table.quantile(u2, 1)
    return -table.quantile(u2, -1)


# ---------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class NoiseSampler:
    """Increment generator for ``eps * L_t``.

    Parameters
    ----------
    triplet : LevyTriplet
        Triplet of the unscaled process ``L_t``.
    epsilon : float
        Noise intensity.
    delta_cut : float
        Jump cutoff (in units of the scaled jumps) for the compound-Poisson route.
    small_jump_mode : {"gaussian_proxy", "drop"}, optional
        Treatment of jumps below the cutoff.  Default: Gaussian proxy for
        ``alpha >= 1`` (or unknown alpha), drop for ``alpha < 1``.
    method : {"auto", "decomposition"}
        ``auto`` uses exact stable variates for stable measures.
    """

    triplet: LevyTriplet
    epsilon: float
    delta_cut: float = DEFAULT_DELTA_CUT
    small_jump_mode: Optional[str] = None
    method: str = "auto"
    scaled: LevyTriplet = field(init=False, repr=False)
    mode: int = field(init=False)
    drift: float = field(init=False)
    gauss_var: float = field(init=False)
    stable_scale: float = field(init=False)
    rate: float = field(init=False)
    table: Optional[JumpTable] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.delta_cut > 0:
            raise ValueError("delta_cut must be positive")
        if self.method not in ("auto", "decomposition"):
            raise ValueError(f"unknown method {self.method!r}")
        jumps = self.triplet.jumps
        mode_name = self.small_jump_mode
        if mode_name is None:
            alpha = jumps.alpha if jumps is not None else None
            mode_name = DROP if alpha is not None and alpha < 1.0 else GAUSSIAN_PROXY
        if mode_name not in (GAUSSIAN_PROXY, DROP):
            raise ValueError(f"unknown small_jump_mode {mode_name!r}")
        setattr_ = object.__setattr__
        setattr_(self, "small_jump_mode", mode_name)
        scaled = scale_triplet(self.triplet, self.epsilon)
        setattr_(self, "scaled", scaled)
        var = scaled.variance
        drift = scaled.drift
        stable_scale = 0.0
        rate = 0.0
        table = None
        m = scaled.jumps
        if m is None:
            mode = MODE_GAUSS
        elif m.kind == STABLE and self.method == "auto":
            mode = MODE_STABLE
            stable_scale = m.scale * stable_scale_constant(m.alpha)
        else:
            mode = MODE_POISSON
            cut = self.delta_cut
            table = build_jump_table(m, cut)
            rate = table.mass_p + table.mass_m
            if not m.symmetric:
                drift += _cutoff_shift(m, cut)
            if mode_name == GAUSSIAN_PROXY:
                var += truncated_moment2(m, cut)
        setattr_(self, "mode", mode)
        setattr_(self, "drift", drift)
        setattr_(self, "gauss_var", var)
        setattr_(self, "stable_scale", stable_scale)
        setattr_(self, "rate", rate)
        setattr_(self, "table", table)

    @property
    def alpha(self):
        m = self.triplet.jumps
        return m.alpha if m is not None and m.alpha is not None else 1.0

    def kernel_args(self, dt):
        """Per-step constants in the positional order of the kernels."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        alpha = self.alpha
        if self.table is not None:
            t = self.table
            tabs = (t.log_r, t.log_tp, t.log_tm, t.slope_p, t.slope_m)
            p_plus = t.p_plus
        else:
            z = np.zeros(2)
            tabs = (z, z, z, -1.0, -1.0)
            p_plus = 1.0
        return (self.mode, self.drift * dt, math.sqrt(self.gauss_var * dt), alpha,
                self.stable_scale * dt ** (1.0 / alpha), self.rate * dt, p_plus, 1.0) + tabs


def _cutoff_shift(m, cut):
    """``int u (1{|u| <= cut} - 1{|u| < 1}) nu(du)`` for an asymmetric measure."""
    if cut == 1.0:
        return 0.0
    lo, hi, sgn = (cut, 1.0, -1.0) if cut < 1.0 else (1.0, cut, 1.0)
    ident = lambda u: u
    return sgn * (m.side_integral(ident, lo, hi, 1) - m.side_integral(ident, lo, hi, -1))


def sample_gaussian_increment(d, eps, dt, rng: RngStream) -> float:
    """Draw from ``Normal(0, eps^2 d dt)``; exactly 0 when ``d == 0``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if d == 0:
        return 0.0
    u1, u2 = rng.next_pair()
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    return math.sqrt(eps * eps * d * dt) * z


def _cms(alpha, u1, u2):
    phi = math.pi * (u1 - 0.5)
    if alpha == 1.0:
        return math.tan(phi)
    w = -math.log(u2)
    return (math.sin(alpha * phi) / math.cos(phi) ** (1.0 / alpha)
            * (math.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha))


def sample_stable_increment(alpha, eps, dt, rng: RngStream) -> float:
    """Increment over ``dt`` of ``eps * L`` with ``L`` of measure ``du/|u|^(1+alpha)``."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    u1, u2 = rng.next_pair()
    scale = eps * stable_scale_constant(float(alpha)) * dt ** (1.0 / alpha)
    return scale * _cms(float(alpha), u1, u2)


def sample_general_increment(s: NoiseSampler, dt, rng: RngStream, backend=None) -> float:
    """One increment of the sampler's process over ``dt`` (advances ``rng``)."""
    inc, ctr = _backend.get(backend).sample_increments(
        *s.kernel_args(dt), rng.seed,
        np.array([rng.stream_id], dtype=np.uint64), np.array([rng.counter], dtype=np.uint64))
    rng.counter = int(ctr[0])
    return float(inc[0])


def sample_increments(s: NoiseSampler, dt, n, seed=0, first_stream=0, threads=None,
                      backend=None) -> np.ndarray:
    """``n`` independent increments, draw ``k`` from stream ``first_stream + k``."""
    streams = np.arange(first_stream, first_stream + n, dtype=np.uint64)
    inc, _ = _backend.get(backend).sample_increments(
        *s.kernel_args(dt), int(seed), streams, np.zeros(n, dtype=np.uint64),
        threads or _backend.default_threads())
    return inc


# ---------------------------------------------------------------------------
# validation


@dataclass
class SamplerReport:
    """Empirical characteristic function against ``exp(t psi_eps(lam))``."""

    lambdas: np.ndarray
    ecf: np.ndarray
    model: np.ndarray
    max_error: float
    threshold: float
    n: int

    @property
    def errors(self):
        return np.abs(self.ecf - self.model)

    @property
    def passed(self):
        return bool(self.max_error < self.threshold)


def validate_sampler(s: NoiseSampler, t, n, lambdas: Sequence[float], seed=0,
                     threads=None, backend=None, quad_tol=1e-6) -> SamplerReport:
    """Compare the ECF of ``n`` increments over time ``t`` with Levy-Khintchine.

    Passes when ``max |ECF - exp(t psi)| < 5/sqrt(n) + quad_tol``.
    """
    if n < 10_000:
        raise ValueError("validate_sampler needs n >= 10^4")
    x = sample_increments(s, t, n, seed=seed, threads=threads, backend=backend)
    lam = np.asarray(lambdas, dtype=float)
    ecf = np.array([np.mean(np.exp(1j * l * x)) for l in lam])
    model = np.array([np.exp(t * characteristic_exponent(s.scaled, l)) for l in lam])
    err = np.abs(ecf - model)
    return SamplerReport(lam, ecf, model, float(err.max()), 5.0 / math.sqrt(n) + quad_tol, n)
