"""Potential, noiseless flow, the G^delta start region and exit paths."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .errors import NumericalFailure
from .rng import RngStream

QUADRATIC = "quadratic"
POLYNOMIAL = "polynomial"

LEFT = -1
RIGHT = 1
CENSORED = 0
NONFINITE = 2


@dataclass(frozen=True)
class Potential:
    """Potential ``U`` through the coefficients of ``U'(x) = sum_k c_k x^k``."""

    coefficients: tuple = (0.0, 1.0)
    kind: str = QUADRATIC

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("need at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def quadratic(cls, stiffness=1.0):
        """``U(x) = stiffness * x^2 / 2``."""
        return cls((0.0, float(stiffness)), QUADRATIC)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]):
        return cls(tuple(coefficients), POLYNOMIAL)

    def derivative(self, x):
        """``U'(x)`` by Horner's rule (same order as the path kernels)."""
        c = self.coefficients
        up = np.full(np.shape(x), c[-1]) if np.ndim(x) else c[-1]
        for ck in c[-2::-1]:
            up = up * x + ck
        return up

    @property
    def relaxation_time(self):
        """``1/U''(0)``, or 1 when the curvature at 0 is not positive."""
        curv = self.coefficients[1] if len(self.coefficients) > 1 else 0.0
        return 1.0 / curv if curv > 0 else 1.0

    def check_single_well(self, a, b, n=1024):
        """Raise unless ``U'(0) = 0`` and ``x U'(x) > 0`` on ``[-b, a]`` minus 0."""
        if abs(self.derivative(0.0)) > 1e-12:
            raise ValueError("U'(0) must vanish: 0 has to be the equilibrium")
        x = np.linspace(-b, a, n)
        x = x[x != 0.0]
        if np.any(x * self.derivative(x) <= 0):
            raise ValueError("potential is not a single well on [-b, a]: x U'(x) <= 0 somewhere")


@dataclass(frozen=True)
class Domain:
    """Exit interval ``[-b, a]`` with interior margin ``delta``."""

    a: float = 1.0
    b: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not 0 <= self.delta < min(self.a, self.b):
            raise ValueError(f"delta must lie in [0, min(a, b)), got {self.delta}")

    def contains(self, x):
        return -self.b <= x <= self.a


@dataclass(frozen=True)
class ExitOutcome:
    exited: bool
    exit_time: float
    exit_side: int
    steps: int


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _scalar_flow(coeffs, x, n, dt):
    # plain-float RK4 for one start point; numpy scalars are ~20x slower here
    def f(y):
        up = coeffs[-1]
        for ck in coeffs[-2::-1]:
            up = up * y + ck
        return -up

    ys = [x]
    y = x
    h2, h6 = 0.5 * dt, dt / 6.0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + h2 * k1)
        k3 = f(y + h2 * k2)
        k4 = f(y + dt * k3)
        y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys.append(y)
    return np.array(ys)


def deterministic_flow(U: Potential, x, t_end, dt=1e-3):
    """RK4 trajectory of ``dY/dt = -U'(Y)``; returns ``(t, Y)`` arrays."""
    n = int(np.ceil(t_end / dt - 1e-9))
    t = np.arange(n + 1) * dt
    if np.ndim(x) == 0:
        return t, _scalar_flow(U.coefficients, float(x), n, dt)
    x = np.asarray(x, dtype=float)
    ys = np.empty((n + 1,) + x.shape)
    ys[0] = x
    f = lambda y: -U.derivative(y)
    y = x
    for k in range(n):
        y = _rk4_step(f, y, dt)
        ys[k + 1] = y
    return t, ys


def in_gdelta(U: Potential, dom: Domain, x, dt=1e-3, relaxations=50.0) -> bool:
    """Whether the flow from ``x`` stays at distance ``>= delta`` from both barriers.

    The flow is integrated over ``relaxations`` relaxation times and the
    minimum distance along the trajectory is compared with ``delta``.
    """
    if not dom.contains(x):
        return False
    _, ys = deterministic_flow(U, x, relaxations * U.relaxation_time, dt)
    dist = np.minimum(np.abs(ys - dom.a), np.abs(ys + dom.b))
    inside = np.all((ys >= -dom.b) & (ys <= dom.a))
    return bool(inside and dist.min() >= dom.delta)


def simulate_paths(U: Potential, sampler, dom: Domain, x0, dt, t_cap, seed, stream_ids,
                   counters=None, threads=None, backend=None):
    """Vectorised exit paths; returns ``(exit_time, side, steps, counters)`` arrays.

    ``side`` is ``RIGHT``, ``LEFT``, ``CENSORED`` or ``NONFINITE``.  Censored
    paths report ``t_cap``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_cap >= dt:
        raise ValueError("t_cap must be at least dt")
    stream_ids = np.ascontiguousarray(stream_ids, dtype=np.uint64)
    if counters is None:
        counters = np.zeros(stream_ids.shape[0], dtype=np.uint64)
    n_steps = int(np.floor(t_cap / dt + 1e-9))
    times, sides, steps, ctr = _backend.get(backend).simulate_paths(
        *sampler.kernel_args(dt), np.asarray(U.coefficients, dtype=np.float64),
        float(dom.a), float(dom.b), float(x0), float(dt), n_steps, int(seed),
        stream_ids, np.ascontiguousarray(counters, dtype=np.uint64),
        threads or _backend.default_threads())
    times = np.where(sides == CENSORED, float(t_cap), times)
    return times, sides, steps, ctr


def simulate_exit_path(U: Potential, sampler, dom: Domain, x0, dt, t_cap, rng: RngStream,
                       backend=None) -> ExitOutcome:
    """One Euler path of ``dX = -U'(X) dt + eps dL`` until it leaves ``[-b, a]``.

    The barrier test follows each full step (drift plus noise, jumps
    included), so the exit time is the end of the step in which the path
    left.  A start outside the interval exits at time 0.
    """
    times, sides, steps, ctr = simulate_paths(
        U, sampler, dom, x0, dt, t_cap, rng.seed, [rng.stream_id], [rng.counter],
        threads=1, backend=backend)
    rng.counter = int(ctr[0])
    side = int(sides[0])
    if side == NONFINITE:
        raise NumericalFailure(f"path state became non-finite after {int(steps[0])} steps")
    return ExitOutcome(exited=side != CENSORED, exit_time=float(times[0]), exit_side=side,
                       steps=int(steps[0]))
