"""Mean exit time from the nonlocal Dirichlet problem ``A u = -1`` on ``(-b, a)``.

``u(x) = E_x sigma`` vanishes outside the interval and solves the equation
with the full generator of ``dX = -U'(X) dt + eps dL``.  After the
substitution ``z = eps y`` the jump part acts through the scaled density
``k(z) = eta(z/eps)/eps``:

    A u = (-U' + eps theta + c1) u' + (eps^2 d + m2(rho)) u''/2
          + int_{|z| > rho} (u(x+z) - u(x)) k(z) dz

where ``m2(rho)`` is the second moment of ``k`` over ``|z| <= rho`` (Taylor
treatment of the small jumps) and ``c1 = int z (1{|z|<=rho} - 1{|z|<eps}) k``
is the compensator mismatch, zero for symmetric measures.

The big-jump integral uses piecewise-linear interpolation of ``u`` between
nodes (``u = 0`` at and beyond the barriers), so its weights depend only on
the node offset and form a Toeplitz block.  Drift is upwinded, which keeps
the matrix an M-matrix and the discrete solution nonnegative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dynamics import Domain, Potential
from .errors import DiscretizationFailure, NumericalFailure
from .measures import LevyTriplet, one_sided_tail, truncated_moment2

DEFAULT_NODES = 2000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class SolverGrid:
    """``n`` interior nodes of ``[-b, a]`` with split radius ``rho`` (in x units).

    ``rho=None`` means four grid spacings.
    """

    n: int = DEFAULT_NODES
    rho: float = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 interior nodes")

    def spacing(self, dom: Domain):
        return (dom.a + dom.b) / (self.n + 1)

    def nodes(self, dom: Domain):
        h = self.spacing(dom)
        return -dom.b + h * np.arange(1, self.n + 1)

    def split_radius(self, dom: Domain):
        h = self.spacing(dom)
        rho = 4.0 * h if self.rho is None else float(self.rho)
        if rho < 2.0 * h * (1 - 1e-12):
            raise ValueError(f"rho={rho} is below twice the spacing {h}")
        return rho


def _jump_weights(k, rho, h, n, sign, kinks):
    """``w[m] = int_{z > rho} hat_m(z) k(sign z) dz`` for ``m = 0..n``."""
    top = n * h
    w = np.zeros(n + 2)
    if rho >= top:
        return w
    j0 = int(math.floor(rho / h)) + 1
    edges = np.concatenate([[rho], h * np.arange(j0, n + 1), [k_ for k_ in kinks if rho < k_ < top]])
    edges = np.unique(np.clip(edges, rho, top))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    z = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_X[None, :]
    f = np.asarray(k(sign * z), dtype=float) * half[:, None] * _GL_W[None, :]
    if not np.all(np.isfinite(f)):
        raise NumericalFailure("jump density is not finite on the solver grid")
    t = z / h
    j = np.floor(t).astype(np.int64)
    frac = t - j
    np.add.at(w, j.ravel(), (f * (1.0 - frac)).ravel())
    np.add.at(w, (j + 1).ravel(), (f * frac).ravel())
    return w[: n + 1]


def _compensator_mismatch(k, rho, eps):
    """``int z (1{|z| <= rho} - 1{|z| < eps}) k(z) dz`` for the scaled measure ``k``."""
    if k.symmetric or rho == eps:
        return 0.0
    lo, hi = min(rho, eps), max(rho, eps)
    z = lambda u: u
    val = k.side_integral(z, lo, hi, 1) - k.side_integral(z, lo, hi, -1)
    return val if rho > eps else -val


def assemble_generator_matrix(U: Potential, t: LevyTriplet, eps, dom: Domain,
                              grid: SolverGrid = SolverGrid()):
    """Dense matrix of the discrete generator on the interior nodes."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = grid.n
    h = grid.spacing(dom)
    x = grid.nodes(dom)
    rho = grid.split_radius(dom)

    A = np.zeros((n, n))
    diff = eps * eps * t.variance
    drift = -U.derivative(x) + eps * t.drift
    m = t.jumps
    if m is not None:
        k = m.scaled(eps)
        diff += truncated_moment2(k, rho)
        drift = drift + _compensator_mismatch(k, rho, eps)
        kinks = tuple(b * k.scale for b in k.breakpoints)
        wp = _jump_weights(k, rho, h, n, 1, kinks)
        wm = wp if k.symmetric else _jump_weights(k, rho, h, n, -1, kinks)
        # column j - i = m > 0 jumps right, row offset -m jumps left
        A += linalg.toeplitz(np.concatenate([[0.0], wm[1:n]]), np.concatenate([[0.0], wp[1:n]]))
        big = one_sided_tail(k, rho, 1) + one_sided_tail(k, rho, -1)
        A[np.diag_indices(n)] -= big

    c2 = 0.5 * diff / (h * h)
    up = np.maximum(drift, 0.0) / h
    dn = np.maximum(-drift, 0.0) / h
    i = np.arange(n)
    A[i, i] -= 2.0 * c2 + up + dn
    A[i[:-1], i[:-1] + 1] += c2 + up[:-1]
    A[i[1:], i[1:] - 1] += c2 + dn[1:]
    return A


@dataclass(frozen=True)
class BvpSolution:
    """Grid values of ``u`` including the barrier nodes, where ``u = 0``."""

    x: np.ndarray
    u: np.ndarray
    rho: float

    def __call__(self, x0):
        return np.interp(x0, self.x, self.u, left=0.0, right=0.0)


def solve_mean_exit_bvp(U: Potential, t: LevyTriplet, eps, dom: Domain,
                        grid: SolverGrid = SolverGrid()) -> BvpSolution:
    """Mean exit time ``x -> E_x sigma`` from the discrete Dirichlet problem."""
    A = assemble_generator_matrix(U, t, eps, dom, grid)
    try:
        lu = linalg.lu_factor(A, check_finite=True)
        u = linalg.lu_solve(lu, -np.ones(grid.n))
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"generator matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise NumericalFailure("generator matrix is singular: non-finite solution")
    if np.min(u) < -1e-8:
        raise DiscretizationFailure(f"maximum principle violated: min u = {np.min(u):.3g}")
    x = np.concatenate([[-dom.b], grid.nodes(dom), [dom.a]])
    return BvpSolution(x, np.concatenate([[0.0], np.maximum(u, 0.0), [0.0]]), grid.split_radius(dom))
