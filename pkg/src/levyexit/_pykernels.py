"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``.

Same signatures and the same order of stream consumption; paths are
vectorised across streams instead of looped.
"""
import numpy as np

from .rng import uniform_pairs as _philox_pairs

MODE_GAUSS = 0
MODE_STABLE = 1
MODE_POISSON = 2


def uniform_pairs(seed, stream_ids, counters):
    return _philox_pairs(seed, stream_ids, counters)


def _table_jump(q, log_r, lt, slope, jump_scale):
    target = np.log(q) + lt[0]
    n = lt.shape[0]
    # largest index lo with lt[lo] >= target (lt is non-increasing)
    lo = np.searchsorted(-lt, -target, side="right") - 1
    lo = np.clip(lo, 0, n - 2)
    hi = lo + 1
    beyond = target <= lt[n - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = log_r[lo] + (target - lt[lo]) * (log_r[hi] - log_r[lo]) / (lt[hi] - lt[lo])
        outer = log_r[n - 1] + (target - lt[n - 1]) / slope
    return jump_scale * np.exp(np.where(beyond, outer, inner))


def _increments(noise, seed, streams, ctr):
    """One increment for every stream; advances ``ctr`` in place."""
    (mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
     log_r, log_tp, log_tm, slope_p, slope_m) = noise
    inc = np.full(streams.shape[0], drift_dt)
    one = np.uint64(1)
    if gsd > 0.0:
        u1, u2 = _philox_pairs(seed, streams, ctr)
        ctr += one
        inc += gsd * (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))
    if mode == MODE_STABLE:
        u1, u2 = _philox_pairs(seed, streams, ctr)
        ctr += one
        phi = np.pi * (u1 - 0.5)
        if alpha == 1.0:
            s = np.tan(phi)
        else:
            w = -np.log(u2)
            s = (np.sin(alpha * phi) / np.power(np.cos(phi), 1.0 / alpha)
                 * np.power(np.cos((1.0 - alpha) * phi) / w, (1.0 - alpha) / alpha))
        inc += sfac * s
    elif mode == MODE_POISSON:
        u1, _ = _philox_pairs(seed, streams, ctr)
        ctr += one
        acc = -np.log(u1)
        pending = np.flatnonzero(acc <= lam_dt)
        while pending.size:
            st = streams[pending]
            u1, u2 = _philox_pairs(seed, st, ctr[pending])
            ctr[pending] += one
            plus = u1 < p_plus
            jump = np.empty(pending.size)
            if plus.any():
                jump[plus] = _table_jump(u2[plus], log_r, log_tp, slope_p, jump_scale)
            if (~plus).any():
                jump[~plus] = -_table_jump(u2[~plus], log_r, log_tm, slope_m, jump_scale)
            inc[pending] += jump
            u1, _ = _philox_pairs(seed, st, ctr[pending])
            ctr[pending] += one
            acc[pending] += -np.log(u1)
            pending = pending[acc[pending] <= lam_dt]
    return inc


def sample_increments(mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
                      log_r, log_tp, log_tm, slope_p, slope_m, seed, stream_ids, ctr0,
                      threads=1):
    noise = (mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
             np.asarray(log_r), np.asarray(log_tp), np.asarray(log_tm), slope_p, slope_m)
    streams = np.asarray(stream_ids, dtype=np.uint64)
    ctr = np.array(ctr0, dtype=np.uint64, copy=True)
    with np.errstate(over="ignore", invalid="ignore"):
        inc = _increments(noise, seed, streams, ctr)
    return inc, ctr


def simulate_paths(mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
                   log_r, log_tp, log_tm, slope_p, slope_m, coeffs, a, b, x0, dt,
                   n_steps, seed, stream_ids, ctr0, threads=1):
    noise = (mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
             np.asarray(log_r), np.asarray(log_tp), np.asarray(log_tm), slope_p, slope_m)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    streams = np.asarray(stream_ids, dtype=np.uint64)
    n = streams.shape[0]
    ctr = np.array(ctr0, dtype=np.uint64, copy=True)
    sides = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    if x0 > a:
        sides[:] = 1
        return np.zeros(n), sides, steps, ctr
    if x0 < -b:
        sides[:] = -1
        return np.zeros(n), sides, steps, ctr
    active = np.arange(n)
    x = np.full(n, float(x0))
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while active.size and k < n_steps:
            xa = x[active]
            up = np.full(active.size, coeffs[-1])
            for c in coeffs[-2::-1]:
                up = up * xa + c
            sub_ctr = ctr[active]
            xa = (xa - up * dt) + _increments(noise, seed, streams[active], sub_ctr)
            ctr[active] = sub_ctr
            x[active] = xa
            k += 1
            bad = ~np.isfinite(xa)
            right = (xa > a) & ~bad
            left = (xa < -b) & ~bad
            done = bad | right | left
            if done.any():
                idx = active[done]
                sides[idx] = np.where(bad[done], 2, np.where(right[done], 1, -1))
                steps[idx] = k
                active = active[~done]
    steps[active] = k
    return steps * dt, sides, steps, ctr
