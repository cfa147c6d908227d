# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Philox streams, noise increments and exit paths.

Mirrors ``_pykernels`` step for step; both consume the random stream in the
same order so results agree up to libm rounding.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, log, exp, cos, sin, tan, pow, isfinite, M_PI
from libc.stdint cimport uint32_t, uint64_t, int64_t, int8_t

cnp.import_array()

cdef enum:
    MODE_GAUSS = 0
    MODE_STABLE = 1
    MODE_POISSON = 2

cdef struct Noise:
    int mode
    double drift_dt
    double gsd
    double alpha
    double sfac
    double lam_dt
    double p_plus
    double jump_scale
    const double* log_r
    const double* log_tp
    const double* log_tm
    int n_table
    double slope_p
    double slope_m


cdef inline void philox_pair(uint64_t seed, uint64_t stream, uint64_t n,
                             double* u1, double* u2) noexcept nogil:
    cdef uint32_t c0 = <uint32_t>(n & 0xFFFFFFFFu)
    cdef uint32_t c1 = <uint32_t>(n >> 32)
    cdef uint32_t c2 = <uint32_t>(stream & 0xFFFFFFFFu)
    cdef uint32_t c3 = <uint32_t>(stream >> 32)
    cdef uint32_t k0 = <uint32_t>(seed & 0xFFFFFFFFu)
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef uint64_t p0, p1
    cdef int r
    for r in range(10):
        p0 = <uint64_t>0xD2511F53u * c0
        p1 = <uint64_t>0xCD9E8D57u * c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + 0x9E3779B9u
        k1 = k1 + 0xBB67AE85u
    u1[0] = (<double>(((<uint64_t>c1 << 32) | c0) >> 12) + 0.5) * 2.220446049250313e-16
    u2[0] = (<double>(((<uint64_t>c3 << 32) | c2) >> 12) + 0.5) * 2.220446049250313e-16


cdef inline double table_jump(const Noise* nz, double q, int positive) noexcept nogil:
    cdef const double* lt = nz.log_tp if positive else nz.log_tm
    cdef double slope = nz.slope_p if positive else nz.slope_m
    cdef int n = nz.n_table
    cdef double target = log(q) + lt[0]
    cdef double lr
    cdef int lo = 0, hi = n - 1, mid
    if target <= lt[n - 1]:
        lr = nz.log_r[n - 1] + (target - lt[n - 1]) / slope
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if lt[mid] >= target:
                lo = mid
            else:
                hi = mid
        lr = nz.log_r[lo] + (target - lt[lo]) * (nz.log_r[hi] - nz.log_r[lo]) / (lt[hi] - lt[lo])
    return nz.jump_scale * exp(lr)


cdef inline double increment(const Noise* nz, uint64_t seed, uint64_t stream,
                             uint64_t* ctr) noexcept nogil:
    cdef double inc = nz.drift_dt
    cdef double u1, u2, phi, w, s, acc
    if nz.gsd > 0.0:
        philox_pair(seed, stream, ctr[0], &u1, &u2)
        ctr[0] += 1
        inc += nz.gsd * (sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2))
    if nz.mode == MODE_STABLE:
        philox_pair(seed, stream, ctr[0], &u1, &u2)
        ctr[0] += 1
        phi = M_PI * (u1 - 0.5)
        if nz.alpha == 1.0:
            s = tan(phi)
        else:
            w = -log(u2)
            s = (sin(nz.alpha * phi) / pow(cos(phi), 1.0 / nz.alpha)
                 * pow(cos((1.0 - nz.alpha) * phi) / w, (1.0 - nz.alpha) / nz.alpha))
        inc += nz.sfac * s
    elif nz.mode == MODE_POISSON:
        philox_pair(seed, stream, ctr[0], &u1, &u2)
        ctr[0] += 1
        acc = -log(u1)
        while acc <= nz.lam_dt:
            philox_pair(seed, stream, ctr[0], &u1, &u2)
            ctr[0] += 1
            if u1 < nz.p_plus:
                inc += table_jump(nz, u2, 1)
            else:
                inc -= table_jump(nz, u2, 0)
            philox_pair(seed, stream, ctr[0], &u1, &u2)
            ctr[0] += 1
            acc += -log(u1)
    return inc


cdef Noise make_noise(int mode, double drift_dt, double gsd, double alpha, double sfac,
                      double lam_dt, double p_plus, double jump_scale,
                      const double[::1] log_r, const double[::1] log_tp,
                      const double[::1] log_tm, double slope_p, double slope_m):
    cdef Noise nz
    nz.mode = mode
    nz.drift_dt = drift_dt
    nz.gsd = gsd
    nz.alpha = alpha
    nz.sfac = sfac
    nz.lam_dt = lam_dt
    nz.p_plus = p_plus
    nz.jump_scale = jump_scale
    nz.n_table = log_r.shape[0]
    if nz.n_table < 2 and mode == MODE_POISSON:
        raise ValueError("compound-Poisson mode needs a jump table")
    nz.log_r = &log_r[0]
    nz.log_tp = &log_tp[0]
    nz.log_tm = &log_tm[0]
    nz.slope_p = slope_p
    nz.slope_m = slope_m
    return nz


def sample_increments(int mode, double drift_dt, double gsd, double alpha, double sfac,
                      double lam_dt, double p_plus, double jump_scale,
                      const double[::1] log_r, const double[::1] log_tp,
                      const double[::1] log_tm, double slope_p, double slope_m,
                      uint64_t seed, const uint64_t[::1] stream_ids, const uint64_t[::1] ctr0,
                      int threads=1):
    """One increment per stream; returns ``(increments, counters_after)``."""
    cdef Noise nz = make_noise(mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
                               log_r, log_tp, log_tm, slope_p, slope_m)
    cdef Py_ssize_t n = stream_ids.shape[0], i
    out = np.empty(n, dtype=np.float64)
    ctr_out = np.empty(n, dtype=np.uint64)
    cdef double[::1] o = out
    cdef uint64_t[::1] c = ctr_out
    cdef uint64_t ctr
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        ctr = ctr0[i]
        o[i] = increment(&nz, seed, stream_ids[i], &ctr)
        c[i] = ctr
    return out, ctr_out


def simulate_paths(int mode, double drift_dt, double gsd, double alpha, double sfac,
                   double lam_dt, double p_plus, double jump_scale,
                   const double[::1] log_r, const double[::1] log_tp,
                   const double[::1] log_tm, double slope_p, double slope_m,
                   const double[::1] coeffs, double a, double b, double x0, double dt,
                   int64_t n_steps, uint64_t seed, const uint64_t[::1] stream_ids,
                   const uint64_t[::1] ctr0, int threads=1):
    """Euler scheme with exit test after every step, one path per stream.

    Returns ``(exit_time, side, steps, counters_after)``; side is +1 (right
    barrier), -1 (left), 0 (censored at ``n_steps``) or 2 (non-finite state).
    """
    cdef Noise nz = make_noise(mode, drift_dt, gsd, alpha, sfac, lam_dt, p_plus, jump_scale,
                               log_r, log_tp, log_tm, slope_p, slope_m)
    cdef Py_ssize_t n = stream_ids.shape[0], i
    cdef int nc = coeffs.shape[0], j
    times = np.empty(n, dtype=np.float64)
    sides = np.empty(n, dtype=np.int8)
    steps = np.empty(n, dtype=np.int64)
    ctr_out = np.empty(n, dtype=np.uint64)
    cdef double[::1] t_o = times
    cdef int8_t[::1] s_o = sides
    cdef int64_t[::1] k_o = steps
    cdef uint64_t[::1] c_o = ctr_out
    cdef const double* cf = &coeffs[0]
    cdef double x, up
    cdef int64_t k
    cdef int8_t side
    cdef uint64_t ctr, stream
    for i in prange(n, nogil=True, num_threads=threads, schedule="dynamic", chunksize=16):
        ctr = ctr0[i]
        stream = stream_ids[i]
        x = x0
        side = 0
        k = 0
        if x > a:
            side = 1
        elif x < -b:
            side = -1
        else:
            while k < n_steps:
                up = cf[nc - 1]
                for j in range(nc - 2, -1, -1):
                    up = up * x + cf[j]
                x = (x - up * dt) + increment(&nz, seed, stream, &ctr)
                k = k + 1
                if not isfinite(x):
                    side = 2
                    break
                if x > a:
                    side = 1
                    break
                if x < -b:
                    side = -1
                    break
        s_o[i] = side
        k_o[i] = k
        t_o[i] = k * dt
        c_o[i] = ctr
    return times, sides, steps, ctr_out


def uniform_pairs(uint64_t seed, const uint64_t[::1] stream_ids, const uint64_t[::1] counters):
    """Philox uniforms, for cross-checking against the Python implementation."""
    cdef Py_ssize_t n = stream_ids.shape[0], i
    u1 = np.empty(n, dtype=np.float64)
    u2 = np.empty(n, dtype=np.float64)
    cdef double[::1] a = u1
    cdef double[::1] b = u2
    for i in range(n):
        philox_pair(seed, stream_ids[i], counters[i], &a[i], &b[i])
    return u1, u2
