# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Bit-for-bit twin of qstream.kernels.pykernels: the same SplitMix64 stream,
the same inverse-CDF transforms (ndtri is the very routine scipy exposes to
Python), the same draw order and floating-point expressions.  Compiled with
-ffp-contract=off so no FMA contraction can perturb results.  All path loops
run without the GIL so replica chunks parallelize across threads.
"""

from libc.math cimport exp, expm1, fabs, log, sqrt, NAN
from libc.stdint cimport int64_t, uint8_t, uint64_t

import numpy as np

from scipy.special.cython_special cimport ndtri

KIND_FREE = 0
KIND_BOTH = 1
KIND_OFFLINE = 2
KIND_SAFE = 3
KIND_RISKY = 4

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15u
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double INF = float("inf")


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9u
    z = (z ^ (z >> 27)) * 0x94D4BDDBD85B968Fu
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t seed, uint64_t index) nogil:
    return mix64(mix64(seed + GAMMA) + index * GAMMA)


cdef inline double uniform(uint64_t *s) nogil:
    s[0] = s[0] + GAMMA
    return (<double> (mix64(s[0]) >> 11) + 0.5) * INV53


cdef struct PathOut:
    int flag
    double cost
    int64_t ev


cdef PathOut _path_const(int u, double d, double rate, double alpha, bint analytic,
                         double q_max, double horizon, int64_t max_events,
                         uint64_t *st) nogil:
    cdef PathOut out
    cdef double q, t, cost, w, ti, ta
    if analytic:
        out.flag = 1 if uniform(st) < exp(-alpha * d) else 0
        out.cost = NAN if u == 1 else 0.0
        out.ev = 1
        return out
    q = d
    t = 0.0
    cost = 0.0
    out.ev = 0
    while True:
        if out.ev >= max_events:
            out.flag = 2
            out.cost = cost
            return out
        out.ev += 1
        w = -log(uniform(st)) / rate
        ti = t + q
        ta = t + w
        if q <= w and ti <= horizon:
            if u == 1:
                cost += q
            out.flag = 1
            out.cost = cost
            return out
        if horizon < ta:
            if u == 1:
                cost += horizon - t
            out.flag = 0
            out.cost = cost
            return out
        t = ta
        if u == 1:
            cost += w
        q = q - w + 1.0
        if q >= q_max:
            out.flag = 0
            out.cost = cost
            return out


cdef PathOut _free_tail(double q, double t, double cost, int64_t ev, double r0,
                        double alpha0, bint analytic, double q_max, double horizon,
                        int64_t max_events, uint64_t *st) nogil:
    cdef PathOut out
    cdef double w, ti, ta
    out.cost = cost
    if analytic:
        out.ev = ev + 1
        out.flag = 1 if uniform(st) < exp(-alpha0 * q) else 0
        return out
    out.ev = ev
    while True:
        if out.ev >= max_events:
            out.flag = 2
            return out
        out.ev += 1
        w = -log(uniform(st)) / r0
        ti = t + q
        ta = t + w
        if q <= w and ti <= horizon:
            out.flag = 1
            return out
        if horizon < ta:
            out.flag = 0
            return out
        t = ta
        q = q - w + 1.0
        if q >= q_max:
            out.flag = 0
            return out


cdef PathOut _path_offline(double ts, double d, double r0, double r1, double alpha0,
                           bint analytic, double q_max, double horizon,
                           int64_t max_events, uint64_t *st) nogil:
    cdef PathOut out
    cdef double q = d, t = 0.0, cost = 0.0, w, ti, ta
    cdef int64_t ev = 0
    while t < ts:
        if ev >= max_events:
            out.flag = 2
            out.cost = cost
            out.ev = ev
            return out
        ev += 1
        w = -log(uniform(st)) / r1
        ti = t + q
        ta = t + w
        if q <= w and ti <= ts and ti <= horizon:
            cost += q
            out.flag = 1
            out.cost = cost
            out.ev = ev
            return out
        if horizon < ta and horizon < ts:
            cost += horizon - t
            out.flag = 0
            out.cost = cost
            out.ev = ev
            return out
        if ts < ta:
            cost += ts - t
            q -= ts - t
            t = ts
            break
        t = ta
        cost += w
        q = q - w + 1.0
        if (not analytic) and q >= q_max:
            out.flag = 0
            out.cost = cost
            out.ev = ev
            return out
    return _free_tail(q, t, cost, ev, r0, alpha0, analytic, q_max, horizon, max_events, st)


cdef PathOut _path_safe(double s, double d, double r0, double r1, double alpha0,
                        bint analytic, double q_max, double horizon,
                        int64_t max_events, uint64_t *st) nogil:
    cdef PathOut out
    cdef double q = d, t = 0.0, cost = 0.0, w, ti, ta
    cdef int64_t ev = 0
    if q < s:
        while True:
            if ev >= max_events:
                out.flag = 2
                out.cost = cost
                out.ev = ev
                return out
            ev += 1
            w = -log(uniform(st)) / r1
            ti = t + q
            ta = t + w
            if q <= w and ti <= horizon:
                cost += q
                out.flag = 1
                out.cost = cost
                out.ev = ev
                return out
            if horizon < ta:
                cost += horizon - t
                out.flag = 0
                out.cost = cost
                out.ev = ev
                return out
            t = ta
            cost += w
            q = q - w + 1.0
            if q >= s:
                break
    return _free_tail(q, t, cost, ev, r0, alpha0, analytic, q_max, horizon, max_events, st)


cdef PathOut _path_risky(double thr, double d, double r0, double r1, double alpha0,
                         bint analytic, double q_max, double horizon,
                         int64_t max_events, uint64_t *st) nogil:
    cdef PathOut out
    cdef double q, t, cost, w, ti, ta, tb
    if thr <= 0.0:
        return _free_tail(d, 0.0, 0.0, 0, r0, alpha0, analytic, q_max, horizon, max_events, st)
    q = d
    t = 0.0
    cost = 0.0
    out.ev = 0
    while True:
        if q >= thr:
            if out.ev >= max_events:
                out.flag = 2
                out.cost = cost
                return out
            out.ev += 1
            if analytic:
                if uniform(st) < exp(-alpha0 * (q - thr)):
                    q = thr
                else:
                    out.flag = 0
                    out.cost = cost
                    return out
            else:
                w = -log(uniform(st)) / r0
                tb = t + (q - thr)
                ta = t + w
                if q - thr <= w:
                    if tb > horizon:
                        out.flag = 0
                        out.cost = cost
                        return out
                    t = tb
                    q = thr
                else:
                    if ta > horizon:
                        out.flag = 0
                        out.cost = cost
                        return out
                    t = ta
                    q = q - w + 1.0
                    if q >= q_max:
                        out.flag = 0
                        out.cost = cost
                        return out
                    continue
        if out.ev >= max_events:
            out.flag = 2
            out.cost = cost
            return out
        out.ev += 1
        w = -log(uniform(st)) / r1
        ti = t + q
        ta = t + w
        if q <= w and (analytic or ti <= horizon):
            cost += q
            out.flag = 1
            out.cost = cost
            return out
        if (not analytic) and horizon < ta:
            cost += horizon - t
            out.flag = 0
            out.cost = cost
            return out
        t = ta
        cost += w
        q = q - w + 1.0


def poisson_paths(int kind, double param, double d, double r0, double r1,
                  double alpha_free, double alpha_both, bint analytic,
                  double q_max, double horizon, Py_ssize_t n,
                  uint64_t seed, uint64_t start, int64_t max_events):
    flags = np.empty(n, dtype=np.uint8)
    cost = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    cdef uint8_t[::1] fv = flags
    cdef double[::1] cv = cost
    cdef int64_t[::1] evv = events
    cdef Py_ssize_t i
    cdef uint64_t st
    cdef PathOut o
    with nogil:
        for i in range(n):
            st = stream_key(seed, start + <uint64_t> i)
            if kind == 0:
                o = _path_const(0, d, r0, alpha_free, analytic, q_max, horizon, max_events, &st)
            elif kind == 1:
                o = _path_const(1, d, r1, alpha_both, analytic, q_max, horizon, max_events, &st)
            elif kind == 2:
                o = _path_offline(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, &st)
            elif kind == 3:
                o = _path_safe(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, &st)
            else:
                o = _path_risky(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, &st)
            fv[i] = <uint8_t> o.flag
            cv[i] = o.cost
            evv[i] = o.ev
    if kind > 4 or kind < 0:
        raise ValueError(f"unknown policy kind {kind}")
    return flags, cost, events


def crossing_paths(double d, double thr, double rate, Py_ssize_t n,
                   uint64_t seed, uint64_t start, int64_t max_events):
    reached = np.empty(n, dtype=np.uint8)
    q_cross = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    cdef uint8_t[::1] rv = reached
    cdef double[::1] qv = q_cross
    cdef int64_t[::1] evv = events
    cdef Py_ssize_t i
    cdef uint64_t st
    cdef double q, w
    cdef int64_t ev
    with nogil:
        for i in range(n):
            st = stream_key(seed, start + <uint64_t> i)
            q = d
            ev = 0
            if q >= thr:
                rv[i] = 1
                qv[i] = q
                evv[i] = 0
                continue
            while True:
                if ev >= max_events:
                    rv[i] = 2
                    qv[i] = q
                    break
                ev += 1
                w = -log(uniform(&st)) / rate
                if w >= q:
                    rv[i] = 0
                    qv[i] = 0.0
                    break
                q = q - w + 1.0
                if q >= thr:
                    rv[i] = 1
                    qv[i] = q
                    break
            evv[i] = ev
    return reached, q_cross, events


def hitting_paths(double d, double s, double rate, Py_ssize_t n,
                  uint64_t seed, uint64_t start, int64_t max_events):
    tau = np.empty(n, dtype=np.float64)
    q_hit = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    cdef double[::1] tv = tau
    cdef double[::1] qv = q_hit
    cdef int64_t[::1] evv = events
    cdef Py_ssize_t i
    cdef uint64_t st
    cdef double q, t, w
    cdef int64_t ev
    with nogil:
        for i in range(n):
            st = stream_key(seed, start + <uint64_t> i)
            q = d
            t = 0.0
            ev = 0
            while q < s:
                if ev >= max_events:
                    ev = -1
                    break
                ev += 1
                w = -log(uniform(&st)) / rate
                t += w
                q = q - w + 1.0
            tv[i] = t
            qv[i] = q
            evv[i] = ev
    return tau, q_hit, events


def fluid_paths(double t_thr, double d, double r0, double r1, double dt,
                bint bridge, Py_ssize_t n, uint64_t seed, uint64_t start,
                int64_t max_steps):
    cdef double theta0 = 2.0 * (r0 - 1.0)
    cdef double mu0_dt = (r0 - 1.0) * dt
    cdef double mu1_dt = (r1 - 1.0) * dt
    cdef double sqrt_dt = sqrt(dt)
    flags = np.empty(n, dtype=np.uint8)
    cost = np.empty(n, dtype=np.float64)
    steps = np.empty(n, dtype=np.int64)
    cdef uint8_t[::1] fv = flags
    cdef double[::1] cv = cost
    cdef int64_t[::1] sv = steps
    cdef Py_ssize_t i
    cdef uint64_t st
    cdef double q, c, z, q_new, ub
    cdef int64_t k
    cdef int flag
    cdef bint paid
    with nogil:
        for i in range(n):
            st = stream_key(seed, start + <uint64_t> i)
            q = d
            c = 0.0
            k = 0
            flag = 2
            while True:
                if k >= max_steps:
                    flag = 2
                    break
                k += 1
                if q > t_thr:
                    if uniform(&st) < exp(-theta0 * (q - t_thr)):
                        if t_thr <= 0.0:
                            flag = 1
                            break
                        q = t_thr
                        continue
                    flag = 0
                    break
                paid = 0.0 < q < t_thr
                z = ndtri(uniform(&st))
                if paid:
                    c += dt
                    q_new = q + mu1_dt + sqrt_dt * z
                else:
                    q_new = q + mu0_dt + sqrt_dt * z
                if q_new <= 0.0:
                    flag = 1
                    break
                ub = uniform(&st)
                if bridge and ub < exp(-2.0 * q * q_new / dt):
                    flag = 1
                    break
                q = q_new
            fv[i] = <uint8_t> flag
            cv[i] = c
            sv[i] = k
    return flags, cost, steps


def manifold_paths(double t_anchor, double p_at_thr, double theta0, double theta1,
                   double r0, double r1, double d0, double p0, double dt,
                   int64_t n_steps, Py_ssize_t n, uint64_t seed, uint64_t start):
    cdef double ratio = theta0 / theta1
    cdef double mu0_dt = (r0 - 1.0) * dt
    cdef double mu1_dt = (r1 - 1.0) * dt
    cdef double sqrt_dt = sqrt(dt)
    max_dev = np.empty(n, dtype=np.float64)
    status = np.empty(n, dtype=np.uint8)
    steps = np.empty(n, dtype=np.int64)
    cdef double[::1] dv = max_dev
    cdef uint8_t[::1] stv = status
    cdef int64_t[::1] sv = steps
    cdef Py_ssize_t i
    cdef uint64_t st
    cdef double q, p, dev, e1, boundary, phi, drift_dt, denom, dw, m, d_now
    cdef int64_t k
    cdef int stat
    with nogil:
        for i in range(n):
            st = stream_key(seed, start + <uint64_t> i)
            q = d0
            p = p0
            dev = 0.0
            stat = 0
            k = 0
            while k < n_steps:
                k += 1
                e1 = exp(-theta1 * q) if theta1 * q < 745.0 else 0.0
                boundary = e1 / (ratio + (1.0 - ratio) * e1)
                if p >= boundary:
                    phi = -theta0 * p
                    drift_dt = mu0_dt
                else:
                    if theta1 * q > 700.0:
                        phi = -0.0
                    else:
                        denom = (1.0 + p) * exp(theta1 * q) - 2.0
                        if fabs(denom) < 1e-300:
                            stat = 2
                            break
                        phi = -theta1 / denom
                    drift_dt = mu1_dt
                dw = sqrt_dt * ndtri(uniform(&st))
                q = q + drift_dt + dw
                p = p + phi * dw
                if q <= 0.0:
                    stat = 1
                    break
                if not (0.0 < p < 1.0):
                    stat = 2
                    break
                if q >= t_anchor:
                    m = p_at_thr * (exp(-theta0 * (q - t_anchor)) if theta0 * (q - t_anchor) < 745.0 else 0.0)
                else:
                    m = (exp(-theta1 * q) if theta1 * q < 745.0 else 0.0) \
                        + p_at_thr * (1.0 - ratio) * -expm1(-theta1 * q)
                d_now = fabs(p - m)
                if d_now > dev:
                    dev = d_now
            dv[i] = dev
            stv[i] = stat
            sv[i] = k
    return max_dev, status, steps
