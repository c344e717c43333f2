"""Pure-Python simulation kernels (reference backend).

These loops define the contract the compiled backend must match bit for
bit: the order in which uniforms are consumed, every floating-point
expression, and every comparison.  All variates come from the SplitMix64
stream of (master_seed, replica_index) via inverse-CDF transforms, so a
replica's outcome is independent of scheduling and of the backend.

Poisson paths are event-driven: the buffer drains at unit rate between
arrivals, arrivals are unit jumps at the active rate, and rate changes
re-sample the residual inter-arrival time (valid by memorylessness).
Analytic absorption replaces free-server-only tails with an exact
Bernoulli(exp(-alpha0*q)) draw, and risky excursions above the threshold
with an exact return draw, which removes truncation bias entirely.

Flag convention for all path kernels: 0 survived, 1 interrupted, 2 overrun.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

from ..rngstream import GAMMA, MASK64, mix64, stream_key

KIND_FREE = 0
KIND_BOTH = 1
KIND_OFFLINE = 2
KIND_SAFE = 3
KIND_RISKY = 4

_INV53 = 1.0 / 9007199254740992.0


class _St:
    """Minimal mutable stream state; mirrors the compiled uint64 loop."""

    __slots__ = ("s",)

    def __init__(self, seed: int, index: int):
        self.s = stream_key(seed, index)

    def uniform(self) -> float:
        self.s = (self.s + GAMMA) & MASK64
        return ((mix64(self.s) >> 11) + 0.5) * _INV53


def _path_const(u, d, rate, alpha, analytic, q_max, horizon, max_events, st):
    if analytic:
        # the constant policies are absorbed at t=0: the Bernoulli draw has
        # exactly the interruption distribution exp(-alpha*d).  Paid cost is
        # undefined for the always-both benchmark (its expectation diverges).
        interrupted = st.uniform() < math.exp(-alpha * d)
        return (1 if interrupted else 0), (math.nan if u == 1 else 0.0), 1
    q = d
    t = 0.0
    cost = 0.0
    ev = 0
    while True:
        if ev >= max_events:
            return 2, cost, ev
        ev += 1
        w = -math.log(st.uniform()) / rate
        ti = t + q
        ta = t + w
        if q <= w and ti <= horizon:
            if u == 1:
                cost += q
            return 1, cost, ev
        if horizon < ta:
            if u == 1:
                cost += horizon - t
            return 0, cost, ev
        t = ta
        if u == 1:
            cost += w
        q = q - w + 1.0
        if q >= q_max:
            return 0, cost, ev


def _free_tail(q, t, cost, ev, r0, alpha0, analytic, q_max, horizon, max_events, st):
    """Continue with u = 0 forever from (t, q); cost is frozen."""
    if analytic:
        ev += 1
        interrupted = st.uniform() < math.exp(-alpha0 * q)
        return (1 if interrupted else 0), cost, ev
    while True:
        if ev >= max_events:
            return 2, cost, ev
        ev += 1
        w = -math.log(st.uniform()) / r0
        ti = t + q
        ta = t + w
        if q <= w and ti <= horizon:
            return 1, cost, ev
        if horizon < ta:
            return 0, cost, ev
        t = ta
        q = q - w + 1.0
        if q >= q_max:
            return 0, cost, ev


def _path_offline(ts, d, r0, r1, alpha0, analytic, q_max, horizon, max_events, st):
    q = d
    t = 0.0
    cost = 0.0
    ev = 0
    while t < ts:
        if ev >= max_events:
            return 2, cost, ev
        ev += 1
        w = -math.log(st.uniform()) / r1
        ti = t + q
        ta = t + w
        if q <= w and ti <= ts and ti <= horizon:
            cost += q
            return 1, cost, ev
        if horizon < ta and horizon < ts:
            cost += horizon - t
            return 0, cost, ev
        if ts < ta:
            # deadline next: drain to the switch instant, then re-sample at r0
            cost += ts - t
            q -= ts - t
            t = ts
            break
        t = ta
        cost += w
        q = q - w + 1.0
        if (not analytic) and q >= q_max:
            return 0, cost, ev
    return _free_tail(q, t, cost, ev, r0, alpha0, analytic, q_max, horizon, max_events, st)


def _path_safe(s, d, r0, r1, alpha0, analytic, q_max, horizon, max_events, st):
    q = d
    t = 0.0
    cost = 0.0
    ev = 0
    if q < s:
        while True:
            if ev >= max_events:
                return 2, cost, ev
            ev += 1
            w = -math.log(st.uniform()) / r1
            ti = t + q
            ta = t + w
            if q <= w and ti <= horizon:
                cost += q
                return 1, cost, ev
            if horizon < ta:
                cost += horizon - t
                return 0, cost, ev
            t = ta
            cost += w
            q = q - w + 1.0
            if q >= s:
                break  # latched: the paid server is never used again
    return _free_tail(q, t, cost, ev, r0, alpha0, analytic, q_max, horizon, max_events, st)


def _path_risky(thr, d, r0, r1, alpha0, analytic, q_max, horizon, max_events, st):
    if thr <= 0.0:
        return _free_tail(d, 0.0, 0.0, 0, r0, alpha0, analytic, q_max, horizon, max_events, st)
    q = d
    t = 0.0
    cost = 0.0
    ev = 0
    while True:
        if q >= thr:
            if ev >= max_events:
                return 2, cost, ev
            ev += 1
            if analytic:
                # exact first-passage back to the threshold: the downward
                # motion is continuous, so a return lands exactly at thr
                if st.uniform() < math.exp(-alpha0 * (q - thr)):
                    q = thr
                else:
                    return 0, cost, ev
            else:
                w = -math.log(st.uniform()) / r0
                tb = t + (q - thr)
                ta = t + w
                if q - thr <= w:
                    if tb > horizon:
                        return 0, cost, ev
                    t = tb
                    q = thr
                else:
                    if ta > horizon:
                        return 0, cost, ev
                    t = ta
                    q = q - w + 1.0
                    if q >= q_max:
                        return 0, cost, ev
                    continue
        # band step: u = 1 on the open interval, entered at q == thr after a
        # downward touch (the instant at the boundary has measure zero)
        if ev >= max_events:
            return 2, cost, ev
        ev += 1
        w = -math.log(st.uniform()) / r1
        ti = t + q
        ta = t + w
        if q <= w and (analytic or ti <= horizon):
            cost += q
            return 1, cost, ev
        if (not analytic) and horizon < ta:
            cost += horizon - t
            return 0, cost, ev
        t = ta
        cost += w
        q = q - w + 1.0


def poisson_paths(kind, param, d, r0, r1, alpha_free, alpha_both, analytic,
                  q_max, horizon, n, seed, start, max_events):
    flags = np.empty(n, dtype=np.uint8)
    cost = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    for i in range(n):
        st = _St(seed, start + i)
        if kind == KIND_FREE:
            f, c, e = _path_const(0, d, r0, alpha_free, analytic, q_max, horizon, max_events, st)
        elif kind == KIND_BOTH:
            f, c, e = _path_const(1, d, r1, alpha_both, analytic, q_max, horizon, max_events, st)
        elif kind == KIND_OFFLINE:
            f, c, e = _path_offline(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, st)
        elif kind == KIND_SAFE:
            f, c, e = _path_safe(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, st)
        elif kind == KIND_RISKY:
            f, c, e = _path_risky(param, d, r0, r1, alpha_free, analytic, q_max, horizon, max_events, st)
        else:
            raise ValueError(f"unknown policy kind {kind}")
        flags[i] = f
        cost[i] = c
        events[i] = e
    return flags, cost, events


def crossing_paths(d, thr, rate, n, seed, start, max_events):
    """Single-server walk until level thr is reached or the buffer drains.

    Returns (reached, q_cross, events); q_cross is the post-jump level in
    [thr, thr+1) when reached.
    """
    reached = np.empty(n, dtype=np.uint8)
    q_cross = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    for i in range(n):
        st = _St(seed, start + i)
        q = d
        ev = 0
        if q >= thr:
            reached[i] = 1
            q_cross[i] = q
            events[i] = 0
            continue
        while True:
            if ev >= max_events:
                reached[i] = 2
                q_cross[i] = q
                break
            ev += 1
            w = -math.log(st.uniform()) / rate
            if w >= q:
                reached[i] = 0
                q_cross[i] = 0.0
                break
            q = q - w + 1.0
            if q >= thr:
                reached[i] = 1
                q_cross[i] = q
                break
        events[i] = ev
    return reached, q_cross, events


def hitting_paths(d, s, rate, n, seed, start, max_events):
    """First time the un-absorbed walk D + N_t - t reaches level s.

    The walk is not stopped at zero: this estimates the optional-stopping
    identity exactly as stated for the raw process.
    """
    tau = np.empty(n, dtype=np.float64)
    q_hit = np.empty(n, dtype=np.float64)
    events = np.empty(n, dtype=np.int64)
    for i in range(n):
        st = _St(seed, start + i)
        q = d
        t = 0.0
        ev = 0
        while q < s:
            if ev >= max_events:
                ev = -1
                break
            ev += 1
            w = -math.log(st.uniform()) / rate
            t += w
            q = q - w + 1.0
        tau[i] = t
        q_hit[i] = q
        events[i] = ev
    return tau, q_hit, events


def fluid_paths(t_thr, d, r0, r1, dt, bridge, n, seed, start, max_steps):
    """Euler paths of the fluid buffer under the risky threshold policy.

    Every Euler step consumes one uniform for the normal increment and, when
    both endpoints stay positive, one more for the Brownian-bridge crossing
    test (consumed regardless of the bridge flag so that bridged and
    unbridged runs stay pathwise coupled).  Excursions above the threshold
    are absorbed analytically with the exact first-passage probability
    exp(-theta0*(q - t_thr)).
    """
    theta0 = 2.0 * (r0 - 1.0)
    mu0_dt = (r0 - 1.0) * dt
    mu1_dt = (r1 - 1.0) * dt
    sqrt_dt = math.sqrt(dt)
    flags = np.empty(n, dtype=np.uint8)
    cost = np.empty(n, dtype=np.float64)
    steps = np.empty(n, dtype=np.int64)
    for i in range(n):
        st = _St(seed, start + i)
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
                if st.uniform() < math.exp(-theta0 * (q - t_thr)):
                    if t_thr <= 0.0:
                        flag = 1  # returning to a zero threshold is the interruption
                        break
                    q = t_thr
                    continue
                flag = 0
                break
            paid = 0.0 < q < t_thr
            z = ndtri(st.uniform())
            if paid:
                c += dt
                q_new = q + mu1_dt + sqrt_dt * z
            else:
                q_new = q + mu0_dt + sqrt_dt * z
            if q_new <= 0.0:
                flag = 1
                break
            ub = st.uniform()
            if bridge and ub < math.exp(-2.0 * q * q_new / dt):
                flag = 1
                break
            q = q_new
        flags[i] = flag
        cost[i] = c
        steps[i] = k
    return flags, cost, steps


def manifold_paths(t_anchor, p_at_thr, theta0, theta1, r0, r1, d0, p0, dt,
                   n_steps, n, seed, start):
    """Co-simulate (Q, p) under the explicit optimal controls.

    dQ and dp share the same Brownian increment.  Status: 0 ran to the step
    horizon, 1 absorbed at Q <= 0, 2 the budget left [0, 1] (these paths are
    excluded from deviation statistics and reported separately).
    """
    ratio = theta0 / theta1
    mu0_dt = (r0 - 1.0) * dt
    mu1_dt = (r1 - 1.0) * dt
    sqrt_dt = math.sqrt(dt)
    max_dev = np.empty(n, dtype=np.float64)
    status = np.empty(n, dtype=np.uint8)
    steps = np.empty(n, dtype=np.int64)
    for i in range(n):
        st = _St(seed, start + i)
        q = d0
        p = p0
        dev = 0.0
        stat = 0
        k = 0
        while k < n_steps:
            k += 1
            e1 = math.exp(-theta1 * q) if theta1 * q < 745.0 else 0.0
            boundary = e1 / (ratio + (1.0 - ratio) * e1)
            if p >= boundary:
                phi = -theta0 * p
                drift_dt = mu0_dt
            else:
                if theta1 * q > 700.0:
                    phi = -0.0
                else:
                    denom = (1.0 + p) * math.exp(theta1 * q) - 2.0
                    if abs(denom) < 1e-300:
                        stat = 2
                        break
                    phi = -theta1 / denom
                drift_dt = mu1_dt
            dw = sqrt_dt * ndtri(st.uniform())
            q = q + drift_dt + dw
            p = p + phi * dw
            if q <= 0.0:
                stat = 1
                break
            if not (0.0 < p < 1.0):
                stat = 2
                break
            if q >= t_anchor:
                m = p_at_thr * (math.exp(-theta0 * (q - t_anchor)) if theta0 * (q - t_anchor) < 745.0 else 0.0)
            else:
                m = (math.exp(-theta1 * q) if theta1 * q < 745.0 else 0.0) \
                    + p_at_thr * (1.0 - ratio) * -math.expm1(-theta1 * q)
            d_now = abs(p - m)
            if d_now > dev:
                dev = d_now
        max_dev[i] = dev
        status[i] = stat
        steps[i] = k
    return max_dev, status, steps
