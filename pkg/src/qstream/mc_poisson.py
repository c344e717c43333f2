"""Event-driven Monte Carlo for the Poisson arrival model.

The default estimator uses regenerative analytic absorption: free-server
tails and above-threshold risky excursions end in exact Bernoulli draws, so
the estimator is exact in distribution with almost-surely finite runtime.
A capped mode (truncation at a high buffer level or time horizon) is kept
for cross-validation.

Replicas are independent streams keyed by (master_seed, replica_index) and
may run on any number of worker threads; aggregation is in replica order,
so results are byte-identical regardless of QSTREAM_THREADS.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .core import Exponents, QoETarget, Rates, interruption_exponent
from .errors import DomainError, SimulationOverrun
from .policies import (AlwaysBoth, AlwaysFree, Offline, PolicySpec, Risky,
                       Safe, design_safe)
from .rngstream import Stream

DEFAULT_MAX_EVENTS = 10**9


@dataclass(frozen=True)
class Cap:
    """Truncation absorption: stop uninterrupted at q_max or the horizon."""

    q_max: float
    horizon: float

    def __post_init__(self):
        if self.q_max <= 0.0 or self.horizon <= 0.0:
            raise DomainError(f"cap parameters must be positive, got {self}")


Absorption = Union[str, Cap]  # "analytic" or a Cap


@dataclass(frozen=True)
class SimConfig:
    replicas: int
    master_seed: int
    absorption: Absorption = "analytic"
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self):
        if self.replicas < 1:
            raise DomainError(f"need at least one replica, got {self.replicas}")
        if isinstance(self.absorption, str) and self.absorption != "analytic":
            raise DomainError(f"absorption must be 'analytic' or a Cap, got {self.absorption!r}")


@dataclass(frozen=True)
class PathOutcome:
    interrupted: bool
    cost: float
    events: int


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width_95: float
    n: int


def _mean_hw(x: np.ndarray) -> Estimate:
    n = x.size
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return Estimate(mean=mean, half_width_95=1.96 * sd / math.sqrt(n), n=n)


def threads() -> int:
    """Worker count: QSTREAM_THREADS if set, else available parallelism."""
    env = os.environ.get("QSTREAM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_chunked(fn, n: int, *args):
    """Run a chunk kernel (n_chunk, start) -> arrays over worker threads.

    Chunk boundaries cannot influence results: every replica consumes only
    its own stream, and outputs are concatenated in replica order.
    """
    workers = threads()
    chunk = max(1, -(-n // (workers * 4)))
    spans = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    if len(spans) == 1 or workers == 1:
        parts = [fn(b - a, a, *args) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, b - a, a, *args) for a, b in spans]
            parts = [f.result() for f in futures]
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))


def _policy_kind(policy: PolicySpec) -> tuple[int, float]:
    if isinstance(policy, AlwaysFree):
        return kernels.KIND_FREE, 0.0
    if isinstance(policy, AlwaysBoth):
        return kernels.KIND_BOTH, 0.0
    if isinstance(policy, Offline):
        return kernels.KIND_OFFLINE, policy.t_s
    if isinstance(policy, Safe):
        return kernels.KIND_SAFE, policy.s
    if isinstance(policy, Risky):
        return kernels.KIND_RISKY, policy.t
    raise DomainError(f"unknown policy {policy!r}")


def _absorption_args(absorption: Absorption, policy: PolicySpec, d: float):
    if isinstance(absorption, Cap):
        kind_param = _policy_kind(policy)[1]
        if absorption.q_max <= max(d, kind_param):
            raise DomainError(
                f"cap q_max={absorption.q_max} must exceed the start level and "
                f"policy threshold (d={d}, param={kind_param})"
            )
        return False, absorption.q_max, absorption.horizon
    return True, math.inf, math.inf


def _paths(policy: PolicySpec, d: float, rates: Rates, seed: int, start: int,
           n: int, absorption: Absorption, max_events: int):
    kind, param = _policy_kind(policy)
    analytic, q_max, horizon = _absorption_args(absorption, policy, d)
    exps = Exponents.from_rates(rates)

    def chunk_fn(n_chunk, offset):
        return kernels.poisson_paths(kind, param, d, rates.r0, rates.r1,
                                     exps.alpha0, exps.alpha1, analytic,
                                     q_max, horizon, n_chunk, seed,
                                     start + offset, max_events)

    flags, cost, events = _run_chunked(chunk_fn, n)
    bad = np.flatnonzero(flags == 2)
    if bad.size:
        raise SimulationOverrun(
            f"replica {start + int(bad[0])} exceeded {max_events} events",
            replica=start + int(bad[0]),
        )
    return flags, cost, events


def simulate_path(policy: PolicySpec, d: float, rates: Rates, stream: Stream,
                  absorption: Absorption = "analytic",
                  max_events: int = DEFAULT_MAX_EVENTS) -> PathOutcome:
    """Simulate one replica on the given stream."""
    if not d > 0.0:
        raise DomainError(f"initial buffer must be positive, got {d}")
    flags, cost, events = _paths(policy, d, rates, stream.seed, stream.index,
                                 1, absorption, max_events)
    return PathOutcome(interrupted=bool(flags[0] == 1), cost=float(cost[0]),
                       events=int(events[0]))


def estimate(policy: PolicySpec, d: float, rates: Rates,
             cfg: SimConfig) -> tuple[Estimate, Estimate]:
    """(interruption probability, expected paid time) with 95% half-widths."""
    if not d > 0.0:
        raise DomainError(f"initial buffer must be positive, got {d}")
    flags, cost, _ = _paths(policy, d, rates, cfg.master_seed, 0,
                            cfg.replicas, cfg.absorption, cfg.max_events)
    return _mean_hw((flags == 1).astype(np.float64)), _mean_hw(cost)


@dataclass(frozen=True)
class StoppingIdentityReport:
    """Both sides of the stopping identity
    P(tau_e > tau_T) = (1 - e^{-I(R) d}) / (1 - E[e^{-I(R) Q_tauT} | tau_e > tau_T])
    estimated from the same paths, with a batched standard error of the
    difference."""

    lhs: Estimate
    rhs: float
    diff: float
    diff_se: float
    n: int
    degenerate: bool


def stopping_identity_check(d: float, t_threshold: float, rate: float,
                            n: int, seed: int,
                            max_events: int = DEFAULT_MAX_EVENTS) -> StoppingIdentityReport:
    """Monte Carlo consistency check of the exit/crossing identity."""
    if not 0.0 < d <= t_threshold:
        raise DomainError(f"need 0 < d <= t_threshold, got ({d}, {t_threshold})")
    alpha = interruption_exponent(rate)
    if d == t_threshold:
        return StoppingIdentityReport(lhs=Estimate(1.0, 0.0, n), rhs=1.0,
                                      diff=0.0, diff_se=0.0, n=n, degenerate=True)

    def chunk_fn(n_chunk, offset):
        return kernels.crossing_paths(d, t_threshold, rate, n_chunk, seed,
                                      offset, max_events)

    reached, q_cross, _ = _run_chunked(chunk_fn, n)
    if np.any(reached == 2):
        raise SimulationOverrun("crossing path exceeded the event budget")
    hit = reached == 1
    lhs = _mean_hw(hit.astype(np.float64))
    rhs = -math.expm1(-alpha * d) / (1.0 - float(np.mean(np.exp(-alpha * q_cross[hit]))))

    # batched standard error of the (lhs - rhs) statistic
    n_batches = 50
    edges = np.linspace(0, n, n_batches + 1, dtype=int)
    diffs = []
    for a, b in zip(edges[:-1], edges[1:]):
        h = hit[a:b]
        if not h.any() or h.all():
            continue
        lhs_b = float(np.mean(h))
        rhs_b = -math.expm1(-alpha * d) / (1.0 - float(np.mean(np.exp(-alpha * q_cross[a:b][h]))))
        diffs.append(lhs_b - rhs_b)
    diffs = np.asarray(diffs)
    diff_se = float(np.std(diffs, ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else math.inf
    return StoppingIdentityReport(lhs=lhs, rhs=rhs, diff=lhs.mean - rhs,
                                  diff_se=diff_se, n=n, degenerate=False)


@dataclass(frozen=True)
class WaldReport:
    """E[tau_{S*}] against the bracket [(S*-D)/(R1-1), (S*-D+1)/(R1-1)] and
    the optional-stopping residual D + (R1-1) E[tau] - E[Q_tau]."""

    s_star: float
    tau: Estimate
    bracket: tuple[float, float]
    q_hit: Estimate
    wald_residual: float
    residual_se: float
    within: bool


def wald_check(target: QoETarget, rates: Rates, n: int, seed: int,
               max_events: int = DEFAULT_MAX_EVENTS) -> WaldReport:
    """Estimate the safe policy's paid time and test it against the bracket.

    The hitting time is taken on the raw (un-stopped) walk at rate R1, which
    is the process the identity is stated for.
    """
    s_star = design_safe(target, rates)

    def chunk_fn(n_chunk, offset):
        return kernels.hitting_paths(target.d, s_star, rates.r1, n_chunk,
                                     seed, offset, max_events)

    tau, q_hit, events = _run_chunked(chunk_fn, n)
    if np.any(events < 0):
        raise SimulationOverrun("hitting path exceeded the event budget")
    tau_est = _mean_hw(tau)
    q_est = _mean_hw(q_hit)
    denom = rates.r1 - 1.0
    lo = (s_star - target.d) / denom
    hi = (s_star - target.d + 1.0) / denom
    resid = target.d + denom * tau_est.mean - q_est.mean
    resid_samples = target.d + denom * tau - q_hit
    resid_se = float(np.std(resid_samples, ddof=1) / math.sqrt(n))
    within = (lo - 3.0 * tau_est.half_width_95 <= tau_est.mean
              <= hi + 3.0 * tau_est.half_width_95)
    return WaldReport(s_star=s_star, tau=tau_est, bracket=(lo, hi),
                      q_hit=q_est, wald_residual=resid, residual_se=resid_se,
                      within=within)
