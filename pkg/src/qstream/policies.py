"""Server-association policies: representations, design formulas, cost bounds.

Five policy families are supported.  AlwaysFree and AlwaysBoth are the
degenerate benchmarks.  The offline policy fixes a paid-usage deadline t_s
before any arrivals are seen.  The online safe policy pays until the buffer
first reaches a level S and never afterwards.  The online risky policy pays
exactly while the buffer sits strictly inside (0, T).

The design formulas return the smallest feasible parameter for a target
(D, eps) inside the non-degenerate region; the cost bounds are the matching
closed-form upper bounds on expected paid time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .core import Exponents, QoETarget, Rates
from .errors import BranchDomainError, DomainError, InfeasibleTarget


@dataclass(frozen=True)
class AlwaysFree:
    pass


@dataclass(frozen=True)
class AlwaysBoth:
    pass


@dataclass(frozen=True)
class Offline:
    """Pay on [0, t_s], free afterwards."""

    t_s: float

    def __post_init__(self):
        if self.t_s < 0.0:
            raise DomainError(f"offline deadline must be nonnegative, got {self.t_s}")


@dataclass(frozen=True)
class Safe:
    """Pay until the buffer first reaches level s, never after."""

    s: float

    def __post_init__(self):
        if not self.s > 0.0:
            raise DomainError(f"safe threshold must be positive, got {self.s}")


@dataclass(frozen=True)
class Risky:
    """Pay exactly while 0 < Q < t (strict on both sides)."""

    t: float

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError(f"risky threshold must be nonnegative, got {self.t}")


PolicySpec = Union[AlwaysFree, AlwaysBoth, Offline, Safe, Risky]


@dataclass
class PolicyState:
    """Caller-owned state token; only the safe policy's latch lives here.

    The safe rule conditions on the stopping time tau_S, not on the current
    buffer, so whether the threshold has ever been reached must be carried
    alongside (t, q).
    """

    latched: bool = False


def new_state(policy: PolicySpec, d: float) -> PolicyState:
    """Initial policy state for a path started at buffer level d."""
    return PolicyState(latched=isinstance(policy, Safe) and d >= policy.s)


def decide(policy: PolicySpec, t: float, q: float, state: Optional[PolicyState] = None) -> int:
    """Action u in {0, 1} for the given time, buffer level and policy state.

    Pure function: replaying a trajectory with the same state tokens yields
    identical decisions.  The risky band is open (u=0 at q == t exactly) and
    the offline deadline is inclusive (u=1 at t == t_s).
    """
    if isinstance(policy, AlwaysFree):
        return 0
    if isinstance(policy, AlwaysBoth):
        return 1
    if isinstance(policy, Offline):
        return 1 if t <= policy.t_s else 0
    if isinstance(policy, Safe):
        if state is None:
            raise DomainError("safe policy decisions require a PolicyState token")
        return 0 if state.latched else 1
    if isinstance(policy, Risky):
        return 1 if 0.0 < q < policy.t else 0
    raise DomainError(f"unknown policy {policy!r}")


@dataclass(frozen=True)
class OfflineDesign:
    """Smallest feasible offline deadline; clamped marks a negative formula
    value (free server alone already meets the target)."""

    t_s: float
    clamped: bool


@dataclass(frozen=True)
class RiskyDesign:
    """Smallest feasible risky threshold and the quantities behind it."""

    t_star: float
    beta: float
    d_bar: float
    branch: str  # "above" (d >= d_bar) or "below"
    clamped: bool


@dataclass(frozen=True)
class CostInterval:
    """Expected paid-time interval [lo, hi]; the width comes from the unit
    jump overshoot at the stopping threshold."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi:
            raise DomainError(f"invalid cost interval [{self.lo}, {self.hi}]")


def _feasible_margin(target: QoETarget, rates: Rates) -> float:
    """eps - exp(-alpha1 * D); must be positive for any design to exist."""
    exps = Exponents.from_rates(rates)
    margin = target.eps - math.exp(-exps.alpha1 * target.d)
    if margin <= 0.0:
        raise InfeasibleTarget(
            f"target (d={target.d}, eps={target.eps}) at or below the feasibility "
            f"boundary: eps <= exp(-alpha1*d) = {math.exp(-exps.alpha1 * target.d):.6g}"
        )
    return margin


def design_offline(target: QoETarget, rates: Rates) -> OfflineDesign:
    """Smallest feasible paid-usage deadline t_s*.

    t_s* = R0/(R1-R0) * [ log(1/(eps - exp(-alpha1 D)))/alpha0 - D ], clamped
    at zero when the bracket goes negative.
    """
    margin = _feasible_margin(target, rates)
    exps = Exponents.from_rates(rates)
    raw = rates.r0 / (rates.r1 - rates.r0) * (math.log(1.0 / margin) / exps.alpha0 - target.d)
    return OfflineDesign(t_s=max(raw, 0.0), clamped=raw <= 0.0)


def design_safe(target: QoETarget, rates: Rates) -> float:
    """Smallest feasible safe threshold S* = log(1/(eps - exp(-alpha1 D)))/alpha0.

    Always positive (the margin is below 1), so no clamp arises.
    """
    margin = _feasible_margin(target, rates)
    exps = Exponents.from_rates(rates)
    return math.log(1.0 / margin) / exps.alpha0


def safe_cost_bounds(target: QoETarget, rates: Rates) -> CostInterval:
    """Expected paid time of the designed safe policy, bracketed by the
    unit overshoot: [(S*-D)/(R1-1), (S*-D+1)/(R1-1)]."""
    s_star = design_safe(target, rates)
    denom = rates.r1 - 1.0
    lo = max((s_star - target.d) / denom, 0.0)
    return CostInterval(lo=lo, hi=(s_star - target.d + 1.0) / denom)


def design_risky(target: QoETarget, rates: Rates) -> RiskyDesign:
    """Smallest feasible risky threshold T*, two-branch form.

    beta = alpha1 / (alpha0 * (1 - alpha0/2)) and d_bar = log(beta/eps)/alpha1
    split the branches.  Above d_bar the formula can go negative (free server
    alone suffices from D); the value is clamped at zero and flagged.
    """
    margin = _feasible_margin(target, rates)
    exps = Exponents.from_rates(rates)
    a0, a1 = exps.alpha0, exps.alpha1
    beta = a1 / (a0 * (1.0 - a0 / 2.0))
    d_bar = math.log(beta / target.eps) / a1
    if target.d >= d_bar:
        raw = (math.log(beta / target.eps) - a0 * target.d) / (a1 - a0)
        return RiskyDesign(t_star=max(raw, 0.0), beta=beta, d_bar=d_bar,
                           branch="above", clamped=raw <= 0.0)
    log_arg = (target.eps + beta * -math.expm1(-a1 * target.d) - 1.0) / margin
    if log_arg <= 1.0:
        # unreachable for d > 0 with a positive margin since beta > 1; kept
        # as a guard against floating-point collapse near the boundary
        raise BranchDomainError(
            f"below-branch log argument {log_arg:.6g} <= 1 for target {target}"
        )
    return RiskyDesign(t_star=math.log(log_arg) / a1, beta=beta, d_bar=d_bar,
                       branch="below", clamped=False)


def risky_cost_bound(target: QoETarget, rates: Rates, design: RiskyDesign) -> float:
    """Closed-form upper bound on the expected paid time of Risky{T*}."""
    exps = Exponents.from_rates(rates)
    a0, a1 = exps.alpha0, exps.alpha1
    denom = rates.r1 - 1.0
    if design.branch == "above":
        return design.beta / (a1 * denom) * math.exp(-a0 * (target.d - design.t_star))
    t_star = design.t_star
    num = -math.expm1(-a1 * target.d)
    return num / (denom * -math.expm1(-a1 * t_star)) * (t_star + 1.0 + design.beta / a1) \
        - target.d / denom
