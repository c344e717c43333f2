"""Rates, QoE targets, interruption exponents and feasibility regions.

The interruption probability of a single Poisson-fed buffer started at level
D decays as exp(-I(R) * D), where the exponent I(R) is the unique positive
root of

    gamma(r) = r + R * (exp(-r) - 1).

The Brownian fluid counterpart of I(R) is 2*(R - 1).  Both exponents drive
the feasibility classification of a QoE target (D, eps): above the free-rate
curve no paid usage is needed, below the combined-rate curve no policy works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .errors import DomainError

#: accepted model selectors
MODELS = ("poisson", "fluid")


@dataclass(frozen=True)
class Rates:
    """Packet arrival rates: free server r0, paid increment rc."""

    r0: float
    rc: float

    def __post_init__(self):
        if not self.r0 > 1.0:
            raise DomainError(f"free rate must exceed the unit playback rate, got r0={self.r0}")
        if not self.rc > 0.0:
            raise DomainError(f"paid rate increment must be positive, got rc={self.rc}")

    @property
    def r1(self) -> float:
        """Combined rate with the paid server active."""
        return self.r0 + self.rc


@dataclass(frozen=True)
class QoETarget:
    """Initial buffer size d (packets) and interruption tolerance eps."""

    d: float
    eps: float

    def __post_init__(self):
        if self.d < 0.0:
            raise DomainError(f"initial buffer must be nonnegative, got d={self.d}")
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"interruption tolerance must be in (0,1), got eps={self.eps}")


class RegionClass(Enum):
    ZERO_COST = "zero_cost"
    NON_DEGENERATE = "non_degenerate"
    INFEASIBLE = "infeasible"


def gamma(r: float, rate: float) -> float:
    """Exponent-defining function r + rate*(exp(-r) - 1).

    expm1 keeps full relative precision near the r=0 root, which matters for
    rates barely above 1 where the positive root is itself tiny.
    """
    return r + rate * math.expm1(-r)


def _dgamma(r: float, rate: float) -> float:
    return 1.0 - rate * math.exp(-r)


@lru_cache(maxsize=None)
def interruption_exponent(rate: float) -> float:
    """Unique positive root of gamma(., rate) for rate > 1.

    Safeguarded hybrid: bracket [~0, hi] with hi doubled from the fluid guess
    2*(rate-1) until gamma(hi) > 0, bisection to 1e-8, then Newton polish.
    The result satisfies |gamma(root, rate)| <= 1e-12.
    """
    if not rate > 1.0:
        raise DomainError(f"interruption exponent requires rate > 1, got {rate}")
    hi = 2.0 * (rate - 1.0)
    while gamma(hi, rate) <= 0.0:
        hi *= 2.0
    lo = 0.0  # gamma(0)=0 with negative slope 1-rate: root strictly inside
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if gamma(mid, rate) <= 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _ in range(20):
        g = gamma(r, rate)
        if abs(g) <= 1e-14:
            break
        step = g / _dgamma(r, rate)
        r -= step
        if abs(step) <= 1e-17 * max(1.0, abs(r)):
            break
    return r


def fluid_exponent(rate: float) -> float:
    """Brownian-model interruption exponent 2*(rate - 1)."""
    if not rate > 1.0:
        raise DomainError(f"fluid exponent requires rate > 1, got {rate}")
    return 2.0 * (rate - 1.0)


@dataclass(frozen=True)
class Exponents:
    """Cached interruption exponents for a rate pair, both models."""

    alpha0: float
    alpha1: float
    theta0: float
    theta1: float

    @classmethod
    def from_rates(cls, rates: Rates) -> "Exponents":
        return _exponents_cached(rates.r0, rates.rc)

    def pair(self, model: str) -> tuple[float, float]:
        """(slow, fast) exponent pair for the chosen model."""
        if model == "poisson":
            return self.alpha0, self.alpha1
        if model == "fluid":
            return self.theta0, self.theta1
        raise DomainError(f"unknown model {model!r}, expected one of {MODELS}")


@lru_cache(maxsize=None)
def _exponents_cached(r0: float, rc: float) -> Exponents:
    r1 = r0 + rc
    return Exponents(
        alpha0=interruption_exponent(r0),
        alpha1=interruption_exponent(r1),
        theta0=fluid_exponent(r0),
        theta1=fluid_exponent(r1),
    )


def region_boundaries(eps: float, rates: Rates, model: str = "poisson") -> tuple[float, float]:
    """Buffer sizes (d_min, d_max) bounding the non-degenerate region.

    Below d_min no policy meets eps; at or above d_max the free server alone
    does.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must be in (0,1), got {eps}")
    a0, a1 = Exponents.from_rates(rates).pair(model)
    level = math.log(1.0 / eps)
    return level / a1, level / a0


def classify_region(target: QoETarget, rates: Rates, model: str = "poisson") -> RegionClass:
    """Classify (D, eps) as zero-cost, non-degenerate, or infeasible.

    The lower boundary is closed (D == d_min is non-degenerate); the upper
    boundary belongs to the zero-cost region.
    """
    d_min, d_max = region_boundaries(target.eps, rates, model)
    if target.d >= d_max:
        return RegionClass.ZERO_COST
    if target.d < d_min:
        return RegionClass.INFEASIBLE
    return RegionClass.NON_DEGENERATE
