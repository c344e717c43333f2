"""Candidate value function and HJB residual check for the Poisson model.

The constrained problem becomes Markovian on the expanded state (Q, p),
where p is the interruption budget left.  The budget evolves through a
post-jump control phi (the budget assigned if the next arrival lands), and
the Bellman equation reads

    dV/dQ = min_{u, phi} { u + dV/dp * (p - phi) * R_u
                             + R_u * (V(Q+1, phi) - V(Q, p)) }.

No closed-form solution is known; the candidate below is built from the
risky policy's cost structure and satisfies the equation exactly for
Q >= log(theta/p)/alpha1 or Q <= that - 1, and only approximately in the
unit-width strip between (the jump discontinuity prevents an exact match).

Note the candidate mixes two related constants: theta = alpha1/alpha0 in the
threshold map and exponentials, but beta = alpha1/(alpha0*(1 - alpha0/2)) in
the below-branch linear term.  Both appear verbatim in the source material;
they are kept as is rather than reconciled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Exponents, QoETarget, Rates, RegionClass, classify_region
from .errors import DomainError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ExpandedState:
    q: float
    p: float


@dataclass(frozen=True)
class PoissonHJBReport:
    residual: float
    lhs: float
    rhs: float
    u_star: int
    phi_star: float
    zone: str  # "exact" or "approximate" (the unit strip below the branch curve)


def _require_nondegenerate(q: float, p: float, rates: Rates) -> None:
    if classify_region(QoETarget(d=q, eps=p), rates, "poisson") is not RegionClass.NON_DEGENERATE:
        raise DomainError(f"state (q={q}, p={p}) outside the non-degenerate region")


def poisson_threshold_state(q: float, p: float, rates: Rates) -> float:
    """Threshold map T(Q, p) of the expanded-state candidate.

    Two branches split at Q = log(theta/p)/alpha1 with theta = alpha1/alpha0.
    The upper branch decreases without bound in Q; the raw value is returned
    and the caller clamps if needed.
    """
    _require_nondegenerate(q, p, rates)
    exps = Exponents.from_rates(rates)
    a0, a1 = exps.alpha0, exps.alpha1
    theta = a1 / a0
    if q >= math.log(theta / p) / a1:
        return (math.log(theta / p) - a0 * q) / (a1 - a0)
    denom = p - math.exp(-a1 * q)
    num = p + theta * -math.expm1(-a1 * q) - 1.0
    if denom <= 0.0 or num <= 0.0:
        raise DomainError(
            f"threshold map log argument nonpositive at (q={q}, p={p})"
        )
    return math.log(num / denom) / a1


def poisson_candidate_value(q: float, p: float, rates: Rates) -> float:
    """Candidate optimal cost at (Q, p), evaluated exactly as written."""
    _require_nondegenerate(q, p, rates)
    exps = Exponents.from_rates(rates)
    a0, a1 = exps.alpha0, exps.alpha1
    theta = a1 / a0
    beta = a1 / (a0 * (1.0 - a0 / 2.0))
    r1m1 = rates.r1 - 1.0
    t_qp = poisson_threshold_state(q, p, rates)
    if q >= math.log(theta / p) / a1:
        return math.exp(-a0 * (q - t_qp)) / (a0 * (1.0 - a0 / 2.0) * r1m1)
    num = p + theta * -math.expm1(-a1 * q) - 1.0
    return num / (r1m1 * (theta - 1.0)) * (t_qp + beta / a1) - q / r1m1


def _value_or_boundary(q: float, p: float, rates: Rates) -> float:
    """Candidate value extended by the region boundaries.

    Zero-cost region evaluates to 0; infeasible region to +inf so those phi
    choices drop out of the minimization.
    """
    if p >= 1.0:
        return 0.0  # boundary condition V(Q, 1) = 0
    if p <= 0.0:
        return math.inf
    cls = classify_region(QoETarget(d=q, eps=p), rates, "poisson")
    if cls is RegionClass.ZERO_COST:
        return 0.0
    if cls is RegionClass.INFEASIBLE:
        return math.inf
    return poisson_candidate_value(q, p, rates)


def poisson_hjb_residual(q: float, p: float, rates: Rates,
                         h: float = 1e-4, phi_grid: int = 1000) -> PoissonHJBReport:
    """LHS - RHS of the Bellman equation at (q, p) for the candidate.

    Partials use central differences with relative step h (h*max(1,q) in Q,
    h*p in p); the stencil must stay in the non-degenerate region.  The RHS
    minimizes over u in {0,1} and phi on a uniform grid of phi_grid points
    in [0, 1], golden-section refined around the best grid point.
    phi_grid == 1 forces phi = p (no budget reallocation), which can only
    raise the RHS.
    """
    _require_nondegenerate(q, p, rates)
    hq = h * max(1.0, q)
    hp = h * p
    try:
        v0 = poisson_candidate_value(q, p, rates)
        v_q = (poisson_candidate_value(q + hq, p, rates)
               - poisson_candidate_value(q - hq, p, rates)) / (2.0 * hq)
        v_p = (poisson_candidate_value(q, p + hp, rates)
               - poisson_candidate_value(q, p - hp, rates)) / (2.0 * hp)
    except DomainError as exc:
        raise DomainError(f"stencil at (q={q}, p={p}, h={h}) exits the region") from exc

    def rhs_at(u: int, phi: float) -> float:
        rate = rates.r1 if u else rates.r0
        v_jump = _value_or_boundary(q + 1.0, phi, rates)
        if math.isinf(v_jump):
            return math.inf
        return u + v_p * (p - phi) * rate + rate * (v_jump - v0)

    best = (math.inf, 0, p)
    for u in (0, 1):
        if phi_grid == 1:
            candidates = [p]
        else:
            candidates = [k / (phi_grid - 1.0) for k in range(phi_grid)]
        values = [rhs_at(u, phi) for phi in candidates]
        k_min = min(range(len(values)), key=values.__getitem__)
        phi_best, val_best = candidates[k_min], values[k_min]
        if phi_grid >= 3 and 0 < k_min < len(candidates) - 1:
            lo, hi = candidates[k_min - 1], candidates[k_min + 1]
            a, b = lo, hi
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            fc, fd = rhs_at(u, c), rhs_at(u, d)
            for _ in range(60):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - _GOLDEN * (b - a)
                    fc = rhs_at(u, c)
                else:
                    a, c, fc = c, d, fd
                    d = a + _GOLDEN * (b - a)
                    fd = rhs_at(u, d)
                if b - a < 1e-12:
                    break
            phi_ref = 0.5 * (a + b)
            val_ref = rhs_at(u, phi_ref)
            if val_ref < val_best:
                phi_best, val_best = phi_ref, val_ref
        if val_best < best[0]:
            best = (val_best, u, phi_best)

    rhs, u_star, phi_star = best
    exps = Exponents.from_rates(rates)
    branch_q = math.log((exps.alpha1 / exps.alpha0) / p) / exps.alpha1
    zone = "exact" if (q >= branch_q or q <= branch_q - 1.0) else "approximate"
    return PoissonHJBReport(residual=v_q - rhs, lhs=v_q, rhs=rhs,
                            u_star=u_star, phi_star=phi_star, zone=zone)
