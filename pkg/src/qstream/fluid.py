"""Closed-form analytics for the Brownian fluid model.

The buffer follows dQ = (R_u - 1) dt + dW with unit playback drain folded
into the drift, so the degenerate-policy interruption probability from level
D is exp(-theta_i * D) with theta_i = 2*(R_i - 1).  Everything else in this
module is an exact consequence of that: the threshold policy's interruption
probability and cost-to-go, the threshold designed for a (D, eps) target,
the value function on the expanded state (Q, p), the explicit optimal
controls, a finite-difference check of the HJB equation, and the invariant
manifold the optimally controlled state rides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Exponents, QoETarget, Rates
from .errors import DomainError, InfeasibleState, InfeasibleTarget, StencilOutOfRegion

# beyond this the T->infinity limits are exact to double precision
_EXP_FLOOR = 745.0


@dataclass(frozen=True)
class FluidState:
    """Expanded state: buffer level q and remaining interruption budget p."""

    q: float
    p: float

    def __post_init__(self):
        if self.q < 0.0 or not 0.0 < self.p <= 1.0:
            raise DomainError(f"invalid fluid state (q={self.q}, p={self.p})")


@dataclass(frozen=True)
class FluidControls:
    """Optimal pair: server choice u and budget volatility phi."""

    u: int
    phi: float


@dataclass(frozen=True)
class ExitStats:
    p_hit_zero: float
    p_hit_upper: float
    expected_exit_time: float


@dataclass(frozen=True)
class FluidHJBReport:
    residual: float
    subregion: str  # "r0" (free) or "r1" (paid)
    v: float
    v_q: float
    v_qq: float
    v_pp: float
    v_qp: float


def _thetas(rates: Rates) -> tuple[float, float]:
    exps = Exponents.from_rates(rates)
    return exps.theta0, exps.theta1


def _exp_neg(x: float) -> float:
    return 0.0 if x > _EXP_FLOOR else math.exp(-x)


def fluid_p_at_threshold(t_thr: float, rates: Rates) -> float:
    """Interruption probability of the threshold policy started exactly at
    its threshold: p(T) = e^{-th1 T} / (th0/th1 + (1 - th0/th1) e^{-th1 T})."""
    if t_thr < 0.0:
        raise DomainError(f"threshold must be nonnegative, got {t_thr}")
    th0, th1 = _thetas(rates)
    ratio = th0 / th1
    e1 = _exp_neg(th1 * t_thr)
    return e1 / (ratio + (1.0 - ratio) * e1)


def fluid_interruption_probability(d: float, t_thr: float, rates: Rates) -> float:
    """Interruption probability of Risky{t_thr} from initial level d.

    Piecewise in d: below the threshold the paid drift applies until the band
    is exited, above it only the free-server tail remains.  Continuous at
    d == t_thr by the definition of p(T).
    """
    if d < 0.0 or t_thr < 0.0:
        raise DomainError(f"nonnegative d and t_thr required, got ({d}, {t_thr})")
    th0, th1 = _thetas(rates)
    p_t = fluid_p_at_threshold(t_thr, rates)
    if d >= t_thr:
        return p_t * _exp_neg(th0 * (d - t_thr))
    return _exp_neg(th1 * d) + p_t * (1.0 - th0 / th1) * -math.expm1(-th1 * d)


def fluid_design_threshold(target: QoETarget, rates: Rates) -> float:
    """Smallest threshold meeting (D, eps): the root of p^T(D) = eps.

    p^T(D) decreases monotonically in T from e^{-th0 D} to e^{-th1 D}, so the
    root is unique; bisection drives |p^T(D) - eps| below 1e-10.  Targets at
    or below the lower limit are infeasible.
    """
    th0, th1 = _thetas(rates)
    if target.eps >= _exp_neg(th0 * target.d):
        return 0.0
    if target.eps <= _exp_neg(th1 * target.d):
        raise InfeasibleTarget(
            f"fluid target (d={target.d}, eps={target.eps}) at or below "
            f"exp(-theta1*d) = {_exp_neg(th1 * target.d):.6g}"
        )
    hi = 1.0
    while fluid_interruption_probability(target.d, hi, rates) > target.eps:
        hi *= 2.0
        if hi > 1e7:
            raise InfeasibleTarget(
                f"no finite threshold reaches eps={target.eps} from d={target.d}"
            )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fluid_interruption_probability(target.d, mid, rates) > target.eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _cost_at_threshold(t_thr: float, rates: Rates) -> float:
    """Expected paid time started exactly at the threshold."""
    th0, th1 = _thetas(rates)
    ratio = th0 / th1
    e1 = _exp_neg(th1 * t_thr)
    return (2.0 / th1**2) * (1.0 - (1.0 + th1 * t_thr) * e1) / (ratio + (1.0 - ratio) * e1)


def fluid_cost(d: float, t_thr: float, rates: Rates) -> float:
    """Expected paid time (cost-to-go) of Risky{t_thr} from level d.

    J^T(0) = 0; above the threshold the cost is the at-threshold cost damped
    by the free-server reach probability.
    """
    if d < 0.0 or t_thr < 0.0:
        raise DomainError(f"nonnegative d and t_thr required, got ({d}, {t_thr})")
    th0, th1 = _thetas(rates)
    j_t = _cost_at_threshold(t_thr, rates)
    if d >= t_thr:
        return j_t * _exp_neg(th0 * (d - t_thr))
    return (j_t + (2.0 / th1) * t_thr) * math.expm1(-th1 * d) / math.expm1(-th1 * t_thr) \
        - (2.0 / th1) * d


def fluid_exit_statistics(d: float, b: float, theta: float) -> ExitStats:
    """Two-sided exit of a drifted Brownian path from [0, b] started at d.

    Returns the hit probabilities of either boundary and the expected exit
    time, for exponent theta = 2*drift (unit variance).  theta == 0 falls
    back to the drift-free ruin formulas d/b and d*(b-d), a documented
    extension beyond the drifted model.
    """
    if not 0.0 <= d <= b:
        raise DomainError(f"need 0 <= d <= b, got d={d}, b={b}")
    if b == 0.0:
        return ExitStats(1.0, 0.0, 0.0)
    if abs(theta) * b < 1e-8:
        return ExitStats((b - d) / b, d / b, d * (b - d))
    num_zero = _exp_neg(theta * d) - _exp_neg(theta * b)
    denom = -math.expm1(-theta * b)
    p_zero = num_zero / denom
    p_up = -math.expm1(-theta * d) / denom
    t_exit = (2.0 / theta) * (b * p_up - d)
    return ExitStats(p_zero, p_up, t_exit)


def _region_position(q: float, p: float, rates: Rates) -> int:
    """-1 below the feasible region, 0 inside, +1 in the zero-cost region."""
    th0, th1 = _thetas(rates)
    if p <= _exp_neg(th1 * q):
        return -1
    if p >= _exp_neg(th0 * q):
        return 1
    return 0


def fluid_value(state: FluidState, rates: Rates) -> float:
    """Optimal expected paid time from the expanded state (q, p).

    Zero on and above the free-server curve p = e^{-th0 q}; infeasible below
    p = e^{-th1 q}; in between, the cost of the threshold designed for
    (q, p) itself.
    """
    pos = _region_position(state.q, state.p, rates)
    if pos > 0:
        return 0.0
    if pos < 0:
        raise InfeasibleState(f"state (q={state.q}, p={state.p}) below the feasible region")
    t_thr = fluid_design_threshold(QoETarget(d=state.q, eps=state.p), rates)
    return fluid_cost(state.q, t_thr, rates)


def phi_free(p: float, rates: Rates) -> float:
    """Optimal budget volatility in the free sub-region: -theta0 * p."""
    th0, _ = _thetas(rates)
    return -th0 * p


def phi_paid(q: float, p: float, rates: Rates) -> float:
    """Optimal budget volatility in the paid sub-region:
    -theta1 / ((1+p) e^{theta1 q} - 2)."""
    _, th1 = _thetas(rates)
    if th1 * q > _EXP_FLOOR:
        return -0.0
    return -th1 / ((1.0 + p) * math.exp(th1 * q) - 2.0)


def fluid_optimal_controls(state: FluidState, rates: Rates) -> FluidControls:
    """Minimizing control pair (u, phi) of the HJB equation at (q, p).

    The free server is optimal exactly on and above the switching curve
    p = p_at_threshold(q); below it the paid server runs.
    """
    if _region_position(state.q, state.p, rates) < 0:
        raise InfeasibleState(f"state (q={state.q}, p={state.p}) below the feasible region")
    boundary = fluid_p_at_threshold(state.q, rates)
    if state.p >= boundary:
        return FluidControls(u=0, phi=phi_free(state.p, rates))
    return FluidControls(u=1, phi=phi_paid(state.q, state.p, rates))


def _subregion(q: float, p: float, rates: Rates) -> str:
    if _region_position(q, p, rates) != 0:
        raise StencilOutOfRegion(f"point (q={q}, p={p}) outside the feasible interior")
    return "r0" if p >= fluid_p_at_threshold(q, rates) else "r1"


def fluid_hjb_residual(state: FluidState, rates: Rates, h: float = 1e-3) -> FluidHJBReport:
    """Finite-difference residual of the HJB equation at an interior state.

    All first and second partials of the value function are taken by central
    differences with absolute step h in each coordinate.  After substituting
    the optimal phi = -V_qp / V_pp, the equation splits by sub-region:

        r0:  0 = (th0/2) V_q + V_qq/2 - V_qp^2 / (2 V_pp)
        r1:  0 = 1 + (th1/2) V_q + V_qq/2 - V_qp^2 / (2 V_pp)

    The full 3x3 stencil must stay inside one sub-region or
    StencilOutOfRegion is raised.
    """
    th0, th1 = _thetas(rates)
    q, p = state.q, state.p
    sub = _subregion(q, p, rates)
    stencil = [(q + dq * h, p + dp * h) for dq in (-1, 0, 1) for dp in (-1, 0, 1)]
    for qq, pp in stencil:
        if qq < 0.0 or not 0.0 < pp < 1.0 or _subregion(qq, pp, rates) != sub:
            raise StencilOutOfRegion(
                f"stencil point (q={qq}, p={pp}) leaves sub-region {sub}"
            )
    v = {}
    for dq in (-1, 0, 1):
        for dp in (-1, 0, 1):
            v[dq, dp] = fluid_value(FluidState(q + dq * h, p + dp * h), rates)
    v_q = (v[1, 0] - v[-1, 0]) / (2.0 * h)
    v_qq = (v[1, 0] - 2.0 * v[0, 0] + v[-1, 0]) / h**2
    v_pp = (v[0, 1] - 2.0 * v[0, 0] + v[0, -1]) / h**2
    v_qp = (v[1, 1] - v[1, -1] - v[-1, 1] + v[-1, -1]) / (4.0 * h**2)
    common = 0.5 * v_qq - 0.5 * v_qp**2 / v_pp
    if sub == "r0":
        residual = 0.5 * th0 * v_q + common
    else:
        residual = 1.0 + 0.5 * th1 * v_q + common
    return FluidHJBReport(residual=residual, subregion=sub, v=v[0, 0],
                          v_q=v_q, v_qq=v_qq, v_pp=v_pp, v_qp=v_qp)


def manifold_p(q: float, anchor: QoETarget, rates: Rates) -> float:
    """Budget coordinate of the invariant manifold through the anchor.

    The optimally controlled state stays on p = p^{T(D,eps)}(q); the curve
    passes through the anchor by construction.
    """
    t_thr = fluid_design_threshold(anchor, rates)
    return fluid_interruption_probability(q, t_thr, rates)
