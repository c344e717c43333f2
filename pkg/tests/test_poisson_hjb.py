"""Expanded-state candidate value function and Bellman residual (Poisson)."""

import math

import pytest

from qstream import (DomainError, poisson_candidate_value,
                     poisson_hjb_residual, poisson_threshold_state)
from qstream.core import Exponents
from qstream.poisson_hjb import _value_or_boundary

THETA = 3.8260976468784897  # alpha1/alpha0 at rates 1.05/0.15
T_35 = 17.284803788587343
V_35 = 9.353832492068262


def _branch_q(p, rates):
    exps = Exponents.from_rates(rates)
    return math.log((exps.alpha1 / exps.alpha0) / p) / exps.alpha1


def test_threshold_state_frozen(rates):
    assert poisson_threshold_state(35.0, 1e-3, rates) == pytest.approx(T_35, rel=1e-9)


def test_threshold_state_branch_boundary_identity(rates):
    # on the branch curve p = theta * e^{-alpha1 q} the map returns q itself
    exps = Exponents.from_rates(rates)
    for q in (22.0, 26.0, 30.0):
        p = THETA * math.exp(-exps.alpha1 * q)
        if not p < 1.0:
            continue
        assert poisson_threshold_state(q, p, rates) == pytest.approx(q, rel=1e-9)


def test_threshold_state_decreases_in_q(rates):
    p = 1e-3
    values = [poisson_threshold_state(q, p, rates) for q in (25.0, 35.0, 45.0, 60.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    # within the admissible region the map stays positive: at the zero-cost
    # edge it equals log(theta)/(alpha1-alpha0); beyond it the region guard
    # fires before the raw value could cross zero
    exps = Exponents.from_rates(rates)
    edge = math.log(1.0 / p) / exps.alpha0
    assert poisson_threshold_state(edge - 1e-9, p, rates) == pytest.approx(
        math.log(THETA) / (exps.alpha1 - exps.alpha0), rel=1e-6)


def test_threshold_state_region_guard(rates):
    with pytest.raises(DomainError):
        poisson_threshold_state(5.0, 1e-3, rates)  # infeasible
    with pytest.raises(DomainError):
        poisson_threshold_state(80.0, 1e-3, rates)  # zero cost


def test_candidate_value_frozen(rates):
    assert poisson_candidate_value(35.0, 1e-3, rates) == pytest.approx(V_35, rel=1e-9)


def test_candidate_value_monotone(rates):
    # nonincreasing in p at fixed q, nonincreasing in q at fixed p
    q = 35.0
    vals_p = [poisson_candidate_value(q, p, rates) for p in (5e-4, 1e-3, 2e-3, 5e-3)]
    assert all(a >= b for a, b in zip(vals_p, vals_p[1:]))
    p = 1e-3
    vals_q = [poisson_candidate_value(q, p, rates) for q in (25.0, 30.0, 40.0, 55.0)]
    assert all(a >= b for a, b in zip(vals_q, vals_q[1:]))
    assert all(v >= 0.0 for v in vals_p + vals_q)


def test_candidate_value_diverges_at_lower_boundary(rates):
    # the below-branch denominator p - e^{-alpha1 q} -> 0+ drives the map T,
    # and with it the value, to infinity (logarithmically)
    exps = Exponents.from_rates(rates)
    q = 20.0
    floor = math.exp(-exps.alpha1 * q)
    vals = [poisson_candidate_value(q, floor * (1.0 + s), rates)
            for s in (1e-12, 1e-8, 1e-4, 1e-2, 3.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[0] > 3.0 * vals[-1]


def test_extended_value_boundaries(rates):
    assert _value_or_boundary(20.0, 1.0, rates) == 0.0
    assert _value_or_boundary(20.0, 0.0, rates) == math.inf
    assert _value_or_boundary(80.0, 1e-3, rates) == 0.0
    assert _value_or_boundary(5.0, 1e-3, rates) == math.inf


def test_residual_small_in_upper_zone(rates):
    for q, p in [(35.0, 1e-3), (30.0, 1e-3), (40.0, 5e-4), (25.0, 2e-3)]:
        rep = poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=300)
        assert rep.zone == "exact"
        assert abs(rep.residual) < 0.05
        assert rep.u_star == 0


def test_residual_small_in_lower_zone(rates):
    for q, p in [(10.0, 3e-2), (12.0, 2e-2), (8.0, 0.08)]:
        assert q <= _branch_q(p, rates) - 1.0
        rep = poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=300)
        assert rep.zone == "exact"
        assert abs(rep.residual) < 0.05
        assert rep.u_star == 1


def test_residual_flags_approximate_strip(rates):
    p = 1e-2
    q = _branch_q(p, rates) - 0.5
    rep = poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=300)
    assert rep.zone == "approximate"


def test_minimizing_u_matches_branch_curve(rates):
    for p in (3e-3, 1e-2, 3e-2):
        qa = _branch_q(p, rates)
        above = poisson_hjb_residual(qa + 2.0, p, rates, h=1e-4, phi_grid=200)
        below = poisson_hjb_residual(qa - 2.0, p, rates, h=1e-4, phi_grid=200)
        assert above.u_star == 0
        assert below.u_star == 1


def test_forced_phi_never_beats_full_grid(rates):
    q, p = 30.0, 1e-3
    forced = poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=1)
    full = poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=500)
    assert forced.phi_star == p
    assert forced.rhs >= full.rhs - 1e-12


def test_residual_shrinks_with_h(rates):
    q, p = 32.0, 1e-3
    r_h = abs(poisson_hjb_residual(q, p, rates, h=2e-4, phi_grid=300).residual)
    r_h2 = abs(poisson_hjb_residual(q, p, rates, h=1e-4, phi_grid=300).residual)
    assert r_h2 < r_h


def test_residual_stencil_guard(rates):
    exps = Exponents.from_rates(rates)
    q = 20.0
    p_low = math.exp(-exps.alpha1 * q)
    with pytest.raises(DomainError):
        poisson_hjb_residual(q, p_low * (1.0 + 1e-6), rates, h=1e-4)
