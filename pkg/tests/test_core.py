"""Exponent solver and feasibility-region classification.

Frozen expected values were computed with a 40-digit bisection/Newton
evaluation (mpmath); tolerances are relative 1e-9 unless a criterion
demands tighter.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstream import (DomainError, Exponents, QoETarget, Rates, RegionClass,
                     classify_region, fluid_exponent, gamma,
                     interruption_exponent, region_boundaries)

R_GRID = [1.01, 1.05, 1.1, 1.2, 1.5, 2.0, 5.0]

# largest root of r + R(e^-r - 1), 40-digit oracle
I_FROZEN = {
    1.01: 0.019933774543987672,
    1.05: 0.09838692892654663,
    1.1: 0.1937475579949905,
    1.2: 0.37643799724946125,
    1.5: 0.8742174657987171,
    2.0: 1.59362426004004,
    5.0: 4.965114231744276,
}


def bisect_exponent(rate, iters=200):
    """Independent oracle: plain bisection on gamma, no Newton polish."""
    hi = 2.0 * (rate - 1.0)
    while gamma(hi, rate) <= 0.0:
        hi *= 2.0
    lo = 1e-300
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if gamma(mid, rate) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_gamma_zero_is_root():
    for rate in R_GRID:
        assert gamma(0.0, rate) == 0.0


def test_gamma_near_root_value():
    assert abs(gamma(0.0985, 1.05)) < 1e-4


def test_gamma_frozen_point():
    # 1 + 2(e^-1 - 1), 40-digit evaluation
    assert gamma(1.0, 2.0) == pytest.approx(-0.26424111765711533, rel=1e-14)


def test_exponent_frozen_values():
    for rate, expected in I_FROZEN.items():
        assert interruption_exponent(rate) == pytest.approx(expected, rel=1e-9)


def test_exponent_matches_bisection_oracle():
    for rate in R_GRID:
        assert abs(interruption_exponent(rate) - bisect_exponent(rate)) <= 1e-9


def test_exponent_residual_tiny():
    for rate in R_GRID:
        assert abs(gamma(interruption_exponent(rate), rate)) <= 1e-12


def test_exponent_near_unit_rate():
    assert interruption_exponent(1.0 + 1e-12) < 1e-6


def test_exponent_requires_supercritical_rate():
    with pytest.raises(DomainError):
        interruption_exponent(1.0)
    with pytest.raises(DomainError):
        interruption_exponent(0.9)


def test_exponent_monotone_and_below_fluid():
    prev = 0.0
    for rate in R_GRID:
        alpha = interruption_exponent(rate)
        assert alpha > prev
        # observed numerically; not claimed by the source analysis
        assert alpha < fluid_exponent(rate)
        prev = alpha


@given(st.floats(min_value=1.01, max_value=5.0))
@settings(max_examples=50, deadline=None)
def test_exponent_root_property(rate):
    alpha = interruption_exponent(rate)
    assert alpha > 0.0
    assert abs(gamma(alpha, rate)) <= 1e-12


def test_fluid_exponent_values():
    assert fluid_exponent(1.05) == pytest.approx(0.1, rel=1e-15)
    assert fluid_exponent(1.2) == pytest.approx(0.4, rel=1e-15)
    assert fluid_exponent(2.0) == 2.0
    with pytest.raises(DomainError):
        fluid_exponent(1.0)


def test_rates_validation():
    with pytest.raises(DomainError):
        Rates(1.0, 0.1)
    with pytest.raises(DomainError):
        Rates(1.1, 0.0)
    assert Rates(1.05, 0.15).r1 == pytest.approx(1.2, rel=1e-15)


def test_target_validation():
    with pytest.raises(DomainError):
        QoETarget(-1.0, 0.5)
    with pytest.raises(DomainError):
        QoETarget(1.0, 0.0)
    with pytest.raises(DomainError):
        QoETarget(1.0, 1.0)


def test_region_boundaries_frozen(rates):
    d_min, d_max = region_boundaries(1e-3, rates, "poisson")
    assert d_min == pytest.approx(18.35031354288192, rel=1e-9)
    assert d_max == pytest.approx(70.210091465903, rel=1e-9)


def test_region_boundaries_eps_to_one(rates):
    d_min, d_max = region_boundaries(1.0 - 1e-12, rates, "poisson")
    assert 0.0 <= d_min < d_max < 1e-10


def test_region_boundaries_fluid_unit_log(rates):
    # theta0=0.1, theta1=0.4, eps=e^-1: log(1/eps)=1
    d_min, d_max = region_boundaries(math.exp(-1.0), rates, "fluid")
    assert d_min == pytest.approx(2.5, rel=1e-12)
    assert d_max == pytest.approx(10.0, rel=1e-12)


def test_region_boundaries_rejects_bad_eps(rates):
    with pytest.raises(DomainError):
        region_boundaries(0.0, rates)
    with pytest.raises(DomainError):
        region_boundaries(1.5, rates)


def test_classify_examples(rates):
    assert classify_region(QoETarget(80.0, 1e-3), rates) is RegionClass.ZERO_COST
    assert classify_region(QoETarget(20.0, 1e-3), rates) is RegionClass.NON_DEGENERATE
    assert classify_region(QoETarget(10.0, 1e-3), rates) is RegionClass.INFEASIBLE


def test_classify_boundaries_closed_sides(rates):
    d_min, d_max = region_boundaries(1e-3, rates)
    assert classify_region(QoETarget(d_min, 1e-3), rates) is RegionClass.NON_DEGENERATE
    assert classify_region(QoETarget(d_max, 1e-3), rates) is RegionClass.ZERO_COST


@given(st.floats(min_value=0.0, max_value=200.0),
       st.floats(min_value=1e-6, max_value=0.999))
@settings(max_examples=200, deadline=None)
def test_classify_consistent_with_boundaries(d, eps):
    rates = Rates(1.05, 0.15)
    for model in ("poisson", "fluid"):
        d_min, d_max = region_boundaries(eps, rates, model)
        cls = classify_region(QoETarget(d, eps), rates, model)
        assert (cls is RegionClass.ZERO_COST) == (d >= d_max)
        assert (cls is RegionClass.INFEASIBLE) == (d < d_min)


def test_exponents_cached_and_consistent(rates):
    exps = Exponents.from_rates(rates)
    assert exps is Exponents.from_rates(rates)
    assert exps.alpha0 == interruption_exponent(1.05)
    assert exps.theta1 == pytest.approx(0.4, rel=1e-12)
    assert 0.0 < exps.alpha0 < exps.alpha1
    assert 0.0 < exps.theta0 < exps.theta1
