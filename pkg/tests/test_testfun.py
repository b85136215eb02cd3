import math

import numpy as np
import pytest
from hslab.bubble import BubbleParams, bubble_profile, curvature_threshold, sharp_constant
from hslab.errors import DomainValidationError, QuadratureError
from hslab.geometry import RadialFunction, RadialGrid, RoundSphere
from hslab.green import solve_green
from hslab.special import sphere_volume
from hslab.testfun import (Cutoff, TestFamily, bubble_test_function,
                           curvature_slope_target, fit_curvature_expansion,
                           fit_mass_expansion, geometric_eps,
                           hardy_sobolev_quotient, log_slope_target,
                           mass_slope_target, mass_test_function, quotient_sweep)


def test_cutoff_shape():
    cut = Cutoff(0.4)
    assert cut(0.0) == 1.0 and cut(0.4) == 1.0
    assert cut(0.8) == 0.0 and cut(1.5) == 0.0
    r = np.linspace(0.4, 0.8, 100)
    vals = cut(r)
    assert np.all(vals >= 0) and np.all(vals <= 1)
    assert np.all(np.diff(vals) <= 0)
    # derivative consistency
    h = 1e-6
    for x in (0.5, 0.6, 0.75):
        fd = (cut(x + h) - cut(x - h)) / (2 * h)
        assert abs(fd - cut.deriv(x)) < 1e-8


def test_bubble_value_at_pole():
    fam = TestFamily(RoundSphere(3, 1.0), 1.0, 0.5, cutoff_rho=0.4)
    assert abs(bubble_test_function(fam, 0.01, 0.0) - 10.0) < 1e-12


def test_bubble_scaling_identity():
    fam = TestFamily(RoundSphere(5, 1.0), 0.75, 0.1, cutoff_rho=0.4)
    n, s, eps = 5, 0.75, 3e-3
    for t in (0.2, 1.0, 4.0):
        lhs = bubble_test_function(fam, eps, eps * t)
        rhs = eps ** (-(n - 2.0) / 2.0) * bubble_profile(BubbleParams(n, s), t)
        assert abs(lhs - rhs) / rhs < 1e-13


def test_bubble_combined_example():
    fam = TestFamily(RoundSphere(4, 1.0), 1.0, 0.1, cutoff_rho=0.4)
    assert abs(bubble_test_function(fam, 0.1, 0.1) - 2.5) < 1e-12


def test_quotient_zero_homogeneity():
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    g = RadialGrid.build(m, inner_scale=1e-5)
    u = RadialFunction.from_callable(g, lambda r: np.cos(r / 2.0),
                                     lambda r: -0.5 * np.sin(r / 2.0))
    J1 = hardy_sobolev_quotient(fam, u)
    u2 = RadialFunction(g, 2.0 * u.values, 2.0 * u.derivative)
    assert abs(hardy_sobolev_quotient(fam, u2) - J1) <= 1e-12 * J1


def test_quotient_rejects_zero():
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    g = RadialGrid.build(m)
    with pytest.raises(DomainValidationError):
        hardy_sobolev_quotient(fam, RadialFunction(g, np.zeros(g.size)))


def _trapezoid_richardson_quotient(n, s, R, a, fn, dfn, samples=200001):
    """Independent quotient oracle: trapezoid on a uniform radial grid at
    two resolutions plus Richardson, for smooth profiles."""
    w = sphere_volume(n - 1) * R ** (n - 1)
    crit = 2.0 * (n - s) / (n - 2.0)

    def both(m_samples):
        r = np.linspace(0.0, math.pi * R, m_samples)[1:-1]
        vol = w * np.sin(r / R) ** (n - 1)
        num = np.trapezoid((dfn(r) ** 2 + a * fn(r) ** 2) * vol, r)
        den = np.trapezoid(np.abs(fn(r)) ** crit * r ** (-s) * vol, r)
        return num, den

    n1, d1 = both(samples)
    n2, d2 = both(2 * samples - 1)
    num = (4.0 * n2 - n1) / 3.0
    den = (4.0 * d2 - d1) / 3.0
    return num / den ** (2.0 / crit)


def test_quotient_against_trapezoid_oracle():
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    fn = lambda r: np.cos(r / 2.0) + 0.2
    dfn = lambda r: -0.5 * np.sin(r / 2.0)
    g = RadialGrid.build(m, num_nodes=1024, inner_scale=1e-5)
    ours = hardy_sobolev_quotient(fam, RadialFunction.from_callable(g, fn, dfn))
    oracle = _trapezoid_richardson_quotient(3, 1.0, 1.0, 0.5, fn, dfn)
    assert abs(ours - oracle) / oracle < 1e-8


def test_family_validation():
    m = RoundSphere(3, 1.0)
    with pytest.raises(DomainValidationError):
        TestFamily(m, 1.0, 0.5, cutoff_rho=2.0)  # beyond half injectivity radius
    with pytest.raises(DomainValidationError):
        TestFamily(m, 1.0, 0.5, cutoff_rho=0.4, eps_list=np.array([0.1]))  # eps too big


def test_bubble_quotient_approaches_threshold():
    m = RoundSphere(5, 1.0)
    fam = TestFamily(m, 1.0, 0.1, cutoff_rho=0.4)
    K = sharp_constant(fam.params)
    eps, Js = quotient_sweep(fam, profile="bubble")
    y = K * Js - 1.0
    # approaches zero from below (a < threshold * Scal) and shrinks with eps
    assert np.all(y < 0)
    assert abs(y[0]) < abs(y[-1])
    assert abs(y[0]) < 1e-7


def test_upper_bound_with_fitted_correction():
    m = RoundSphere(5, 1.0)
    fam = TestFamily(m, 1.0, 0.1, cutoff_rho=0.4)
    K = sharp_constant(fam.params)
    fit = fit_curvature_expansion(fam)
    _, Js = quotient_sweep(fam, profile="bubble")
    correction = abs(fit.slope) * fam.eps_list[-1] ** 2
    assert np.max(Js) <= (1.0 / K) * (1.0 + 10.0 * correction)


def test_curvature_fit_s5_within_two_percent():
    fam = TestFamily(RoundSphere(5, 1.0), 1.0, 0.1, cutoff_rho=0.4)
    fit = fit_curvature_expansion(fam)
    target = curvature_slope_target(fam)
    assert fit.model == "eps2"
    assert abs(fit.slope - target) <= 0.02 * abs(target)


def test_curvature_fit_vanishes_at_threshold_potential():
    m = RoundSphere(5, 1.0)
    a_eq = curvature_threshold(5, 1.0) * m.scalar_curvature
    fam = TestFamily(m, 1.0, a_eq, cutoff_rho=0.4)
    fit = fit_curvature_expansion(fam)
    reference = abs(curvature_slope_target(TestFamily(m, 1.0, 0.1, cutoff_rho=0.4)))
    assert abs(fit.slope) <= 0.10 * reference


def test_slope_sign_tracks_potential_across_threshold():
    m = RoundSphere(5, 1.0)
    thr = curvature_threshold(5, 1.0) * m.scalar_curvature
    for a, sign in [(0.1, -1.0), (2.0, -1.0), (thr - 0.5, -1.0),
                    (thr + 0.5, 1.0), (thr + 1.0, 1.0)]:
        fam = TestFamily(m, 1.0, a, cutoff_rho=0.4)
        fit = fit_curvature_expansion(fam)
        assert math.copysign(1.0, fit.slope) == sign


def test_log_channel_dimension_four():
    fam = TestFamily(RoundSphere(4, 1.0), 0.5, 0.1, cutoff_rho=0.4)
    fit = fit_curvature_expansion(fam)
    assert fit.model == "eps2log"
    assert fit.alt_residual / fit.residual >= 2.0
    # sign of the slope equals sign of a - Scal/6 = 0.1 - 2 < 0
    assert fit.slope < 0
    target = log_slope_target(fam)
    assert abs(fit.slope - target) < 0.02 * abs(target)


def test_fit_preconditions():
    m = RoundSphere(5, 1.0)
    narrow = TestFamily(m, 1.0, 0.1, cutoff_rho=0.4,
                        eps_list=np.geomspace(1e-3 * 0.4, 5e-3 * 0.4, 8))
    with pytest.raises(DomainValidationError):
        fit_curvature_expansion(narrow)
    fam3 = TestFamily(RoundSphere(3, 1.0), 1.0, 0.5, cutoff_rho=0.4)
    with pytest.raises(DomainValidationError):
        fit_curvature_expansion(fam3)


@pytest.fixture(scope="module")
def green_half():
    return solve_green(RoundSphere(3, 1.0), 0.5)


def test_mass_profile_pointwise(green_half):
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    eps = 1e-3
    # beyond the cutoff support only the regular tail remains
    r_out = 1.5
    expected = math.sqrt(eps) * green_half.beta_value(r_out)
    assert abs(mass_test_function(fam, green_half, eps, r_out) - expected) < 1e-14
    # at the pole the concentrated profile dominates
    v0 = mass_test_function(fam, green_half, eps, 0.0)
    assert abs(v0 - (eps ** -0.5 + math.sqrt(eps) * green_half.beta_value(0.0))) < 1e-9


def test_mass_profile_recovers_green(green_half):
    # eps -> 0 at fixed r inside the plateau: v/sqrt(eps) -> 1/r + beta
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    r = 0.2
    w2G = 1.0 / r + green_half.beta_value(r)
    vals = [mass_test_function(fam, green_half, eps, r) / math.sqrt(eps)
            for eps in (1e-4, 1e-5, 1e-6)]
    errs = [abs(v - w2G) / w2G for v in vals]
    assert errs[-1] < 1e-4
    assert errs[0] > errs[-1]
    assert abs(w2G - sphere_volume(2) * green_half.green_value(r)) < 1e-10


def test_mass_profile_needs_dimension_three(green_half):
    fam5 = TestFamily(RoundSphere(5, 1.0), 1.0, 0.1, cutoff_rho=0.4)
    with pytest.raises(DomainValidationError):
        mass_test_function(fam5, green_half, 1e-3, 0.1)


def test_mass_fit_matches_derived_constant(green_half):
    fam = TestFamily(RoundSphere(3, 1.0), 1.0, 0.5, cutoff_rho=0.4)
    fit = fit_mass_expansion(fam, green_half)
    target = mass_slope_target(fam, green_half)
    assert fit.model == "eps1"
    assert abs(fit.slope - target) <= 0.05 * target


def test_mass_fit_monotone_in_potential(green_half):
    m = RoundSphere(3, 1.0)
    slopes = []
    for a in [0.25, 0.5, 0.74]:
        green = green_half if a == 0.5 else solve_green(m, a)
        fam = TestFamily(m, 1.0, a, cutoff_rho=0.4)
        slopes.append(fit_mass_expansion(fam, green).slope)
    assert slopes[0] > slopes[1] > slopes[2]


def test_mass_fit_vanishes_at_critical_potential(green_half):
    m = RoundSphere(3, 1.0)
    green = solve_green(m, 0.75)
    fam = TestFamily(m, 1.0, 0.75, cutoff_rho=0.4)
    fit = fit_mass_expansion(fam, green)
    fam_half = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    reference = abs(fit_mass_expansion(fam_half, green_half).slope)
    assert abs(fit.slope) <= 0.10 * reference


def test_quotient_nodal_derivative_fallback():
    # without stored derivatives the grid's folded stencils are used
    m = RoundSphere(4, 1.0)
    fam = TestFamily(m, 0.5, 0.2, cutoff_rho=0.4)
    g = RadialGrid.build(m, num_nodes=1024)
    fn = lambda r: np.cos(r / 2.0) + 0.3
    dfn = lambda r: -0.5 * np.sin(r / 2.0)
    exact = hardy_sobolev_quotient(fam, RadialFunction.from_callable(g, fn, dfn))
    nodal = hardy_sobolev_quotient(fam, RadialFunction.from_callable(g, fn))
    assert abs(nodal - exact) / exact < 1e-8


def test_quotient_rejects_nonfinite():
    m = RoundSphere(3, 1.0)
    fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
    g = RadialGrid.build(m)
    vals = np.ones(g.size)
    vals[10] = np.inf
    with pytest.raises(QuadratureError):
        hardy_sobolev_quotient(fam, RadialFunction(g, vals, np.zeros(g.size)))


def test_mass_profile_rejects_mismatched_cutoff(green_half):
    fam = TestFamily(RoundSphere(3, 1.0), 1.0, 0.5, cutoff_rho=0.3)
    with pytest.raises(DomainValidationError):
        mass_test_function(fam, green_half, 1e-3, 0.1)


def test_geometric_eps_span():
    eps = geometric_eps(0.4)
    assert abs(math.log10(eps[-1] / eps[0]) - 2.0) < 1e-12
    assert len(eps) == 25
