import math

import numpy as np
import pytest
from scipy.special import gamma as scipy_gamma

from hslab.errors import DomainValidationError
from hslab.special import (AubinIntegralParams, aubin_integral,
                           aubin_integral_quadrature, gamma, sphere_volume,
                           verify_aubin_recurrences)


def test_gamma_classical_values():
    assert gamma(1.0) == 1.0
    assert abs(gamma(0.5) - math.sqrt(math.pi)) < 1e-15
    assert gamma(5.0) == 24.0


def test_gamma_matches_reference_library():
    xs = np.linspace(0.05, 50.0, 257)
    ours = np.array([gamma(x) for x in xs])
    ref = scipy_gamma(xs)
    assert np.max(np.abs(ours - ref) / ref) < 1e-13


@pytest.mark.parametrize("bad", [0.0, -1.0, -3.5])
def test_gamma_rejects_nonpositive(bad):
    with pytest.raises(DomainValidationError):
        gamma(bad)


def test_sphere_volume_small_dimensions():
    assert abs(sphere_volume(1) - 2 * math.pi) < 1e-15
    assert abs(sphere_volume(2) - 4 * math.pi) < 1e-14
    assert abs(sphere_volume(3) - 2 * math.pi**2) < 1e-14


def test_sphere_volume_recursion():
    # omega_k = 2 pi / (k-1) * omega_{k-2}
    for k in range(3, 13):
        expected = 2 * math.pi / (k - 1) * sphere_volume(k - 2)
        assert abs(sphere_volume(k) - expected) / expected < 1e-14


def test_sphere_volume_rejects_bad_dimension():
    with pytest.raises(DomainValidationError):
        sphere_volume(0)


def test_aubin_integral_exact_values():
    assert abs(aubin_integral(2.0, 0.0) - 1.0) < 1e-14
    # forced by the first recurrence from I(2,0) = 1
    assert abs(aubin_integral(3.0, 0.0) - 0.5) < 1e-14
    # forced by the second recurrence
    assert abs(aubin_integral(3.0, 1.0) - 0.5) < 1e-14


def test_aubin_integral_invariants():
    with pytest.raises(DomainValidationError):
        aubin_integral(2.0, 1.5)  # p - q <= 1
    with pytest.raises(DomainValidationError):
        aubin_integral(3.0, -1.0)  # q <= -1
    assert AubinIntegralParams(2.0, 0.99).well_conditioned is False
    assert AubinIntegralParams(3.0, 0.5).well_conditioned is True


def test_aubin_integral_against_quadrature():
    rng = np.random.RandomState(7)
    for _ in range(25):
        q = rng.uniform(-0.5, 6.0)
        p = q + 1.0 + rng.uniform(0.2, 6.0)
        closed = aubin_integral(p, q)
        quad = aubin_integral_quadrature(p, q)
        assert abs(closed - quad) / closed < 1e-9


def test_recurrence_sweep_grid():
    p_grid = np.arange(2.0, 10.5, 0.5)
    q_grid = np.arange(0.0, 9.0, 0.5)
    report = verify_aubin_recurrences(p_grid, q_grid)
    assert report.checked > 100
    assert len(report.skipped) > 0  # pairs with p - q <= 1 are skipped
    assert report.max_violation < 1e-12


def test_recurrence_single_pair():
    report = verify_aubin_recurrences([2.0], [0.0])
    assert report.checked == 1
    assert report.max_violation < 1e-15


def test_recurrence_near_divergent_pair_flagged():
    # p - q = 1.01: computed, flagged, and still matching quadrature
    report = verify_aubin_recurrences([2.0], [0.99])
    assert (2.0, 0.99) in report.ill_conditioned
    assert math.isfinite(report.max_violation)
    closed = aubin_integral(2.0, 0.99)
    quad = aubin_integral_quadrature(2.0, 0.99)
    assert abs(closed - quad) / closed < 1e-7
