"""Gamma/beta evaluation, unit-sphere volumes, and the one-parameter
family of rational radial integrals

    I(p, q) = int_0^inf t^q / (1+t)^p dt  =  B(q+1, p-q-1),

which converges for q > -1 and p - q > 1.  These integrals carry two
exact recurrences,

    I(p+1, q)   = (p-q-1)/p * I(p, q)
    I(p+1, q+1) = (q+1)/(p-q-1) * I(p+1, q),

used throughout as consistency checks on the closed forms.  The beta
closed form is the primary evaluation path; adaptive quadrature with an
exact 1/t tail substitution is kept as an independent cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainValidationError, QuadratureError

# parameters closer than this to the p - q = 1 divergence are computed
# but reported as ill-conditioned
ILL_CONDITIONED_MARGIN = 0.05


def gamma(x: float) -> float:
    """Gamma function on the positive half line (relative error ~1e-15)."""
    if not x > 0:
        raise DomainValidationError(f"gamma requires x > 0, got {x}")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    """log(Gamma(x)) for x > 0; safe for large arguments."""
    if not x > 0:
        raise DomainValidationError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def sphere_volume(k: int) -> float:
    """Volume (surface measure) of the unit k-sphere: 2 pi^((k+1)/2) / Gamma((k+1)/2)."""
    if int(k) != k or k < 1:
        raise DomainValidationError(f"sphere_volume requires integer k >= 1, got {k}")
    k = int(k)
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class AubinIntegralParams:
    """Exponent pair (p, q) for I(p, q); validates convergence on construction."""

    p: float
    q: float

    def __post_init__(self):
        if not (self.q > -1.0):
            raise DomainValidationError(
                f"aubin integral needs q > -1 for integrability at 0, got q={self.q}"
            )
        if not (self.p - self.q > 1.0):
            raise DomainValidationError(
                f"aubin integral needs p - q > 1 for convergence, got p-q={self.p - self.q}"
            )

    @property
    def well_conditioned(self) -> bool:
        return self.p - self.q - 1.0 >= ILL_CONDITIONED_MARGIN


def aubin_integral(p: float, q: float) -> float:
    """I(p, q) via the beta closed form B(q+1, p-q-1)."""
    AubinIntegralParams(p, q)
    return math.exp(math.lgamma(q + 1.0) + math.lgamma(p - q - 1.0) - math.lgamma(p))


def aubin_integral_quadrature(p: float, q: float, rtol: float = 1e-12) -> float:
    """Independent evaluation of I(p, q).

    Integrates t^q (1+t)^(-p) adaptively on [0, 1] and handles the tail
    exactly through u = 1/t, which maps it to the finite integral
    int_0^1 u^(p-q-2) (1+u)^(-p) du.
    """
    AubinIntegralParams(p, q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, e1 = integrate.quad(
            lambda t: t**q * (1.0 + t) ** (-p), 0.0, 1.0,
            epsabs=0.0, epsrel=rtol, limit=400,
        )
        tail, e2 = integrate.quad(
            lambda u: u ** (p - q - 2.0) * (1.0 + u) ** (-p), 0.0, 1.0,
            epsabs=0.0, epsrel=rtol, limit=400,
        )
    value = head + tail
    if not np.isfinite(value):
        raise QuadratureError(f"quadrature for I({p},{q}) returned {value}")
    return value


@dataclass
class RecurrenceReport:
    """Result of sweeping the two I(p, q) recurrences over a parameter grid."""

    max_violation_step: float  # I(p+1,q) vs (p-q-1)/p * I(p,q)
    max_violation_shift: float  # I(p+1,q+1) vs (q+1)/(p-q-1) * I(p+1,q)
    checked: int
    skipped: list = field(default_factory=list)
    ill_conditioned: list = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max(self.max_violation_step, self.max_violation_shift)


def verify_aubin_recurrences(p_grid, q_grid) -> RecurrenceReport:
    """Check both recurrences at every valid (p, q) pair of the grids.

    Invalid pairs (divergent at p or p+1 stage) are skipped and listed;
    nearly divergent ones (p - q - 1 below the conditioning margin) are
    evaluated but flagged.  Violations are relative to the recurrence's
    right-hand side.
    """
    worst_step = 0.0
    worst_shift = 0.0
    checked = 0
    skipped = []
    flagged = []
    for p in np.atleast_1d(np.asarray(p_grid, dtype=float)):
        for q in np.atleast_1d(np.asarray(q_grid, dtype=float)):
            if not (q > -1.0 and p - q > 1.0):
                skipped.append((float(p), float(q)))
                continue
            if p - q - 1.0 < ILL_CONDITIONED_MARGIN:
                flagged.append((float(p), float(q)))
            base = aubin_integral(p, q)
            up = aubin_integral(p + 1.0, q)
            rhs_step = (p - q - 1.0) / p * base
            worst_step = max(worst_step, abs(up - rhs_step) / abs(rhs_step))
            shifted = aubin_integral(p + 1.0, q + 1.0)
            rhs_shift = (q + 1.0) / (p - q - 1.0) * up
            worst_shift = max(worst_shift, abs(shifted - rhs_shift) / abs(rhs_shift))
            checked += 1
    return RecurrenceReport(worst_step, worst_shift, checked, skipped, flagged)
