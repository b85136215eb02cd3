"""Concentrating test functions on the sphere, the weighted Rayleigh
quotient, and the asymptotic fits that recover the curvature threshold
(n >= 4) and the mass coefficient (n = 3) from quotient sweeps.

The shrinking-bubble family

    u_eps(r) = eps^((n-2)/2) * (eps^(2-s) + r^(2-s))^(-(n-2)/(2-s))

concentrates at the pole as eps -> 0.  Its quotient approaches the
inverse sharp constant from one side; the sign and size of the correction
is what the fits extract.  For n = 3 the family is glued to the regular
part of the Green's function:  eta * u_eps + sqrt(eps) * beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .bubble import BubbleParams, bubble_integrals, curvature_threshold, sharp_constant
from .errors import DomainValidationError, FitError, QuadratureError
from .geometry import RadialFunction, RadialGrid, RoundSphere
from .special import sphere_volume


@dataclass(frozen=True)
class Cutoff:
    """Radial bump: identically 1 on [0, rho], quintic smoothstep down to 0
    on [rho, 2 rho], identically 0 beyond.  C^2 with bounded derivatives."""

    rho: float

    def ramp(self, r):
        """Transition parameter: 0 on the plateau, 1 beyond the support."""
        return np.clip((np.asarray(r, dtype=float) - self.rho) / self.rho, 0.0, 1.0)

    def __call__(self, r):
        t = self.ramp(r)
        out = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
        return out if out.ndim else float(out)

    def deriv(self, r):
        t = self.ramp(r)
        out = -30.0 * t**2 * (1.0 - t) ** 2 / self.rho
        return out if out.ndim else float(out)

    def deriv2(self, r):
        t = self.ramp(r)
        out = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.rho**2
        return out if out.ndim else float(out)


def geometric_eps(rho: float, lo: float = 1e-4, hi: float = 1e-2,
                  per_decade: int = 12) -> np.ndarray:
    """Geometric eps ladder, per_decade points per decade of [lo, hi]*rho."""
    decades = math.log10(hi / lo)
    count = max(2, int(round(per_decade * decades)) + 1)
    return np.geomspace(lo * rho, hi * rho, count)


@dataclass
class TestFamily:
    """A manifold, weight exponent, potential and eps ladder for sweeps.

    The potential is radial about the pole: either a constant or a
    callable of geodesic radius.  Only its value at the pole enters the
    fitted expansions, but the full profile enters the quotient.
    """

    __test__ = False  # not a pytest class despite the name

    manifold: RoundSphere
    s: float
    a: Union[float, Callable]
    cutoff_rho: float
    eps_list: np.ndarray = None
    grid_nodes: int = 512
    cutoff: Cutoff = field(init=False)

    def __post_init__(self):
        BubbleParams(self.manifold.n, self.s)
        inj = self.manifold.injectivity_radius
        if not (0.0 < self.cutoff_rho < 0.5 * inj):
            raise DomainValidationError(
                f"cutoff radius must lie in (0, {0.5 * inj:.4g}), got {self.cutoff_rho}"
            )
        if self.eps_list is None:
            self.eps_list = geometric_eps(self.cutoff_rho)
        self.eps_list = np.sort(np.asarray(self.eps_list, dtype=float))
        if self.eps_list[0] <= 0:
            raise DomainValidationError("eps values must be positive")
        if self.eps_list[-1] > self.cutoff_rho / 10.0 * (1.0 + 1e-12):
            raise DomainValidationError("largest eps must not exceed cutoff_rho / 10")
        object.__setattr__(self, "cutoff", Cutoff(self.cutoff_rho))

    @property
    def params(self) -> BubbleParams:
        return BubbleParams(self.manifold.n, self.s)

    @property
    def a0(self) -> float:
        """Potential value at the pole."""
        return float(self.a) if not callable(self.a) else float(self.a(0.0))

    def a_values(self, r) -> np.ndarray:
        if callable(self.a):
            return np.asarray(self.a(np.asarray(r, dtype=float)), dtype=float)
        return np.full_like(np.asarray(r, dtype=float), float(self.a))


def scaled_bubble(n: int, s: float, eps: float, r):
    """Shrinking-bubble value at geodesic radius r for given (n, s, eps)."""
    if eps <= 0:
        raise DomainValidationError("eps must be positive")
    m = (n - 2.0) / (2.0 - s)
    r = np.asarray(r, dtype=float)
    out = eps ** ((n - 2.0) / 2.0) * (eps ** (2.0 - s) + r ** (2.0 - s)) ** (-m)
    return out if out.ndim else float(out)


def scaled_bubble_grad(n: int, s: float, eps: float, r):
    m = (n - 2.0) / (2.0 - s)
    r = np.asarray(r, dtype=float)
    out = -(n - 2.0) * eps ** ((n - 2.0) / 2.0) * r ** (1.0 - s) \
        * (eps ** (2.0 - s) + r ** (2.0 - s)) ** (-m - 1.0)
    return out if out.ndim else float(out)


def bubble_test_function(family: TestFamily, eps: float, r):
    """Value of the family's shrinking bubble at geodesic radius r."""
    return scaled_bubble(family.manifold.n, family.s, eps, r)


def bubble_test_function_grad(family: TestFamily, eps: float, r):
    return scaled_bubble_grad(family.manifold.n, family.s, eps, r)


def _require_matching_cutoff(family: TestFamily, green) -> None:
    # one cutoff convention: the regular part was split off with the same
    # bump that glues the concentrated profile
    if abs(family.cutoff_rho - green.cutoff.rho) > 1e-12 * family.cutoff_rho:
        raise DomainValidationError(
            f"family cutoff {family.cutoff_rho} differs from the decomposition "
            f"cutoff {green.cutoff.rho}"
        )


def mass_test_function(family: TestFamily, green, eps: float, r):
    """Glued profile eta * u_eps + sqrt(eps) * beta; defined for n = 3 only."""
    if family.manifold.n != 3:
        raise DomainValidationError("the glued mass profile is specific to dimension 3")
    _require_matching_cutoff(family, green)
    r = np.asarray(r, dtype=float)
    out = np.asarray(family.cutoff(r) * bubble_test_function(family, eps, r)
                     + math.sqrt(eps) * green.beta_value(r))
    return out if out.ndim else float(out)


def mass_test_function_grad(family: TestFamily, green, eps: float, r):
    if family.manifold.n != 3:
        raise DomainValidationError("the glued mass profile is specific to dimension 3")
    _require_matching_cutoff(family, green)
    r = np.asarray(r, dtype=float)
    out = np.asarray(family.cutoff.deriv(r) * bubble_test_function(family, eps, r)
                     + family.cutoff(r) * bubble_test_function_grad(family, eps, r)
                     + math.sqrt(eps) * green.beta_value(r, deriv=1))
    return out if out.ndim else float(out)


def hardy_sobolev_quotient(family: TestFamily, u: RadialFunction) -> float:
    """The weighted Rayleigh quotient

        J(u) = int (|u'|^2 + a u^2) dv / (int |u|^crit d^-s dv)^(2/crit)

    by radial quadrature on the function's own grid.  Homogeneous of
    degree zero in u.
    """
    grid = u.grid
    vals = u.values
    if not np.any(vals != 0.0):
        raise DomainValidationError("quotient of the zero function is undefined")
    r = grid.nodes
    dvals = u.derivative_values()
    a_nodes = family.a_values(r)
    cs = family.params.crit
    num = grid.integrate_volume(dvals**2 + a_nodes * vals**2)
    den = grid.integrate_volume(np.abs(vals) ** cs * r ** (-family.s))
    if not (np.isfinite(num) and np.isfinite(den)) or den <= 0:
        raise QuadratureError(f"quotient integrals not finite: num={num}, den={den}")
    return num / den ** (2.0 / cs)


def quotient_sweep(family: TestFamily, profile: str = "bubble", green=None):
    """Quotient of the test family at every eps, each on an eps-adapted grid.

    Returns (eps_array, J_array).  Derivatives are analytic, so the only
    error source is panel quadrature, which the focused grids keep near
    machine precision.
    """
    Js = np.empty_like(family.eps_list)
    for k, eps in enumerate(family.eps_list):
        grid = RadialGrid.build(family.manifold, num_nodes=family.grid_nodes, focus=eps)
        if profile == "bubble":
            u = RadialFunction(grid, bubble_test_function(family, eps, grid.nodes),
                               bubble_test_function_grad(family, eps, grid.nodes))
        elif profile == "mass":
            if green is None:
                raise DomainValidationError("mass profile sweep needs a Green decomposition")
            u = RadialFunction(grid, mass_test_function(family, green, eps, grid.nodes),
                               mass_test_function_grad(family, green, eps, grid.nodes))
        else:
            raise DomainValidationError(f"unknown profile '{profile}'")
        Js[k] = hardy_sobolev_quotient(family, u)
    return family.eps_list.copy(), Js


@dataclass(frozen=True)
class ExpansionFit:
    """Weighted least-squares fit of K*J - 1 against an eps model.

    model is one of 'eps2' (quadratic with cubic companion), 'eps2log'
    (eps^2 log(1/eps) with plain eps^2 companion) or 'eps1' (linear with
    eps^(3/2) and eps^2 companions; its slope is reported for the -B eps
    form).  slope is the coefficient of the model's leading term; leading
    is the fitted eps -> 0 limit of J itself.  residual is the
    relative-weighted RMS misfit, and alt_residual the same for the
    rejected competing model (when one was tried).
    """

    model: str
    leading: float
    slope: float
    residual: float
    intercept: float
    alt_residual: Optional[float] = None


_FIT_RESIDUAL_THRESHOLD = 0.02


def _wls(M: np.ndarray, y: np.ndarray):
    scale = np.max(np.abs(y))
    wts = 1.0 / np.maximum(np.abs(y), 1e-3 * scale + 1e-300)
    coef, *_ = np.linalg.lstsq(M * wts[:, None], y * wts, rcond=None)
    resid = math.sqrt(float(np.mean(((M @ coef - y) * wts) ** 2)))
    return coef, resid


def fit_curvature_expansion(family: TestFamily) -> ExpansionFit:
    """Fit the quotient correction of the bubble family for n >= 4.

    Both candidate models are fitted and compared by residual: the
    quadratic model A eps^2 (with an eps^3 companion term) and the
    logarithmic model A eps^2 log(1/eps) (with an eps^2 companion).  The
    winner must agree with the dimension rule -- logarithmic exactly in
    dimension 4 -- otherwise the fit is reported as inconclusive.
    """
    n = family.manifold.n
    if n < 4:
        raise DomainValidationError("the curvature expansion fit needs n >= 4")
    eps = family.eps_list
    if math.log10(eps[-1] / eps[0]) < 1.5 - 1e-9:
        raise DomainValidationError("eps ladder must span at least 1.5 decades")
    K = sharp_constant(family.params)
    _, Js = quotient_sweep(family, profile="bubble")
    y = K * Js - 1.0
    ones = np.ones_like(eps)
    M_poly = np.column_stack([ones, eps**2, eps**3])
    M_log = np.column_stack([ones, eps**2 * np.log(1.0 / eps), eps**2])
    c_poly, r_poly = _wls(M_poly, y)
    c_log, r_log = _wls(M_log, y)
    use_log = r_log < r_poly
    if use_log != (n == 4):
        raise FitError(
            "residual comparison contradicts the dimension rule",
            diagnostics={"n": n, "residual_poly": r_poly, "residual_log": r_log},
        )
    coef, resid, alt, model = (
        (c_log, r_log, r_poly, "eps2log") if use_log else (c_poly, r_poly, r_log, "eps2")
    )
    if resid > _FIT_RESIDUAL_THRESHOLD:
        raise FitError(
            f"fit residual {resid:.3e} above threshold {_FIT_RESIDUAL_THRESHOLD}",
            diagnostics={"model": model, "residual": resid, "eps": eps, "y": y},
        )
    return ExpansionFit(model=model, leading=(1.0 + coef[0]) / K, slope=float(coef[1]),
                        residual=resid, intercept=float(coef[0]), alt_residual=alt)


def fit_mass_expansion(family: TestFamily, green) -> ExpansionFit:
    """Fit K*J - 1 = -B eps for the glued family in dimension 3.

    Returns B as the slope (positive when the quotient dips below the
    threshold, i.e. when the mass is positive).  Companion terms in
    eps^(3/2) and eps^2 absorb the next-order corrections.
    """
    if family.manifold.n != 3:
        raise DomainValidationError("the mass expansion fit is specific to dimension 3")
    if not math.isfinite(green.mass):
        raise DomainValidationError("green decomposition carries no finite mass")
    eps = family.eps_list
    if math.log10(eps[-1] / eps[0]) < 1.5 - 1e-9:
        raise DomainValidationError("eps ladder must span at least 1.5 decades")
    K = sharp_constant(family.params)
    _, Js = quotient_sweep(family, profile="mass", green=green)
    y = K * Js - 1.0
    M = np.column_stack([np.ones_like(eps), eps, eps**1.5, eps**2])
    coef, resid = _wls(M, y)
    if resid > _FIT_RESIDUAL_THRESHOLD:
        raise FitError(
            f"fit residual {resid:.3e} above threshold {_FIT_RESIDUAL_THRESHOLD}",
            diagnostics={"model": "eps1", "residual": resid, "eps": eps, "y": y},
        )
    return ExpansionFit(model="eps1", leading=(1.0 + coef[0]) / K, slope=float(-coef[1]),
                        residual=resid, intercept=float(coef[0]))


def curvature_slope_target(family: TestFamily) -> float:
    """Closed-form prediction c1 * (a(pole) - threshold * Scal) for the
    quadratic slope of K*J - 1 when n >= 5."""
    n, s = family.manifold.n, family.s
    if n < 5:
        raise DomainValidationError("the quadratic slope target needs n >= 5")
    ints = bubble_integrals(family.params)
    c1 = ints.l2mass / ints.dirichlet
    thr = curvature_threshold(n, s)
    return c1 * (family.a0 - thr * family.manifold.scalar_curvature)


def log_slope_target(family: TestFamily) -> float:
    """Closed-form prediction of the eps^2 log(1/eps) slope in dimension 4:
    omega_3/dirichlet * (a(pole) - Scal/6)."""
    if family.manifold.n != 4:
        raise DomainValidationError("the logarithmic slope target is specific to dimension 4")
    ints = bubble_integrals(family.params, fields=("dirichlet",))
    return sphere_volume(3) / ints.dirichlet * (
        family.a0 - family.manifold.scalar_curvature / 6.0
    )


def mass_slope_target(family: TestFamily, green) -> float:
    """Slope of -(K*J - 1)/eps implied by the expansion building blocks:
    omega_2 * mass / dirichlet.

    Combining the numerator correction eps*omega_2*mass with the
    denominator correction 2*eps*omega_2*mass under the exponent
    2/crit = 1/(3-s), and using dirichlet = (3-s)*weighted_crit, gives
    exactly this coefficient.
    """
    if family.manifold.n != 3:
        raise DomainValidationError("the mass slope target is specific to dimension 3")
    ints = bubble_integrals(family.params, fields=("dirichlet",))
    return sphere_volume(2) * green.mass / ints.dirichlet
