"""Numerical laboratory for the weighted (Hardy-Sobolev) critical problem
on round spheres: sharp constants, extremal-profile integral identities,
concentration expansions, Green-function mass, and the subcritical
minimization ladder."""

from .bubble import (BubbleIntegrals, BubbleParams, ExpansionConstants,
                     bubble_integrals, bubble_integrals_quadrature,
                     bubble_pde_residual, bubble_profile, bubble_profile_grad,
                     curvature_threshold, expansion_constants, sharp_constant,
                     sharp_constant_gamma_form)
from .geometry import (CartanReport, ModelManifold, RadialFunction, RadialGrid,
                       RoundSphere, cartan_check, radial_laplacian, volume_element)
from .green import GreenDecomposition, MassComparison, mass_comparison, solve_green
from .special import (AubinIntegralParams, RecurrenceReport, aubin_integral,
                      aubin_integral_quadrature, gamma, sphere_volume,
                      verify_aubin_recurrences)
from .subcritical import (ContinuationResult, MinimizerResult, SubcriticalProblem,
                          VerdictReport, continuation, default_q_ladder, el_residual,
                          existence_verdict, minimize_Jq, quotient_gradient,
                          quotient_value, weighted_fundamental_eigenvalue)
from .testfun import (Cutoff, ExpansionFit, TestFamily, bubble_test_function,
                      bubble_test_function_grad, curvature_slope_target,
                      fit_curvature_expansion, fit_mass_expansion, geometric_eps,
                      hardy_sobolev_quotient, log_slope_target, mass_slope_target,
                      mass_test_function, mass_test_function_grad, quotient_sweep)

__version__ = "0.1.0"

__all__ = [
    "AubinIntegralParams", "BubbleIntegrals", "BubbleParams", "CartanReport",
    "ContinuationResult", "Cutoff", "ExpansionConstants", "ExpansionFit",
    "GreenDecomposition", "MassComparison", "MinimizerResult", "ModelManifold",
    "RadialFunction", "RadialGrid", "RecurrenceReport", "RoundSphere",
    "SubcriticalProblem", "TestFamily", "VerdictReport", "aubin_integral",
    "aubin_integral_quadrature", "bubble_integrals", "bubble_integrals_quadrature",
    "bubble_pde_residual", "bubble_profile", "bubble_profile_grad",
    "bubble_test_function", "bubble_test_function_grad", "cartan_check",
    "continuation", "curvature_slope_target", "curvature_threshold",
    "default_q_ladder", "el_residual", "existence_verdict", "expansion_constants",
    "fit_curvature_expansion", "fit_mass_expansion", "gamma", "geometric_eps",
    "hardy_sobolev_quotient", "log_slope_target", "mass_comparison",
    "mass_slope_target", "mass_test_function", "mass_test_function_grad",
    "minimize_Jq", "quotient_gradient", "quotient_sweep", "quotient_value",
    "radial_laplacian", "sharp_constant", "sharp_constant_gamma_form",
    "solve_green", "sphere_volume", "verify_aubin_recurrences", "volume_element",
    "weighted_fundamental_eigenvalue",
]
