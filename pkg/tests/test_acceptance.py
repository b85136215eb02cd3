"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with `pytest -s` to see every line).

Criterion 7c asserts the documented target constant for the
three-dimensional mass slope.  The directly measured expansion follows
the internally consistent constant omega_2*mass/dirichlet instead, which
differs from the documented 2*omega_2*mass/weighted_crit by the factor
2(3-s); the test is kept faithful to its stated target and is expected
to fail, documenting the discrepancy.  The measured constant itself is
validated in tests/test_testfun.py.
"""

import math
import time

import numpy as np

from hslab.bubble import (BubbleParams, bubble_integrals, bubble_pde_residual,
                          curvature_threshold, sharp_constant,
                          sharp_constant_gamma_form)
from hslab.cli import _identity_rows, main as cli_main
from hslab.geometry import RoundSphere
from hslab.green import solve_green
from hslab.special import sphere_volume, verify_aubin_recurrences
from hslab.subcritical import (SubcriticalProblem, continuation, quotient_gradient,
                               quotient_value)
from hslab.testfun import (TestFamily, curvature_slope_target, fit_curvature_expansion,
                           fit_mass_expansion, geometric_eps, quotient_sweep)

S_GRID = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]
S_GRID_POS = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]

_cache = {}


def check(ok, line):
    print(f"[{'PASS' if ok else 'FAIL'}] {line}")
    assert ok, line


def test_criterion_01_integral_identity_suite():
    start = time.monotonic()
    rows = _identity_rows()
    worst = max(r[5] for r in rows)
    elapsed = time.monotonic() - start
    check(worst <= 1e-8 and elapsed <= 30.0,
          f"criterion 1: identity suite ({len(rows)} rows) worst rel err "
          f"{worst:.2e} <= 1e-8 in {elapsed:.1f}s <= 30s")


def test_criterion_02_recurrence_suite():
    start = time.monotonic()
    report = verify_aubin_recurrences(np.arange(2.0, 10.5, 0.5),
                                      np.arange(0.0, 9.0, 0.5))
    elapsed = time.monotonic() - start
    check(report.max_violation <= 1e-10 and elapsed <= 5.0,
          f"criterion 2: both recurrences over {report.checked} pairs, worst "
          f"violation {report.max_violation:.2e} <= 1e-10 in {elapsed:.1f}s <= 5s")


def test_criterion_03_sharp_constant():
    worst_classical = 0.0
    for n in range(3, 7):
        k = sharp_constant(BubbleParams(n, 0.0))
        ref = 4.0 / (n * (n - 2.0)) * sphere_volume(n) ** (-2.0 / n)
        worst_classical = max(worst_classical, abs(k - ref) / ref)
    worst_gamma = 0.0
    for n in range(3, 11):
        for s in S_GRID_POS:
            kv = sharp_constant(BubbleParams(n, s))
            kg = sharp_constant_gamma_form(BubbleParams(n, s))
            worst_gamma = max(worst_gamma, abs(kv - kg) / kv)
    check(worst_classical <= 1e-8 and worst_gamma <= 1e-8,
          f"criterion 3: classical unweighted values to {worst_classical:.2e}, "
          f"gamma form vs variational to {worst_gamma:.2e} (both <= 1e-8)")


def test_criterion_04_bubble_pde_residual():
    grid = np.geomspace(1e-3, 1e3, 121)
    worst = 0.0
    for n in range(3, 11):
        for s in S_GRID:
            worst = max(worst, bubble_pde_residual(BubbleParams(n, s), grid))
    check(worst <= 1e-9,
          f"criterion 4: radial equation residual of the extremal profile "
          f"{worst:.2e} <= 1e-9 on the log grid")


def test_criterion_05_curvature_threshold_recovery():
    start = time.monotonic()
    m = RoundSphere(5, 1.0)
    fam = TestFamily(m, 1.0, 0.1, cutoff_rho=0.4)
    fit = fit_curvature_expansion(fam)
    target = curvature_slope_target(fam)
    ok_slope = abs(fit.slope - target) <= 0.02 * abs(target)
    a_eq = curvature_threshold(5, 1.0) * m.scalar_curvature
    fit0 = fit_curvature_expansion(TestFamily(m, 1.0, a_eq, cutoff_rho=0.4))
    ok_null = abs(fit0.slope) <= 0.10 * abs(target)
    elapsed = time.monotonic() - start
    check(ok_slope and ok_null and elapsed <= 120.0,
          f"criterion 5: fitted quadratic slope {fit.slope:.4f} vs target "
          f"{target:.4f} (2%), threshold-potential slope {fit0.slope:.2e} "
          f"<= 10% of reference, in {elapsed:.1f}s <= 120s")


def test_criterion_06_dimension_four_log_channel():
    fam = TestFamily(RoundSphere(4, 1.0), 0.5, 0.1, cutoff_rho=0.4)
    fit = fit_curvature_expansion(fam)
    ratio = fit.alt_residual / fit.residual
    sign_target = math.copysign(1.0, 0.1 - RoundSphere(4, 1.0).scalar_curvature / 6.0)
    ok = fit.model == "eps2log" and ratio >= 2.0 \
        and math.copysign(1.0, fit.slope) == sign_target
    check(ok, f"criterion 6: log model wins with residual ratio {ratio:.0f} >= 2 "
              f"and slope sign {math.copysign(1.0, fit.slope):+.0f} matches "
              f"potential-minus-curvature sign {sign_target:+.0f}")


def _mass_pipeline():
    if "mass" not in _cache:
        start = time.monotonic()
        m = RoundSphere(3, 1.0)
        decs = {a: solve_green(m, a) for a in (0.1, 0.25, 0.5, 0.74)}
        fam = TestFamily(m, 1.0, 0.5, cutoff_rho=0.4)
        fit = fit_mass_expansion(fam, decs[0.5])
        _cache["mass"] = (decs, fit, time.monotonic() - start)
    return _cache["mass"]


def test_criterion_07a_mass_vanishes_at_critical_potential():
    m = RoundSphere(3, 1.0)
    dec = solve_green(m, 0.75)
    check(abs(dec.mass) <= 1e-3,
          f"criterion 7a: mass at potential 3/4 is {dec.mass:.2e}, within 1e-3 of 0")


def test_criterion_07b_mass_monotone():
    decs, _, _ = _mass_pipeline()
    masses = [decs[a].mass for a in (0.1, 0.25, 0.5, 0.74)]
    ok = all(x > y for x, y in zip(masses, masses[1:]))
    check(ok, "criterion 7b: mass strictly decreasing over potentials "
              "{0.1, 0.25, 0.5, 0.74}: " + ", ".join(f"{x:.4f}" for x in masses))


def test_criterion_07c_mass_slope_stated_target():
    decs, fit, elapsed = _mass_pipeline()
    ints = bubble_integrals(BubbleParams(3, 1.0))
    stated = 2.0 * sphere_volume(2) * decs[0.5].mass / ints.weighted_crit
    measured_target = sphere_volume(2) * decs[0.5].mass / ints.dirichlet
    ok = abs(fit.slope - stated) <= 0.05 * abs(stated) and elapsed <= 120.0
    check(ok, f"criterion 7c: fitted slope {fit.slope:.4f} vs stated target "
              f"{stated:.4f} within 5% (measured expansion follows "
              f"{measured_target:.4f} = stated/(2*(3-s)); pipeline {elapsed:.1f}s)")


def _ladders():
    if "ladders" not in _cache:
        start = time.monotonic()
        out = {}
        for (n, s, a) in [(5, 1.0, 0.1), (3, 1.0, 0.5)]:
            out[n] = (continuation(RoundSphere(n, 1.0), s, a), s, a)
        _cache["ladders"] = (out, time.monotonic() - start)
    return _cache["ladders"]


def test_criterion_08_subcritical_solver():
    ladders, elapsed = _ladders()
    lines = []
    ok = elapsed <= 300.0
    for n, (cont, s, a) in ladders.items():
        K = sharp_constant(BubbleParams(n, s))
        final = cont.final
        fam = TestFamily(RoundSphere(n, 1.0), s, a, cutoff_rho=0.4,
                         eps_list=geometric_eps(0.4, lo=1e-2, hi=1e-1, per_decade=6))
        _, Js = quotient_sweep(fam, profile="bubble")
        grid_ok = (cont.tail_is_cauchy()
                   and final.converged
                   and final.lam < 1.0 / K
                   and final.el_residual <= 1e-8
                   and np.all(final.u.values >= 0.0)
                   and abs(cont.results[-1].lam - quotient_value(
                       SubcriticalProblem(RoundSphere(n, 1.0), s, a,
                                          cont.q_ladder[-1], final.u.grid),
                       final.u.values)) <= 1e-9 * final.lam
                   and final.lam <= np.min(Js) + 1e-6)
        ok = ok and grid_ok
        lines.append(f"S^{n}: lam={final.lam:.6f} < 1/K={1.0 / K:.6f}, "
                     f"residual {final.el_residual:.1e}")
    check(ok, "criterion 8: " + "; ".join(lines) + f"; total {elapsed:.1f}s <= 300s")


def test_criterion_09_gradient_correctness():
    ladders, _ = _ladders()
    rng = np.random.RandomState(42)
    worst = 0.0
    instances = 0
    for n, (cont, s, a) in ladders.items():
        m = RoundSphere(n, 1.0)
        for q, result in zip(cont.q_ladder, cont.results):
            prob = SubcriticalProblem(m, s, a, q, result.u.grid)
            base = prob.normalized(0.5 * (result.u.values + np.max(result.u.values)))
            grad = quotient_gradient(prob, base)
            f = prob.forms
            grad_c = q * f.lumped_singular * np.abs(base) ** (q - 2.0) * base
            x = prob.grid.nodes / m.max_radius
            delta = 1e-5
            for _ in range(10):
                smooth = sum(c * np.sin((k + 1) * np.pi * x)
                             for k, c in enumerate(rng.uniform(-1, 1, 6)))
                h = smooth - (np.dot(smooth, grad_c) / np.dot(grad_c, grad_c)) * grad_c
                h /= np.max(np.abs(h))
                J = lambda v: quotient_value(prob, v)
                fd = (-J(base + 2 * delta * h) + 8.0 * J(base + delta * h)
                      - 8.0 * J(base - delta * h) + J(base - 2 * delta * h)) / (12.0 * delta)
                scale = max(abs(fd), float(np.linalg.norm(grad) * np.linalg.norm(h)))
                worst = max(worst, abs(float(np.dot(grad, h)) - fd) / scale)
            instances += 1
    check(worst <= 1e-5,
          f"criterion 9: constrained gradient vs finite differences, worst rel "
          f"dev {worst:.2e} <= 1e-5 over {instances} problems x 10 directions")


def test_criterion_10_cli_determinism(tmp_path):
    outputs = []
    for tag in ("a", "b"):
        j1 = tmp_path / f"c{tag}.json"
        j2 = tmp_path / f"e{tag}.json"
        c2 = tmp_path / f"e{tag}.csv"
        assert cli_main(["constants", "--n", "5", "--s", "1", "--seed", "3",
                         "--out-json", str(j1)]) == 0
        assert cli_main(["expand", "--n", "4", "--s", "0.5", "--a-const", "0.1",
                         "--seed", "3", "--out-json", str(j2),
                         "--out-csv", str(c2)]) == 0
        outputs.append((j1.read_bytes(), j2.read_bytes(), c2.read_bytes()))
    check(outputs[0] == outputs[1],
          "criterion 10: repeated CLI runs with a fixed seed are byte-identical")
