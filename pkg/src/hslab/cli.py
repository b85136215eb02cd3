"""Command-line front end: every computation as a subcommand with
machine-readable CSV/JSON output.

Numbers are rendered in fixed 17-significant-digit scientific notation in
both CSV and JSON so repeated runs diff cleanly; files are written to a
temporary name and atomically renamed.  Exit codes: 0 success, 1 domain
errors, 2 convergence/fit failures, 64 bad usage.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .bubble import (ALL_FIELDS, BubbleParams, bubble_integrals,
                     bubble_integrals_quadrature, curvature_threshold,
                     expansion_constants, sharp_constant, sharp_constant_gamma_form)
from .errors import (DomainValidationError, FitError, HslabError, OptimizerError,
                     PropertyViolationError, QuadratureError, ResolutionError)
from .geometry import RadialGrid, RoundSphere
from .green import solve_green
from .special import aubin_integral_quadrature
from .subcritical import continuation, existence_verdict
from .testfun import (TestFamily, curvature_slope_target, fit_curvature_expansion,
                      fit_mass_expansion, geometric_eps, log_slope_target,
                      mass_slope_target, quotient_sweep)

USAGE_EXIT = 64

IDENTITY_GRID_N = range(5, 11)
IDENTITY_GRID_S = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]
DIM3_GRID_S = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]


def fmt(x) -> str:
    """Fixed 17-significant-digit scientific rendering of a float."""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return '"%s"' % x
    return "%.16e" % x


def render_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with fmt()-rendered floats and sorted keys."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append('%s  %s: %s' % (pad, json.dumps(str(k)),
                                         render_json(obj[k], indent + 1)))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ["%s  %s" % (pad, render_json(v, indent + 1)) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(float(obj))
    return json.dumps(str(obj))


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hslab-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def emit(args, payload: dict, csv_data=None) -> None:
    payload = dict(payload)
    payload["seed"] = args.seed
    text = render_json(payload) + "\n"
    if args.out_json:
        atomic_write(args.out_json, text)
    else:
        sys.stdout.write(text)
    if csv_data is not None and args.out_csv:
        write_csv(args.out_csv, *csv_data)


def _manifold_from(args) -> RoundSphere:
    return RoundSphere(int(args.n), float(args.radius))


def _potential_from(args):
    a_file = getattr(args, "a_file", None)
    if a_file:
        data = np.loadtxt(a_file, delimiter=",", ndmin=2)
        radii, values = data[:, 0], data[:, 1]
        return lambda r: np.interp(np.asarray(r, dtype=float), radii, values)
    return float(args.a_const)


# ---------------------------------------------------------------- subcommands

def cmd_constants(args):
    params = BubbleParams(int(args.n), float(args.s))
    ints = bubble_integrals(params)
    exp = expansion_constants(params)
    payload = {
        "n": params.n,
        "s": params.s,
        "crit_exponent": params.crit,
        "sharp_constant": sharp_constant(params),
        "sharp_constant_gamma_form": sharp_constant_gamma_form(params),
        "inv_sharp_constant": 1.0 / sharp_constant(params),
        "curvature_threshold": curvature_threshold(params.n, params.s),
        "c1": exp.c1,
        "c2": exp.c2,
        "integrals": {f: getattr(ints, f) for f in ALL_FIELDS
                      if getattr(ints, f) is not None},
        "checks": ["sharp_constant_gamma_form_vs_variational",
                   "curvature_threshold_closed_form"],
    }
    emit(args, payload)
    return 0


def _identity_rows():
    rows = []
    for n in IDENTITY_GRID_N:
        for s in IDENTITY_GRID_S:
            params = BubbleParams(n, s)
            quad = bubble_integrals_quadrature(params)
            closed_b = n * (n - 2.0) * (n + 2.0 - s) / (2.0 * (2.0 * n - 2.0 - s))
            quad_b = quad.moment2_grad / quad.l2mass
            rows.append((n, s, "second_moment_gradient_ratio", closed_b, quad_b,
                         abs(quad_b - closed_b) / abs(closed_b)))
            closed_c = n * (n - 4.0) / (2.0 * (n - 2.0) * (2.0 * n - 2.0 - s))
            quad_c = quad.moment_crit / quad.l2mass
            rows.append((n, s, "weighted_moment_mass_ratio", closed_c, quad_c,
                         abs(quad_c - closed_c) / abs(closed_c)))
            closed_d = (n - 2.0) * (n - s)
            quad_d = quad.dirichlet / quad.weighted_crit
            rows.append((n, s, "dirichlet_to_weighted_ratio", closed_d, quad_d,
                         abs(quad_d - closed_d) / abs(closed_d)))
    for n in (3, 4):
        for s in IDENTITY_GRID_S:
            params = BubbleParams(n, s)
            quad = bubble_integrals_quadrature(params, fields=("dirichlet", "weighted_crit"))
            closed_d = (n - 2.0) * (n - s)
            quad_d = quad.dirichlet / quad.weighted_crit
            rows.append((n, s, "dirichlet_to_weighted_ratio", closed_d, quad_d,
                         abs(quad_d - closed_d) / abs(closed_d)))
    for s in DIM3_GRID_S:
        closed = 1.0 / (3.0 - s)
        quad = aubin_integral_quadrature((5.0 - 2.0 * s) / (2.0 - s), 1.0 / (2.0 - s)) / (2.0 - s)
        rows.append((3, s, "dim3_weighted_profile_norm", closed, quad,
                     abs(quad - closed) / abs(closed)))
    return rows


def cmd_identities(args):
    rows = _identity_rows()
    worst = max(r[5] for r in rows)
    payload = {
        "grid": args.grid,
        "rows": len(rows),
        "max_rel_err": worst,
        "checks": ["second_moment_gradient_ratio", "weighted_moment_mass_ratio",
                   "dirichlet_to_weighted_ratio", "dim3_weighted_profile_norm"],
    }
    emit(args, payload, (("n", "s", "identity", "closed_form", "quadrature", "rel_err"), rows))
    return 0


def cmd_bubble(args):
    params = BubbleParams(int(args.n), float(args.s))
    closed = bubble_integrals(params)
    quad = bubble_integrals_quadrature(params)
    rows = []
    values = {}
    for f in ALL_FIELDS:
        c, q = getattr(closed, f), getattr(quad, f)
        if c is None:
            continue
        rel = abs(c - q) / abs(c)
        rows.append((params.n, params.s, f, c, q, rel))
        values[f] = {"closed_form": c, "quadrature": q, "rel_err": rel}
    payload = {"n": params.n, "s": params.s, "fields": values,
               "max_rel_err": max(v["rel_err"] for v in values.values()),
               "checks": ["closed_form_vs_quadrature"]}
    emit(args, payload, (("n", "s", "field", "closed_form", "quadrature", "rel_err"), rows))
    return 0


def _svg_plot(path, eps, y, fit_label):
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - matplotlib is optional
        raise DomainValidationError("svg output needs the optional matplotlib dependency") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "hslab"
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, np.abs(y), "o-", label=fit_label)
    ax.set_xlabel("eps")
    ax.set_ylabel("|K*J - 1|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_expand(args):
    manifold = _manifold_from(args)
    eps = geometric_eps(args.rho, lo=args.eps_min, hi=args.eps_max,
                        per_decade=args.per_decade)
    family = TestFamily(manifold, float(args.s), _potential_from(args),
                        cutoff_rho=float(args.rho), eps_list=eps,
                        grid_nodes=int(args.grid_n))
    K = sharp_constant(family.params)
    payload = {
        "n": manifold.n, "s": family.s, "radius": manifold.radius,
        "a0": family.a0, "rho": family.cutoff_rho,
        "sharp_constant": K,
        "checks": ["quotient_expansion_fit"],
    }
    if manifold.n >= 4:
        eps_arr, Js = quotient_sweep(family, profile="bubble")
        fit = fit_curvature_expansion(family)
        payload["fit"] = {
            "model": fit.model, "slope": fit.slope, "leading": fit.leading,
            "residual": fit.residual, "intercept": fit.intercept,
            "alt_residual": fit.alt_residual,
        }
        if manifold.n >= 5:
            payload["slope_target"] = curvature_slope_target(family)
        else:
            payload["slope_target"] = log_slope_target(family)
    else:
        green = solve_green(manifold, family.a)
        eps_arr, Js = quotient_sweep(family, profile="mass", green=green)
        fit = fit_mass_expansion(family, green)
        payload["fit"] = {
            "model": fit.model, "slope": fit.slope, "leading": fit.leading,
            "residual": fit.residual, "intercept": fit.intercept,
        }
        payload["mass"] = green.mass
        payload["slope_target"] = mass_slope_target(family, green)
        payload["checks"] = ["mass_expansion_fit"]
    y = K * Js - 1.0
    rows = [(e, J, yy) for e, J, yy in zip(eps_arr, Js, y)]
    if args.svg:
        _svg_plot(args.svg, eps_arr, y, payload["fit"]["model"])
    emit(args, payload, (("eps", "J", "KJ_minus_1"), rows))
    return 0


def cmd_mass(args):
    manifold = RoundSphere(3, float(args.radius))
    green = solve_green(manifold, _potential_from(args))
    payload = {
        "radius": manifold.radius,
        "mass": green.mass,
        "residual": green.ode_residual,
        "coercivity_margin": green.coercivity_margin,
        "checks": ["green_decomposition", "pole_mass_extrapolation"],
    }
    rows = list(zip(green.grid.nodes, green.G.values, green.beta.values))
    emit(args, payload, (("r", "G", "beta"), rows))
    return 0


def cmd_minimize(args):
    manifold = _manifold_from(args)
    grid = RadialGrid.build(manifold, num_nodes=int(args.grid_n), inner_scale=1e-3)
    ladder = None
    if args.q_ladder:
        ladder = [float(tok) for tok in args.q_ladder.split(",") if tok.strip()]
    result = continuation(manifold, float(args.s), _potential_from(args),
                          q_ladder=ladder, grid=grid, max_iters=int(args.max_iters))
    params = BubbleParams(manifold.n, float(args.s))
    final = result.final
    payload = {
        "n": manifold.n, "s": float(args.s), "radius": manifold.radius,
        "q_ladder": list(result.q_ladder),
        "lambda_sequence": [r.lam for r in result.results],
        "residuals": [r.el_residual for r in result.results],
        "iterations": [r.iterations for r in result.results],
        "converged": [r.converged for r in result.results],
        "failed_index": result.failed_index,
        "checks": ["subcritical_ladder", "threshold_verdict"],
    }
    if final.converged:
        verdict = existence_verdict(final, params)
        payload["verdict"] = verdict.verdict
        payload["threshold"] = verdict.threshold
        payload["margin"] = verdict.margin
    rows = list(zip(final.u.grid.nodes, final.u.values))
    emit(args, payload, (("r", "u"), rows))
    if result.failed_index is not None:
        raise OptimizerError(f"ladder stage {result.failed_index} did not converge")
    return 0


# --------------------------------------------------------------------- driver

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _add_common(sp):
    sp.add_argument("--out-json", help="write the JSON payload here (default stdout)")
    sp.add_argument("--out-csv", help="write the CSV table here")
    sp.add_argument("--config", help="JSON file whose entries override flags")
    sp.add_argument("--seed", type=int, default=0,
                    help="seed recorded in outputs and used by any sampled checks")


def build_parser() -> _Parser:
    p = _Parser(prog="hslab", description=__doc__)
    p.add_argument("--version", action="version", version=f"hslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("constants", help="sharp constant and expansion constants")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("identities", help="closed-form vs quadrature identity sweep")
    sp.add_argument("--grid", choices=["default"], default="default")
    _add_common(sp)
    sp.set_defaults(func=cmd_identities)

    sp = sub.add_parser("bubble", help="extremal-profile integrals, both routes")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_bubble)

    sp = sub.add_parser("expand", help="quotient sweep and expansion fit")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--a-const", type=float, default=0.1)
    sp.add_argument("--a-file", help="CSV of radius,potential samples")
    sp.add_argument("--rho", type=float, default=None,
                    help="cutoff radius (default 0.4 * radius)")
    sp.add_argument("--eps-min", type=float, default=1e-4)
    sp.add_argument("--eps-max", type=float, default=1e-2)
    sp.add_argument("--per-decade", type=int, default=12)
    sp.add_argument("--grid-n", "--grid-N", dest="grid_n", type=int, default=512)
    sp.add_argument("--svg", help="optional log-log plot of the sweep")
    _add_common(sp)
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("mass", help="Green decomposition and pole mass (n = 3)")
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--a-const", type=float, default=0.5)
    sp.add_argument("--a-file", help="CSV of radius,potential samples")
    _add_common(sp)
    sp.set_defaults(func=cmd_mass)

    sp = sub.add_parser("minimize", help="subcritical ladder and threshold verdict")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--a-const", type=float, default=0.5)
    sp.add_argument("--a-file", help="CSV of radius,potential samples")
    sp.add_argument("--q-ladder", help="comma-separated exponents; default ladder if omitted")
    sp.add_argument("--grid-n", "--grid-N", dest="grid_n", type=int, default=512)
    sp.add_argument("--max-iters", type=int, default=100000)
    _add_common(sp)
    sp.set_defaults(func=cmd_minimize)
    return p


def _apply_config(args) -> None:
    if not args.config:
        return
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"hslab: bad --config file: {exc}") from exc
    if not isinstance(cfg, dict):
        raise SystemExit("hslab: --config must hold a JSON object")
    manifold = cfg.pop("manifold", None)
    if manifold:
        if manifold.get("kind", "sphere") != "sphere":
            sys.stderr.write("hslab: only sphere manifolds are supported\n")
            raise SystemExit(USAGE_EXIT)
        if "n" in manifold and hasattr(args, "n"):
            args.n = int(manifold["n"])
        if "radius" in manifold and hasattr(args, "radius"):
            args.radius = float(manifold["radius"])
    grid = cfg.pop("grid", None)
    if grid and "N" in grid and hasattr(args, "grid_n"):
        args.grid_n = int(grid["N"])
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            sys.stderr.write(f"hslab: unknown config key '{key}'\n")
            raise SystemExit(USAGE_EXIT)
        setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get("HSLAB_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            sys.stderr.write("hslab: HSLAB_THREADS must be a positive integer\n")
            return USAGE_EXIT
    _apply_config(args)
    if getattr(args, "rho", "missing") is None:
        args.rho = 0.4 * float(args.radius)
    try:
        return args.func(args)
    except DomainValidationError as exc:
        sys.stderr.write(f"hslab: {exc}\n")
        return 1
    except (ResolutionError, FitError, OptimizerError, QuadratureError,
            PropertyViolationError) as exc:
        sys.stderr.write(f"hslab: {exc}\n")
        return 2
    except HslabError as exc:  # pragma: no cover - catch-all for new subtypes
        sys.stderr.write(f"hslab: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
