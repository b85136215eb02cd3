"""Round spheres as model geometry, clustered radial quadrature grids,
and discrete radial operators.

Everything is rotationally symmetric about a fixed pole, so a function is
a vector of samples along geodesic radius r in (0, pi R).  Grids are
composite Gauss-Legendre panels: geometrically refined toward the pole
(to resolve d^-s weights and concentrating profiles), uniform through the
middle, and refined again toward the antipode.  The poles themselves are
never nodes.

Differentiation uses sliding finite-difference stencils with the nodes
mirrored evenly across both poles, which is exact for regular radial
functions (zero odd part at either pole) and avoids one-sided boundary
stencils entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import numpy.polynomial.legendre as npleg

from .errors import (DomainValidationError, FitRangeError, QuadratureError,
                     ResolutionError)
from .special import sphere_volume

MIN_GRID_NODES = 64


@dataclass(frozen=True)
class RoundSphere:
    """Sphere of dimension n >= 3 and radius > 0; the only shipped model.

    Geodesic distance from the pole is the radial coordinate itself, the
    scalar curvature is constant, and the volume element of the geodesic
    sphere of radius r is closed-form, so every geometric quantity used
    by the solvers is exact.
    """

    n: int
    radius: float = 1.0
    kind: str = field(default="sphere", init=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainValidationError(f"sphere dimension must be integer >= 3, got {self.n}")
        if not self.radius > 0:
            raise DomainValidationError(f"sphere radius must be positive, got {self.radius}")

    @property
    def scalar_curvature(self) -> float:
        return self.n * (self.n - 1.0) / self.radius**2

    @property
    def injectivity_radius(self) -> float:
        return math.pi * self.radius

    @property
    def max_radius(self) -> float:
        return math.pi * self.radius

    @property
    def volume(self) -> float:
        return sphere_volume(self.n) * self.radius**self.n

    def volume_element(self, r):
        """(n-1)-area of the geodesic sphere of radius r in (0, pi R)."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r >= self.max_radius):
            raise DomainValidationError("volume_element needs 0 < r < pi * radius")
        out = sphere_volume(self.n - 1) * self.radius ** (self.n - 1) * np.sin(r / self.radius) ** (self.n - 1)
        return out if out.ndim else float(out)

    def metric_sqrt_det(self, r):
        """sqrt(det g) in geodesic normal coordinates: (sin(r/R)/(r/R))^(n-1)."""
        x = np.asarray(r, dtype=float) / self.radius
        out = (np.sin(x) / x) ** (self.n - 1)
        return out if out.ndim else float(out)


# the model-manifold type is the round sphere
ModelManifold = RoundSphere


def volume_element(manifold: RoundSphere, r):
    return manifold.volume_element(r)


@lru_cache(maxsize=32)
def _gl_rule(points: int):
    return npleg.leggauss(points)


def _panel_breaks(inner: float, antipode: float, n_in: int, n_mid: int, n_out: int):
    """Panel breakpoints on (0, pi) in angle units."""
    left = np.geomspace(inner, 0.5, n_in + 1)
    mid = np.linspace(0.5, math.pi - 0.5, n_mid + 1)
    right = math.pi - np.geomspace(antipode, 0.5, n_out + 1)[::-1]
    return np.concatenate([left, mid[1:], right[1:]])


@dataclass(frozen=True)
class RadialGrid:
    """Radial quadrature nodes and positive weights on (0, pi R).

    covered_lo/covered_hi record the exact interval the panel weights
    integrate; the end gaps to the poles are handled by extrapolation in
    integrate_volume.
    """

    manifold: RoundSphere
    nodes: np.ndarray
    weights: np.ndarray
    covered_lo: Optional[float] = None
    covered_hi: Optional[float] = None

    def __post_init__(self):
        if self.nodes.size < MIN_GRID_NODES:
            raise ResolutionError(
                f"grid needs at least {MIN_GRID_NODES} nodes, got {self.nodes.size}"
            )
        if np.any(np.diff(self.nodes) <= 0):
            raise DomainValidationError("grid nodes must be strictly increasing")
        if self.nodes[0] <= 0 or self.nodes[-1] >= self.manifold.max_radius:
            raise DomainValidationError("grid nodes must exclude both poles")
        if np.any(self.weights <= 0):
            raise DomainValidationError("quadrature weights must be positive")
        if self.covered_lo is None:
            object.__setattr__(self, "covered_lo", float(self.nodes[0]))
        if self.covered_hi is None:
            object.__setattr__(self, "covered_hi", float(self.nodes[-1]))

    @classmethod
    def build(cls, manifold: RoundSphere, num_nodes: int = 512,
              inner_scale: float = 1e-2, antipode_scale: float = 1e-2,
              focus: Optional[float] = None) -> "RadialGrid":
        """Composite Gauss-Legendre grid with clustering at both poles.

        inner_scale / antipode_scale are the innermost panel boundaries
        in angle units.  The default keeps finite-difference stencils on
        the grid well away from roundoff; quadrature of a profile that
        concentrates at scale r0 should pass focus=r0, which deepens the
        geometric clustering to three decades below r0 (such grids are
        for quadrature with analytic derivatives, not for stencils).
        """
        if num_nodes < MIN_GRID_NODES:
            raise ResolutionError(f"grid needs at least {MIN_GRID_NODES} nodes")
        inner = float(inner_scale)
        if focus is not None:
            theta = float(focus) / manifold.radius
            if not theta > 0:
                raise DomainValidationError("focus must be a positive radius")
            inner = min(inner, max(theta * 1e-3, 1e-12))
        points = 12
        n_panels = max(8, num_nodes // points)
        n_in = max(4, int(round(0.45 * n_panels)))
        n_mid = max(3, int(round(0.35 * n_panels)))
        n_out = max(2, n_panels - n_in - n_mid)
        n_panels = n_in + n_mid + n_out
        breaks = _panel_breaks(inner, antipode_scale, n_in, n_mid, n_out)
        base, extra = divmod(num_nodes, n_panels)
        nodes, weights = [], []
        for k, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
            p = base + (1 if k < extra else 0)
            xg, wg = _gl_rule(p)
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            nodes.append(mid + half * xg)
            weights.append(half * wg)
        r = np.concatenate(nodes) * manifold.radius
        w = np.concatenate(weights) * manifold.radius
        return cls(manifold=manifold, nodes=r, weights=w,
                   covered_lo=float(breaks[0]) * manifold.radius,
                   covered_hi=float(breaks[-1]) * manifold.radius)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values) -> float:
        """Plain 1-D integral of nodal samples over (0, pi R)."""
        return float(np.dot(self.weights, np.asarray(values)))

    @staticmethod
    def _end_cap(f0: float, f1: float, h0: float, h1: float, gap: float) -> float:
        """Integral over the uncovered end gap [0, gap] of the integrand
        extrapolated by the local power law fitted to the two samples
        nearest the end (f0 at distance h0, f1 at h1 > h0)."""
        if f0 == 0.0 or gap <= 0.0:
            return 0.0
        if f1 * f0 > 0.0:
            gam = math.log(f1 / f0) / math.log(h1 / h0)
            if gam <= -0.9:
                raise QuadratureError(
                    f"integrand grows like distance^{gam:.2f} at an uncovered pole"
                )
            return f0 * gap / (gam + 1.0) * (gap / h0) ** gam
        return f0 * gap

    def integrate_volume(self, values) -> float:
        """Integral against the Riemannian volume: int f dv for radial f.

        The panel weights cover [covered_lo, covered_hi]; the remaining
        caps at both poles are added back by power-law extrapolation from
        the two samples nearest each pole.
        """
        f = np.asarray(values) * self.manifold.volume_element(self.nodes)
        core = float(np.dot(self.weights, f))
        r = self.nodes
        L = self.manifold.max_radius
        pole = self._end_cap(float(f[0]), float(f[1]), float(r[0]), float(r[1]),
                             self.covered_lo)
        anti = self._end_cap(float(f[-1]), float(f[-2]), float(L - r[-1]),
                             float(L - r[-2]), L - self.covered_hi)
        return core + pole + anti

    def diff_matrix(self, order: int = 1, stencil: int = 7) -> np.ndarray:
        return _folded_diff_matrix(self, order, stencil)


@dataclass
class RadialFunction:
    """Samples of a rotationally symmetric function on a radial grid.

    The derivative samples are optional; when absent they are produced by
    the grid's folded differentiation matrix.
    """

    grid: RadialGrid
    values: np.ndarray
    derivative: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise DomainValidationError("values must match the grid node count")
        if self.derivative is not None:
            self.derivative = np.asarray(self.derivative, dtype=float)
            if self.derivative.shape != self.grid.nodes.shape:
                raise DomainValidationError("derivative must match the grid node count")

    @classmethod
    def from_callable(cls, grid: RadialGrid, f: Callable, df: Optional[Callable] = None):
        vals = np.asarray(f(grid.nodes), dtype=float)
        der = None if df is None else np.asarray(df(grid.nodes), dtype=float)
        return cls(grid=grid, values=vals, derivative=der)

    def derivative_values(self) -> np.ndarray:
        if self.derivative is not None:
            return self.derivative
        return self.grid.diff_matrix(1) @ self.values


def fornberg_weights(z: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at point z for nodes x, all derivative
    orders 0..order; classic recursive algorithm, exact for polynomials
    of degree len(x)-1."""
    x = np.asarray(x, dtype=float)
    nn = x.size
    c = np.zeros((nn, order + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, nn):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _folded_diff_matrix(grid: RadialGrid, order: int, stencil: int) -> np.ndarray:
    """Differentiation matrix with even reflection across r = 0 and r = pi R."""
    r = grid.nodes
    L = grid.manifold.max_radius
    N = r.size
    half = stencil // 2
    D = np.zeros((N, N))
    for i in range(N):
        cols = np.arange(i - half, i - half + stencil)
        pos = np.empty(stencil)
        src = np.empty(stencil, dtype=int)
        for k, j in enumerate(cols):
            if j < 0:
                pos[k] = -r[-j - 1]
                src[k] = -j - 1
            elif j >= N:
                pos[k] = 2.0 * L - r[2 * N - 1 - j]
                src[k] = 2 * N - 1 - j
            else:
                pos[k] = r[j]
                src[k] = j
        wts = fornberg_weights(r[i], pos, order)[:, order]
        for k in range(stencil):
            D[i, src[k]] += wts[k]
    return D


def radial_laplacian(manifold: RoundSphere, u: RadialFunction) -> RadialFunction:
    """Positive Laplacian -u'' - (n-1) cot(r/R)/R u' by high-order
    folded finite differences on the function's grid."""
    grid = u.grid
    if grid.manifold != manifold:
        raise DomainValidationError("function grid belongs to a different manifold")
    if grid.size < MIN_GRID_NODES:
        raise ResolutionError("grid too coarse for the discrete Laplacian")
    r = grid.nodes
    R = manifold.radius
    d1 = grid.diff_matrix(1) @ u.values
    d2 = grid.diff_matrix(2) @ u.values
    vals = -d2 - (manifold.n - 1) / (R * np.tan(r / R)) * d1
    return RadialFunction(grid=grid, values=vals)


@dataclass(frozen=True)
class CartanReport:
    """Least-squares recovery of the metric-determinant curvature coefficient."""

    fitted: float
    target: float
    rel_deviation: float
    fit_residual: float


def cartan_check(manifold: RoundSphere, r_max: float, num_samples: int = 200,
                 residual_threshold: float = 0.01) -> CartanReport:
    """Fit sqrt(det g) = 1 - c r^2 near the pole and compare the fitted c
    with Scal/(6n).

    The sample window must satisfy r_max <= 0.1 radius; within it the
    quartic remainder biases the single-term fit at or below the 1e-3
    relative level.
    """
    R = manifold.radius
    if not (0 < r_max <= 0.1 * R):
        raise DomainValidationError(f"fit window must lie in (0, 0.1*radius], got {r_max}")
    r = np.geomspace(r_max / 50.0, r_max, num_samples)
    y = 1.0 - manifold.metric_sqrt_det(r)
    c = float(np.dot(y, r**2) / np.dot(r**2, r**2))
    resid = float(np.max(np.abs(y - c * r**2)) / (abs(c) * r_max**2))
    if resid > residual_threshold:
        raise FitRangeError(
            f"quadratic fit residual {resid:.2e} exceeds {residual_threshold}; shrink r_max",
            diagnostics={"residual": resid, "r_max": r_max},
        )
    target = manifold.scalar_curvature / (6.0 * manifold.n)
    return CartanReport(fitted=c, target=target,
                        rel_deviation=abs(c - target) / target, fit_residual=resid)


@dataclass(frozen=True)
class P1Forms:
    """Piecewise-linear (hat-function) forms on a radial grid.

    stiff_main/stiff_off hold the symmetric tridiagonal matrix of
    int (u'v' + a u v) dv; lumped_volume[i] = int phi_i dv and
    lumped_singular[i] = int phi_i d^-s dv are the hat-function loads.
    u is extended with zero slope onto the two pole half-cells, so no
    boundary conditions are imposed and the pole weight integrals are
    kept exactly.
    """

    grid: RadialGrid
    stiff_main: np.ndarray
    stiff_off: np.ndarray
    lumped_volume: np.ndarray
    lumped_singular: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.stiff_main * u
        out[:-1] += self.stiff_off * u[1:]
        out[1:] += self.stiff_off * u[:-1]
        return out

    def energy(self, u: np.ndarray) -> float:
        return float(u @ self.apply(u))


def p1_forms(manifold: RoundSphere, grid: RadialGrid, a_fn: Callable,
             s: float = 0.0, cell_points: int = 16) -> P1Forms:
    """Assemble P1 stiffness and lumped weights with per-cell Gauss
    quadrature of the volume element and of the d^-s weight."""
    r = grid.nodes
    N = r.size
    edges = np.concatenate([[0.0], r, [manifold.max_radius]])
    xg, wg = _gl_rule(cell_points)
    vol_cell = np.empty(N + 1)
    sing_cell = np.empty(N + 1)
    for c in range(N + 1):
        a, b = edges[c], edges[c + 1]
        mid, halfw = 0.5 * (a + b), 0.5 * (b - a)
        x = mid + halfw * xg
        v = manifold.volume_element(x)
        vol_cell[c] = np.dot(halfw * wg, v)
        sing_cell[c] = np.dot(halfw * wg, v * x ** (-s)) if s != 0.0 else vol_cell[c]
    main = np.zeros(N)
    off = np.zeros(N - 1)
    for c in range(1, N):
        k = vol_cell[c] / (r[c] - r[c - 1]) ** 2
        main[c - 1] += k
        main[c] += k
        off[c - 1] -= k
    wv = np.zeros(N)
    ws = np.zeros(N)
    wv[0] += vol_cell[0]
    ws[0] += sing_cell[0]
    wv[-1] += vol_cell[N]
    ws[-1] += sing_cell[N]
    wv[:-1] += 0.5 * vol_cell[1:N]
    wv[1:] += 0.5 * vol_cell[1:N]
    ws[:-1] += 0.5 * sing_cell[1:N]
    ws[1:] += 0.5 * sing_cell[1:N]
    main = main + wv * np.asarray(a_fn(r), dtype=float)
    return P1Forms(grid=grid, stiff_main=main, stiff_off=off,
                   lumped_volume=wv, lumped_singular=ws)


def rayleigh_lower_bound(manifold: RoundSphere, grid: RadialGrid, a_fn: Callable,
                         max_iters: int = 500, rtol: float = 1e-12) -> float:
    """Smallest Rayleigh quotient of (Laplacian + a) over the grid, i.e.
    the smallest eigenvalue of the P1 pencil (stiffness, lumped mass).

    Uses inverse power iteration through a banded Cholesky factor; a
    failed factorization already certifies a nonpositive direction and
    reports -inf.  Dense tridiagonal eigensolvers are avoided because
    their absolute error scales with the (enormous) stiffness norm on
    strongly graded grids.
    """
    from scipy.linalg import cho_solve_banded, cholesky_banded

    forms = p1_forms(manifold, grid, a_fn, s=0.0)
    ab = np.zeros((2, forms.stiff_main.size))
    ab[0, 1:] = forms.stiff_off
    ab[1, :] = forms.stiff_main
    try:
        cb = cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        return -math.inf
    M = forms.lumped_volume
    x = np.ones_like(M)
    x /= math.sqrt(float(x @ (M * x)))
    lam = float(x @ forms.apply(x))
    for _ in range(max_iters):
        y = cho_solve_banded((cb, False), M * x)
        y /= math.sqrt(float(y @ (M * y)))
        lam_new = float(y @ forms.apply(y))
        x = y
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam
