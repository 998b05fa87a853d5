"""Discrete convex domains on structured grids.

A domain is given implicitly as Omega = {level < 0}.  Grid nodes are
classified as interior (level < 0), boundary (outside, but adjacent to an
interior node in the 8-neighborhood sense) or exterior.  Diagonal adjacency
counts so that every value the 9-point interior Hessian stencil reads is
carried by an interior or boundary node.  Every boundary node x0 carries an extrapolation
stencil along the inner normal (or an oblique direction beta): a foot point
y0 = x0 + tau0 * direction whose bilinear cell has four interior corners,
plus the interpolation weights.  The flow's boundary update writes
u(x0) = u(y0) + increment, which enforces the prescribed directional
derivative of the initial value.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from gcflow.errors import (
    DegenerateGradient,
    DomainTooThin,
    ObliquenessViolated,
)

EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2

# tau0 search: quarter-cell increments, up to 3 cells.
TAU_STEPS = 12

_POLY_TERMS = {
    "const": (lambda x, y: np.ones_like(x), lambda x, y: 0.0 * x, lambda x, y: 0.0 * x),
    "x": (lambda x, y: x, lambda x, y: np.ones_like(x), lambda x, y: 0.0 * x),
    "y": (lambda x, y: y, lambda x, y: 0.0 * x, lambda x, y: np.ones_like(x)),
    "x2": (lambda x, y: x * x, lambda x, y: 2.0 * x, lambda x, y: 0.0 * x),
    "xy": (lambda x, y: x * y, lambda x, y: y, lambda x, y: x),
    "y2": (lambda x, y: y * y, lambda x, y: 0.0 * x, lambda x, y: 2.0 * y),
    "x4": (lambda x, y: x ** 4, lambda x, y: 4.0 * x ** 3, lambda x, y: 0.0 * x),
    "x2y2": (lambda x, y: x * x * y * y, lambda x, y: 2.0 * x * y * y, lambda x, y: 2.0 * x * x * y),
    "y4": (lambda x, y: y ** 4, lambda x, y: 0.0 * x, lambda x, y: 4.0 * y ** 3),
}


def poly2d(coeffs):
    """Build (f, fx, fy) for a polynomial sum(c_m * monomial_m).

    Supported monomials: const, x, y, x2, xy, y2, x4, x2y2, y4.
    """
    bad = set(coeffs) - set(_POLY_TERMS)
    if bad:
        raise ValueError(f"unsupported polynomial terms: {sorted(bad)}")
    items = [(float(c), _POLY_TERMS[m]) for m, c in coeffs.items()]

    def f(x, y):
        return sum(c * t[0](x, y) for c, t in items)

    def fx(x, y):
        return sum(c * t[1](x, y) for c, t in items)

    def fy(x, y):
        return sum(c * t[2](x, y) for c, t in items)

    return f, fx, fy


@dataclass(frozen=True)
class DomainSpec:
    """Implicit strictly convex planar domain with a boundary direction field.

    level(x, y) < 0 defines Omega; grad_level returns the analytic gradient.
    In oblique mode, `beta` supplies a direction field (normalized at
    evaluation) that must satisfy <beta, nu> >= obliqueness_floor at every
    boundary node.
    """

    level: Callable
    grad_level: Callable
    direction_mode: str = "normal"  # normal | oblique
    beta: Optional[Callable] = None
    obliqueness_floor: float = 0.5

    def __post_init__(self):
        if self.direction_mode not in ("normal", "oblique"):
            raise ValueError(f"unknown direction_mode {self.direction_mode!r}")
        if self.direction_mode == "oblique" and self.beta is None:
            raise ValueError("oblique mode requires a beta field")

    @classmethod
    def ellipse(cls, q=1.1, a=1.0, b=4.0, **kw):
        """Omega = {q*(a*x^2 + b*y^2) < 1}."""

        def level(x, y):
            return q * (a * x * x + b * y * y) - 1.0

        def grad(x, y):
            return 2.0 * q * a * x, 2.0 * q * b * y

        return cls(level, grad, **kw)

    @classmethod
    def disk(cls, radius=0.5, **kw):
        """Omega = {x^2 + y^2 < radius^2}."""
        r2 = radius * radius

        def level(x, y):
            return x * x + y * y - r2

        def grad(x, y):
            return 2.0 * x, 2.0 * y

        return cls(level, grad, **kw)

    @classmethod
    def polynomial(cls, coeffs, **kw):
        """Omega = {sum(c_m * monomial_m) - 1 < 0} for quadratic/quartic terms."""
        f, fx, fy = poly2d(coeffs)

        def level(x, y):
            return f(x, y) - 1.0

        def grad(x, y):
            return fx(x, y), fy(x, y)

        return cls(level, grad, **kw)


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on [x_min, x_max] x [y_min, y_max].

    Arrays over the grid are indexed [i, j] with i the x index.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grid needs nx >= 8 and ny >= 8")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extents must be positive")

    @property
    def h_x(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def h_y(self):
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")


@dataclass(frozen=True)
class BoundaryStencil:
    """Extrapolation stencil of one boundary node x0.

    foot = x0 + tau0 * direction lies in a bilinear cell whose four corners
    are interior; weights are the nonnegative bilinear weights (sum 1).
    phi_increment is u0(x0) - u0(foot) with u0(foot) interpolated by the
    same weights.
    """

    node: tuple
    direction: tuple
    tau0: float
    foot: tuple
    corners: tuple  # four (i, j) interior nodes
    weights: tuple
    phi_increment: float = 0.0


class GridTopology:
    """Node classification plus packed stencil arrays, immutable once built.

    Attributes (all read-only arrays):
      mask           [nx, ny] int8 with EXTERIOR/INTERIOR/BOUNDARY codes
      ii, jj         packed interior indices (row-major in i)
      x, y           packed interior coordinates
      b_ii, b_jj     packed boundary node indices
      b_dir, b_tau, b_foot   per-boundary-node direction, step, foot point
      b_ci, b_cj     [K, 4] corner indices of the foot's bilinear cell
      b_w            [K, 4] bilinear weights
      b_inc          [K] boundary increments (zero unless built with u0)
    """

    def __init__(self, domain, grid, mask, interior_idx, boundary_data):
        self.domain = domain
        self.grid = grid
        self.mask = mask
        self.ii, self.jj = interior_idx
        xs, ys = grid.xs, grid.ys
        self.x = xs[self.ii]
        self.y = ys[self.jj]
        (self.b_ii, self.b_jj, self.b_dir, self.b_tau, self.b_foot,
         self.b_ci, self.b_cj, self.b_w, self.b_inc) = boundary_data
        for a in (self.mask, self.ii, self.jj, self.x, self.y, self.b_ii,
                  self.b_jj, self.b_dir, self.b_tau, self.b_foot, self.b_ci,
                  self.b_cj, self.b_w, self.b_inc):
            a.setflags(write=False)

    @property
    def n_interior(self):
        return self.ii.shape[0]

    @property
    def n_boundary(self):
        return self.b_ii.shape[0]

    @property
    def interior_mask(self):
        return self.mask == INTERIOR

    @property
    def boundary_stencils(self):
        """Materialize the per-node stencil records (for inspection/tests)."""
        out = []
        for k in range(self.n_boundary):
            out.append(
                BoundaryStencil(
                    node=(int(self.b_ii[k]), int(self.b_jj[k])),
                    direction=tuple(self.b_dir[k]),
                    tau0=float(self.b_tau[k]),
                    foot=tuple(self.b_foot[k]),
                    corners=tuple(
                        (int(self.b_ci[k, m]), int(self.b_cj[k, m]))
                        for m in range(4)
                    ),
                    weights=tuple(self.b_w[k]),
                    phi_increment=float(self.b_inc[k]),
                )
            )
        return out


def boundary_direction(domain, point):
    """Unit direction at a boundary point: -grad(level)/|grad(level)| in
    normal mode, the normalized beta field in oblique mode."""
    x, y = point
    gx, gy = domain.grad_level(x, y)
    norm = math.hypot(gx, gy)
    if norm <= 1e-12:
        raise DegenerateGradient(f"level gradient vanishes at {point}")
    if domain.direction_mode == "normal":
        return np.array([-gx / norm, -gy / norm])
    bx, by = domain.beta(x, y)
    bnorm = math.hypot(bx, by)
    if bnorm <= 1e-12:
        raise DegenerateGradient(f"beta vanishes at {point}")
    return np.array([bx / bnorm, by / bnorm])


def _inner_normal(domain, x, y):
    gx, gy = domain.grad_level(x, y)
    norm = math.hypot(gx, gy)
    if norm <= 1e-12:
        raise DegenerateGradient(f"level gradient vanishes at ({x}, {y})")
    return -gx / norm, -gy / norm


def find_tau0(domain, grid, interior, x0, direction):
    """Smallest step tau in {k*h_min/4 : k=1..12} such that the bilinear
    cell of x0 + tau*direction has four interior corners.

    Returns (tau0, foot, corners, weights).  Raises DomainTooThin when no
    step qualifies, ValueError when the direction does not point into the
    domain (level must decrease along it).
    """
    gx, gy = domain.grad_level(x0[0], x0[1])
    if gx * direction[0] + gy * direction[1] >= 0.0:
        raise ValueError(
            f"direction {tuple(direction)} does not point into the domain at {tuple(x0)}"
        )
    h_min = min(grid.h_x, grid.h_y)
    xs, ys = grid.xs, grid.ys
    for k in range(1, TAU_STEPS + 1):
        tau = k * h_min / 4.0
        fx = x0[0] + direction[0] * tau
        fy = x0[1] + direction[1] * tau
        ci = int(math.floor((fx - grid.x_min) / grid.h_x))
        cj = int(math.floor((fy - grid.y_min) / grid.h_y))
        if not (0 <= ci <= grid.nx - 2 and 0 <= cj <= grid.ny - 2):
            continue
        if not (interior[ci, cj] and interior[ci + 1, cj]
                and interior[ci, cj + 1] and interior[ci + 1, cj + 1]):
            continue
        tx = (fx - xs[ci]) / grid.h_x
        ty = (fy - ys[cj]) / grid.h_y
        corners = ((ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1))
        weights = (
            (1.0 - tx) * (1.0 - ty),
            tx * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * ty,
        )
        return tau, (fx, fy), corners, weights
    raise DomainTooThin(
        f"no admissible interpolation foot within {TAU_STEPS} quarter-cells "
        f"of boundary node at {tuple(x0)}"
    )


def build_topology(domain, grid, u0=None):
    """Classify grid nodes against the domain and build boundary stencils.

    When `u0` (a callable (x, y) -> value) is given, the per-stencil
    increments u0(x0) - u0(foot) are precomputed with the same bilinear
    weights the runtime update uses.
    """
    X, Y = grid.mesh()
    lvl = np.asarray(domain.level(X, Y), dtype=float)
    interior = lvl < 0.0
    if not interior.any():
        raise ValueError("domain contains no grid nodes")

    # The grid box must contain the domain with two spare cells on each side.
    imin = int(np.min(np.nonzero(interior.any(axis=1))[0]))
    imax = int(np.max(np.nonzero(interior.any(axis=1))[0]))
    jmin = int(np.min(np.nonzero(interior.any(axis=0))[0]))
    jmax = int(np.max(np.nonzero(interior.any(axis=0))[0]))
    if imin < 2 or jmin < 2 or imax > grid.nx - 3 or jmax > grid.ny - 3:
        raise ValueError(
            "domain is not contained in the grid with a 2-cell margin"
        )

    # Boundary nodes are the non-interior nodes adjacent (8-neighborhood) to
    # an interior node.  Diagonal adjacency must count: the 9-point Hessian
    # at an interior node reads all 8 neighbors, so every one of them needs
    # a value, i.e. must be interior or boundary.
    near = np.zeros_like(interior)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            src = interior[
                max(0, -di): interior.shape[0] - max(0, di),
                max(0, -dj): interior.shape[1] - max(0, dj),
            ]
            near[
                max(0, di): interior.shape[0] - max(0, -di),
                max(0, dj): interior.shape[1] - max(0, -dj),
            ] |= src
    bnd = near & ~interior

    mask = np.zeros(interior.shape, dtype=np.int8)
    mask[interior] = INTERIOR
    mask[bnd] = BOUNDARY

    ii, jj = np.nonzero(interior)
    ii = ii.astype(np.intc)
    jj = jj.astype(np.intc)

    bi_arr, bj_arr = np.nonzero(bnd)
    K = bi_arr.shape[0]
    xs, ys = grid.xs, grid.ys
    b_dir = np.empty((K, 2))
    b_tau = np.empty(K)
    b_foot = np.empty((K, 2))
    b_ci = np.empty((K, 4), dtype=np.intc)
    b_cj = np.empty((K, 4), dtype=np.intc)
    b_w = np.empty((K, 4))
    for k in range(K):
        x0 = (xs[bi_arr[k]], ys[bj_arr[k]])
        if domain.direction_mode == "oblique":
            nux, nuy = _inner_normal(domain, *x0)
            d = boundary_direction(domain, x0)
            dot = d[0] * nux + d[1] * nuy
            if dot < domain.obliqueness_floor:
                raise ObliquenessViolated(
                    f"<beta, nu> = {dot:.4f} < {domain.obliqueness_floor} at {x0}"
                )
        else:
            d = boundary_direction(domain, x0)
        tau, foot, corners, weights = find_tau0(domain, grid, interior, x0, d)
        b_dir[k] = d
        b_tau[k] = tau
        b_foot[k] = foot
        b_ci[k] = [c[0] for c in corners]
        b_cj[k] = [c[1] for c in corners]
        b_w[k] = weights

    def _assemble(b_inc):
        return GridTopology(
            domain,
            grid,
            mask.copy(),
            (ii.copy(), jj.copy()),
            (
                bi_arr.astype(np.intc),
                bj_arr.astype(np.intc),
                b_dir.copy(),
                b_tau.copy(),
                b_foot.copy(),
                b_ci.copy(),
                b_cj.copy(),
                b_w.copy(),
                b_inc,
            ),
        )

    topo = _assemble(np.zeros(K))
    if u0 is not None:
        from gcflow.fields import ScalarField
        from gcflow.flow import boundary_increments

        inc = boundary_increments(ScalarField.from_function(topo, u0), topo)
        topo = _assemble(inc)
    return topo
