"""Discrete differential operators and speed laws.

The evolving quantity is a grid function u with valid values on interior
and boundary nodes (exterior nodes hold a quiet 0.0 placeholder that is
never read).  The right-hand side of the flow is

    udot = log det D2u - log f(x, Du)

evaluated with central differences on interior nodes; the cross term uses
the 4-corner 9-point formula.  Speed laws f(x, p) come in four flavours:

    constant            f = c
    euclidean_graph     f = g(x) * (1 + |p|^2)^n_exp
    minkowski_graph     f = g(x) * (1 - |p|^2)^n_exp,  |p| < 1
    custom              f = g(x) / h(|p|)

with n_exp = (n + 2) / 2 for graphs over R^n.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from gcflow import kernels
from gcflow.domain import INTERIOR, GridTopology
from gcflow.errors import ConvexityLost, GradientDomainViolated


@dataclass
class ScalarField:
    """Grid-aligned scalar values tied to a topology.

    values is [nx, ny] float64; only interior and boundary entries are
    meaningful.
    """

    topology: GridTopology
    values: np.ndarray

    @classmethod
    def from_function(cls, topology, fn):
        """Evaluate fn(x, y) on interior and boundary nodes, 0 elsewhere."""
        X, Y = topology.grid.mesh()
        vals = np.asarray(fn(X, Y), dtype=float)
        vals = np.where(topology.mask != 0, vals, 0.0)
        return cls(topology, np.ascontiguousarray(vals))

    @classmethod
    def full(cls, topology, value=0.0):
        vals = np.where(topology.mask != 0, float(value), 0.0)
        return cls(topology, np.ascontiguousarray(vals))

    def copy(self):
        return ScalarField(self.topology, self.values.copy())

    def interior(self):
        """Packed interior values (row-major in the x index)."""
        return self.values[self.topology.ii, self.topology.jj]

    def interior_mean(self):
        return float(np.mean(self.interior()))


@dataclass(frozen=True)
class SpeedLaw:
    """The speed function f(x, p) of the flow, with its admissible
    gradient domain ("plane" or the open "unit_ball")."""

    kind: str
    n_exp: float = 2.0
    weight: Optional[Callable] = None  # g(x, y) > 0, vectorized
    const: float = 1.0
    kernel: Optional[Callable] = None  # h(rho) > 0 for custom laws
    gradient_domain: str = "plane"

    @classmethod
    def constant(cls, value=1.0):
        if value <= 0.0:
            raise ValueError("constant speed law must be positive")
        return cls(kind="constant", const=float(value))

    @classmethod
    def euclidean_graph(cls, n=2, weight=None):
        return cls(kind="euclidean_graph", n_exp=(n + 2) / 2.0, weight=weight)

    @classmethod
    def minkowski_graph(cls, n=2, weight=None):
        return cls(
            kind="minkowski_graph",
            n_exp=(n + 2) / 2.0,
            weight=weight,
            gradient_domain="unit_ball",
        )

    @classmethod
    def custom(cls, weight, kernel, gradient_domain="plane"):
        """f(x, p) = weight(x) / kernel(|p|)."""
        if gradient_domain not in ("plane", "unit_ball"):
            raise ValueError(f"unknown gradient domain {gradient_domain!r}")
        return cls(
            kind="custom",
            weight=weight,
            kernel=kernel,
            gradient_domain=gradient_domain,
        )

    def log_f_at(self, x, y, px, py):
        """log f at explicit points/gradients (vectorized)."""
        gsq = px * px + py * py
        if self.kind == "constant":
            return np.log(self.const) + 0.0 * gsq
        log_g = 0.0 if self.weight is None else np.log(self.weight(x, y))
        if self.kind == "euclidean_graph":
            return log_g + self.n_exp * np.log1p(gsq)
        if self.kind == "minkowski_graph":
            return log_g + self.n_exp * np.log1p(-gsq)
        return log_g - np.log(self.kernel(np.sqrt(gsq)))

    def bind(self, topology):
        """Precompute the x-dependent part on the topology's interior nodes."""
        return _BoundLaw(self, topology)


class _BoundLaw:
    """Speed law with g(x) evaluated once on the packed interior nodes."""

    def __init__(self, law, topology):
        self.law = law
        self.gradient_domain = law.gradient_domain
        if law.kind == "constant":
            self.log_g = float(np.log(law.const))
        elif law.weight is None:
            self.log_g = 0.0
        else:
            g = np.asarray(law.weight(topology.x, topology.y), dtype=float)
            if np.min(g) <= 0.0:
                raise ValueError("speed-law weight must be positive on the domain")
            self.log_g = np.log(g)

    def log_f_packed(self, ux, uy, gsq):
        law = self.law
        if law.kind == "constant":
            return self.log_g + np.zeros_like(gsq)
        if law.kind == "euclidean_graph":
            return self.log_g + law.n_exp * np.log1p(gsq)
        if law.kind == "minkowski_graph":
            return self.log_g + law.n_exp * np.log1p(-gsq)
        return self.log_g - np.log(law.kernel(np.sqrt(gsq)))


@dataclass(frozen=True)
class HessianSample:
    uxx: float
    uyy: float
    uxy: float

    @property
    def det(self):
        return self.uxx * self.uyy - self.uxy * self.uxy


@dataclass(frozen=True)
class ConvexityReport:
    min_det: float
    min_uxx: float
    argmin: tuple  # node of the smallest determinant
    argmin_uxx: tuple


def _require_interior(topology, node):
    i, j = node
    if topology.mask[i, j] != INTERIOR:
        raise ValueError(f"node {node} is not interior")


def gradient_at(u, node):
    """Central-difference gradient (ux, uy) at an interior node."""
    _require_interior(u.topology, node)
    g = u.topology.grid
    i, j = node
    v = u.values
    ux = (v[i + 1, j] - v[i - 1, j]) / (2.0 * g.h_x)
    uy = (v[i, j + 1] - v[i, j - 1]) / (2.0 * g.h_y)
    return ux, uy


def hessian_at(u, node):
    """Second differences at an interior node; cross term uses the
    4-corner formula."""
    _require_interior(u.topology, node)
    g = u.topology.grid
    i, j = node
    v = u.values
    uxx = (v[i + 1, j] - 2.0 * v[i, j] + v[i - 1, j]) / (g.h_x * g.h_x)
    uyy = (v[i, j + 1] - 2.0 * v[i, j] + v[i, j - 1]) / (g.h_y * g.h_y)
    uxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (
        4.0 * g.h_x * g.h_y
    )
    return HessianSample(uxx, uyy, uxy)


def stencil_workspace(topology):
    """Reusable [9, K] scratch array for rhs_packed."""
    return np.empty((kernels.N_ROWS, topology.n_interior))


def rhs_packed(values, topology, bound, lin_c=0.0, lin_eps=0.0, work=None):
    """Packed flow right-hand side on interior nodes.

    Returns (rhs, max_denom) where rhs = log det D2u - log f - lin_c -
    lin_eps * u and max_denom bounds the explicit-step denominator.
    Raises ConvexityLost / GradientDomainViolated with the offending node.
    """
    if work is None:
        work = stencil_workspace(topology)
    g = topology.grid
    min_det, k_det, min_uxx, k_uxx, max_denom = kernels.prepare(
        values, topology.ii, topology.jj, g.h_x, g.h_y, work
    )
    if min_det <= 0.0 or min_uxx <= 0.0:
        k = k_det if min_det <= 0.0 else k_uxx
        node = (int(topology.ii[k]), int(topology.jj[k]))
        raise ConvexityLost(node, min_det, min_uxx)
    gsq = work[kernels.ROW_GSQ]
    if bound.gradient_domain == "unit_ball":
        k_bad = int(np.argmax(gsq))
        if gsq[k_bad] >= 1.0:
            node = (int(topology.ii[k_bad]), int(topology.jj[k_bad]))
            raise GradientDomainViolated(node, float(gsq[k_bad]))
    rhs = np.log(work[kernels.ROW_DET]) - bound.log_f_packed(
        work[kernels.ROW_UX], work[kernels.ROW_UY], gsq
    )
    if lin_c != 0.0:
        rhs -= lin_c
    if lin_eps != 0.0:
        rhs -= lin_eps * work[kernels.ROW_UC]
    return rhs, max_denom


def scatter_interior(topology, packed):
    """Spread packed interior values into a full field (0 elsewhere)."""
    vals = np.zeros((topology.grid.nx, topology.grid.ny))
    vals[topology.ii, topology.jj] = packed
    return ScalarField(topology, vals)


def rhs_field(u, law):
    """udot = log det D2u - log f(x, Du) as a field (interior nodes only)."""
    rhs, _ = rhs_packed(u.values, u.topology, law.bind(u.topology))
    return scatter_interior(u.topology, rhs)


def gradient_sup(u):
    """sup |Du| over interior nodes (useful as a boundary-gradient probe
    for convex fields, whose gradient peaks next to the boundary)."""
    topo = u.topology
    work = stencil_workspace(topo)
    kernels.prepare(u.values, topo.ii, topo.jj, topo.grid.h_x, topo.grid.h_y, work)
    return float(np.sqrt(np.max(work[kernels.ROW_GSQ])))


def convexity_check(u):
    """Exact minima of det D2u and uxx over interior nodes."""
    topo = u.topology
    work = stencil_workspace(topo)
    min_det, k_det, min_uxx, k_uxx, _ = kernels.prepare(
        u.values, topo.ii, topo.jj, topo.grid.h_x, topo.grid.h_y, work
    )
    return ConvexityReport(
        min_det=min_det,
        min_uxx=min_uxx,
        argmin=(int(topo.ii[k_det]), int(topo.jj[k_det])),
        argmin_uxx=(int(topo.ii[k_uxx]), int(topo.jj[k_uxx])),
    )
