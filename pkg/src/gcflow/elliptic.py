"""Translating speed via epsilon-regularization.

For epsilon in (0, 1] and a constant v, the regularized problem

    det D2u = e^v f(x, Du) e^(eps*u),   boundary increments from u0,

has a unique fixed point u_{eps,v}.  It is found by pseudo-time relaxation

    du/dtau = log det D2u - log f - v - eps*u

with the flow stepper and boundary update, until the residual's sup norm
over interior nodes drops below tol.  Because the relaxation map is
shift-equivariant, the fixed points obey the exact identity

    u_{eps,v} = u_{eps,0} - v/eps,

and the residual's interior mean equals -eps times the constant-mode error.
The solver exploits this with occasional mean shifts u += mean(residual)/eps,
which removes the slow eps-rate constant mode without touching the contract
(the returned field satisfies the stated residual bound).

Anchoring u_{eps,v}(anchor) = u0(anchor) at an interior node near the origin
gives the speed v_eps = eps * (u_{eps,0}(anchor) - u0(anchor)); continuing
eps -> 0 and extrapolating v_eps = v_inf + c*eps estimates the translating
speed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from gcflow import kernels
from gcflow.errors import (
    AnchorOutsideDomain,
    ConvexityLost,
    GradientDomainViolated,
    NonConvergence,
)
from gcflow.fields import ScalarField, rhs_packed, stencil_workspace
from gcflow.flow import MAX_DT_HALVINGS, boundary_increments


@dataclass
class RegularizedProblem:
    epsilon: float
    v: float
    law: object
    topology: object
    u0: ScalarField

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")


@dataclass
class SpeedContinuation:
    epsilons: tuple
    speeds: tuple
    extrapolated_speed: float
    extrapolated: bool  # False when a single epsilon left nothing to extrapolate
    extrapolation_gap: Optional[float]  # change of the extrapolant over the last step
    final_field: ScalarField


def default_anchor(topology):
    """Interior node nearest the origin (first such node on ties)."""
    k = int(np.argmin(topology.x ** 2 + topology.y ** 2))
    return (int(topology.ii[k]), int(topology.jj[k]))


def solve_regularized(problem, tol, *, sigma=0.4, max_steps=2_000_000,
                      jump_every=50, start=None):
    """Relax to the fixed point of the regularized problem.

    `start` warm-starts the relaxation (defaults to u0).  Raises
    ConvexityLost if the field degenerates even after step halving, and
    NonConvergence when max_steps is exhausted.
    """
    topo = problem.topology
    eps = problem.epsilon
    inc = np.ascontiguousarray(boundary_increments(problem.u0, topo))
    bound = problem.law.bind(topo)
    work = stencil_workspace(topo)

    u = (start.values if start is not None else problem.u0.values).copy()
    resid, max_denom = rhs_packed(u, topo, bound, lin_c=problem.v,
                                  lin_eps=eps, work=work)

    def mean_shift():
        nonlocal u, resid, max_denom
        u = u + float(np.mean(resid)) / eps
        resid, max_denom = rhs_packed(u, topo, bound, lin_c=problem.v,
                                      lin_eps=eps, work=work)

    for it in range(max_steps):
        sup = float(np.max(np.abs(resid)))
        if sup <= 0.5 * tol:
            # Kill the leftover constant mode before accepting.
            mean_shift()
            if float(np.max(np.abs(resid))) <= tol:
                return ScalarField(topo, u)
            continue
        if it % jump_every == 0:
            mean_shift()
            continue
        dt = sigma / max_denom
        for attempt in range(MAX_DT_HALVINGS + 1):
            u_try = u.copy()
            kernels.update(u_try, topo.ii, topo.jj, resid, dt)
            kernels.boundary(u_try, topo.b_ii, topo.b_jj, topo.b_ci,
                             topo.b_cj, topo.b_w, inc)
            try:
                resid_try, denom_try = rhs_packed(
                    u_try, topo, bound, lin_c=problem.v, lin_eps=eps, work=work
                )
            except (ConvexityLost, GradientDomainViolated):
                if attempt == MAX_DT_HALVINGS:
                    raise
                dt *= 0.5
                continue
            break
        u, resid, max_denom = u_try, resid_try, denom_try
    raise NonConvergence(
        f"regularized solve (eps={eps}, v={problem.v}) still at residual "
        f"{float(np.max(np.abs(resid))):.3e} after {max_steps} steps"
    )


def speed_from_anchor(problem, solved, anchor_node=None):
    """v_eps = eps * (u_{eps,0}(anchor) - u0(anchor)).

    `problem` must be the v = 0 instance whose fixed point is `solved`."""
    if problem.v != 0.0:
        raise ValueError("speed extraction uses the v = 0 problem")
    topo = problem.topology
    if anchor_node is None:
        anchor_node = default_anchor(topo)
    i, j = anchor_node
    from gcflow.domain import INTERIOR

    if not (0 <= i < topo.grid.nx and 0 <= j < topo.grid.ny) \
            or topo.mask[i, j] != INTERIOR:
        raise AnchorOutsideDomain(f"anchor node {anchor_node} is not interior")
    return problem.epsilon * float(
        solved.values[i, j] - problem.u0.values[i, j]
    )


def continue_speed(law, topology, u0, epsilons, tol, *, warm_start=True,
                   anchor_node=None, **solver_kw):
    """Solve the v = 0 problems along a decreasing epsilon sequence and
    extrapolate the speed with the first-order model v_eps = v_inf + c*eps."""
    epsilons = tuple(float(e) for e in epsilons)
    if not epsilons:
        raise ValueError("epsilon sequence is empty")
    if any(e <= 0.0 or e > 1.0 for e in epsilons):
        raise ValueError("epsilons must lie in (0, 1]")
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")

    speeds = []
    start = None
    sol = None
    for eps in epsilons:
        prob = RegularizedProblem(eps, 0.0, law, topology, u0)
        sol = solve_regularized(prob, tol, start=start if warm_start else None,
                                **solver_kw)
        speeds.append(speed_from_anchor(prob, sol, anchor_node))
        if warm_start:
            start = sol

    def richardson(i, j):
        e1, e2 = epsilons[i], epsilons[j]
        v1, v2 = speeds[i], speeds[j]
        return v2 - e2 * (v2 - v1) / (e2 - e1)

    if len(epsilons) == 1:
        extrapolated_speed = speeds[0]
        extrapolated = False
        gap = None
    else:
        extrapolated_speed = richardson(-2, -1)
        extrapolated = True
        gap = (
            abs(extrapolated_speed - richardson(-3, -2))
            if len(epsilons) >= 3 else None
        )

    mean = float(np.mean(sol.values[topology.ii, topology.jj]))
    final_vals = sol.values.copy()
    final_vals[topology.mask != 0] -= mean
    return SpeedContinuation(
        epsilons=epsilons,
        speeds=tuple(speeds),
        extrapolated_speed=float(extrapolated_speed),
        extrapolated=extrapolated,
        extrapolation_gap=gap,
        final_field=ScalarField(topology, final_vals),
    )
