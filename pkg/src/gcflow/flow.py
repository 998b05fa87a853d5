"""Explicit time integration of the log-determinant flow.

    du/dt = log det D2u - log f(x, Du)   on interior nodes,
    u(x0) = u(y0) + [u0(x0) - u0(y0)]    at boundary nodes,

where y0 is the stencil foot of x0 and both u(y0) terms use the same
bilinear weights.  The boundary rule keeps the directional derivative of u
along the stencil direction equal to that of the initial value, and it is
equivariant under adding a constant to u.

Forward Euler with the inverse-Hessian step bound

    dt = sigma / max(u^11/hx^2 + u^22/hy^2 + |u^12|/(hx*hy))

(sigma <= 0.5) is stable for the linearized operator u^{ij} d_ij.  On loss
of discrete convexity the step is rolled back and dt halved, up to 8 times.

Diagnostics per sample: mean velocity v_bar, the deviation

    delta = sum_interior (udot - v_bar)^2 * hx * hy,

the exponential rate -log(delta)/t, max |udot| and the oscillation of udot.
A translating profile is extracted at the end of a run as the
mean-subtracted field, with speed = final v_bar.
"""

import bisect
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from gcflow import kernels
from gcflow.errors import ConvexityLost, GradientDomainViolated
from gcflow.fields import ScalarField, rhs_packed, scatter_interior, stencil_workspace

MAX_DT_HALVINGS = 8


@dataclass
class FlowParams:
    t_end: float
    delta_tol: Optional[float] = None
    record_every: int = 10
    sigma: float = 0.4
    max_steps: int = 5_000_000
    transient_steps: int = 5
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not 0.0 < self.sigma <= 0.5:
            raise ValueError("sigma must lie in (0, 0.5]")


@dataclass
class FlowState:
    u: ScalarField
    t: float
    step_count: int
    last_dt: float


class DiagnosticsTrace:
    """Time series of convergence diagnostics, recorded at a fixed cadence."""

    def __init__(self):
        self.steps = []
        self.t = []
        self.v_bar = []
        self.delta = []
        self.rate = []
        self.max_abs_udot = []
        self.osc_udot = []

    def record(self, step, t, udot, cell_area):
        v_bar = float(np.mean(udot))
        delta = float(np.sum((udot - v_bar) ** 2) * cell_area)
        if t > 0.0:
            rate = -np.log(delta) / t if delta > 0.0 else np.inf
        else:
            rate = np.nan
        self.steps.append(step)
        self.t.append(t)
        self.v_bar.append(v_bar)
        self.delta.append(delta)
        self.rate.append(float(rate))
        self.max_abs_udot.append(float(np.max(np.abs(udot))))
        self.osc_udot.append(float(np.max(udot) - np.min(udot)))

    def __len__(self):
        return len(self.t)

    def columns(self):
        """(name, values) pairs in the trace.csv column order."""
        return (
            ("t", self.t),
            ("v_bar", self.v_bar),
            ("delta", self.delta),
            ("rate", self.rate),
            ("max_abs_udot", self.max_abs_udot),
            ("osc_udot", self.osc_udot),
        )


@dataclass
class TranslatorEstimate:
    profile: ScalarField  # mean-subtracted over interior nodes
    speed: float
    residual_sup: float


@dataclass
class RunResult:
    state: FlowState
    trace: DiagnosticsTrace
    estimate: TranslatorEstimate
    converged: bool
    status: str  # "converged" | "t_end" | "max_steps"


@dataclass(frozen=True)
class MaxPrincipleReport:
    baseline: float
    baseline_t: float
    max_increase: float
    violated: bool


def boundary_increments(u0, topology):
    """Per-stencil increments u0(x0) - u0(y0), with u0(y0) interpolated by
    the same kernel the runtime boundary update uses (so u = u0 is an exact
    fixed point of the update)."""
    vals = u0.values.copy()
    zero = np.zeros(topology.n_boundary)
    kernels.boundary(
        vals, topology.b_ii, topology.b_jj, topology.b_ci, topology.b_cj,
        topology.b_w, zero,
    )
    interp = vals[topology.b_ii, topology.b_jj]
    return u0.values[topology.b_ii, topology.b_jj] - interp


def apply_boundary(u, topology, u0_increments=None):
    """Return a copy of u with boundary nodes set to u(y0) + increment.

    Increments default to the ones stored on the topology (zero unless it
    was built with an initial value)."""
    inc = topology.b_inc if u0_increments is None else u0_increments
    out = u.copy()
    kernels.boundary(
        out.values, topology.b_ii, topology.b_jj, topology.b_ci,
        topology.b_cj, topology.b_w, np.ascontiguousarray(inc),
    )
    return out


def stable_dt(u, law, sigma=0.4):
    """Largest safe explicit step for the current field."""
    _, max_denom = rhs_packed(u.values, u.topology, law.bind(u.topology))
    return sigma / max_denom


def step(state, law, topology, dt, u0_increments=None):
    """One explicit step.  The input state is left untouched; on loss of
    convexity in the updated field the error is raised so the caller can
    halve dt and retry."""
    inc = topology.b_inc if u0_increments is None else u0_increments
    bound = law.bind(topology)
    rhs, _ = rhs_packed(state.u.values, topology, bound)
    vals = state.u.values.copy()
    kernels.update(vals, topology.ii, topology.jj, rhs, dt)
    kernels.boundary(
        vals, topology.b_ii, topology.b_jj, topology.b_ci, topology.b_cj,
        topology.b_w, np.ascontiguousarray(inc),
    )
    rhs_packed(vals, topology, bound)  # re-check convexity of the new field
    return FlowState(
        u=ScalarField(topology, vals),
        t=state.t + dt,
        step_count=state.step_count + 1,
        last_dt=dt,
    )


def run(u0, law, topology, params, on_snapshot: Optional[Callable] = None):
    """Integrate until t >= t_end or delta <= delta_tol.

    on_snapshot(t_requested, state, udot_field) fires the first time t
    crosses each entry of params.snapshot_times.  Non-convergence (delta_tol
    set but unmet at exit) is reported in the result, not raised.
    """
    grid = topology.grid
    cell_area = grid.h_x * grid.h_y
    inc = np.ascontiguousarray(boundary_increments(u0, topology))
    bound = law.bind(topology)
    work = stencil_workspace(topology)

    u = u0.values.copy()
    t = 0.0
    n_step = 0
    last_dt = 0.0
    trace = DiagnosticsTrace()

    rhs, max_denom = rhs_packed(u, topology, bound, work=work)
    trace.record(0, 0.0, rhs, cell_area)
    last_recorded = 0

    snaps = sorted(params.snapshot_times)
    next_snap = 0

    def fire_snapshots():
        nonlocal next_snap
        while next_snap < len(snaps) and t >= snaps[next_snap] - 1e-12:
            if on_snapshot is not None:
                state = FlowState(ScalarField(topology, u.copy()), t, n_step, last_dt)
                on_snapshot(snaps[next_snap], state, scatter_interior(topology, rhs))
            next_snap += 1

    fire_snapshots()

    status = "t_end"
    converged = params.delta_tol is not None and trace.delta[-1] <= params.delta_tol
    if converged:
        status = "converged"

    while not converged and params.t_end - t > 1e-14 * max(1.0, params.t_end):
        if n_step >= params.max_steps:
            status = "max_steps"
            break
        dt = min(params.sigma / max_denom, params.t_end - t)
        for attempt in range(MAX_DT_HALVINGS + 1):
            u_new = u.copy()
            kernels.update(u_new, topology.ii, topology.jj, rhs, dt)
            kernels.boundary(
                u_new, topology.b_ii, topology.b_jj, topology.b_ci,
                topology.b_cj, topology.b_w, inc,
            )
            try:
                rhs_new, max_denom_new = rhs_packed(u_new, topology, bound, work=work)
            except (ConvexityLost, GradientDomainViolated):
                if attempt == MAX_DT_HALVINGS:
                    raise
                dt *= 0.5
                continue
            break
        u, rhs, max_denom = u_new, rhs_new, max_denom_new
        t += dt
        last_dt = dt
        n_step += 1
        fire_snapshots()
        at_end = params.t_end - t <= 1e-14 * max(1.0, params.t_end)
        if n_step % params.record_every == 0 or at_end:
            trace.record(n_step, t, rhs, cell_area)
            last_recorded = n_step
            if params.delta_tol is not None and trace.delta[-1] <= params.delta_tol:
                converged = True
                status = "converged"

    if last_recorded != n_step:
        trace.record(n_step, t, rhs, cell_area)

    state = FlowState(ScalarField(topology, u), t, n_step, last_dt)
    speed = float(np.mean(rhs))
    profile_vals = u.copy()
    mean_u = float(np.mean(u[topology.ii, topology.jj]))
    profile_vals[topology.mask != 0] -= mean_u
    estimate = TranslatorEstimate(
        profile=ScalarField(topology, profile_vals),
        speed=speed,
        residual_sup=float(np.max(np.abs(rhs - speed))),
    )
    if params.delta_tol is None:
        converged = status != "max_steps"
    return RunResult(state, trace, estimate, converged, status)


def max_principle_monitor(trace, transient_steps=5, rel_tol=1e-2):
    """Check that max |udot| never grows past its first post-transient value.

    The first sample at or after `transient_steps` steps is the baseline
    (the t = 0 velocity carries boundary-initialization artifacts)."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    k0 = bisect.bisect_left(trace.steps, transient_steps)
    if k0 >= len(trace):
        k0 = len(trace) - 1
    baseline = trace.max_abs_udot[k0]
    later = trace.max_abs_udot[k0 + 1:]
    max_increase = max((m - baseline for m in later), default=0.0)
    return MaxPrincipleReport(
        baseline=baseline,
        baseline_t=trace.t[k0],
        max_increase=max_increase,
        violated=max_increase > rel_tol * baseline,
    )
