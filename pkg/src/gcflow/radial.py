"""Rotationally symmetric graphs of prescribed curvature via mass balance.

For a radial weight g(r) and a gradient kernel h(rho), define the shell
integrals (n * omega_n is the area of the unit sphere in R^n)

    G(r)   = n*omega_n * int_0^r   g(s) s^(n-1) ds,
    H(rho) = n*omega_n * int_0^rho h(s) s^(n-1) ds.

A radial solution of det D2u * h(|Du|) = e^v * g(|x|) on the ball B_R whose
gradient map is a diffeomorphism onto B_rho satisfies the mass balance
e^v * G(R) = H(rho), which fixes the speed

    v(R, rho) = log(H(rho) / G(R))

and yields the gradient profile u'(r) = H^{-1}(e^v * G(r)).  Kernels:

    euclidean:  h(rho) = (1 + rho^2)^(-(n+2)/2)   on [0, inf)
    minkowski:  h(rho) = (1 - rho^2)^(-(n+2)/2)   on [0, 1), H(1^-) = inf

Entire graphs exist iff v = log(H_total / G_total) >= 0 in the euclidean
case (with bounded gradient iff v > 0); in the Minkowski case they always
exist, with gradient bounded away from 1 iff the weight is integrable.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from gcflow.errors import DomainViolation, GCFlowError, RangeExceeded, TotalUnknown

QUAD_KW = dict(epsabs=1e-14, epsrel=1e-12, limit=200)

# Relative slack for "exactly critical" comparisons; quadrature values
# carry ~1e-12 relative noise, so strict float equality is meaningless.
CRITICAL_RTOL = 1e-9


def sphere_area(n):
    """Surface area of the unit sphere in R^n (= n * omega_n)."""
    return 2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0)


@dataclass(frozen=True)
class RadialKernel:
    variant: str  # euclidean | minkowski
    n: int

    def __post_init__(self):
        if self.variant not in ("euclidean", "minkowski"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")

    @classmethod
    def euclidean(cls, n=2):
        return cls("euclidean", n)

    @classmethod
    def minkowski(cls, n=2):
        return cls("minkowski", n)

    @property
    def n_exp(self):
        return (self.n + 2) / 2.0

    @property
    def rho_sup(self):
        return 1.0 if self.variant == "minkowski" else math.inf

    def h(self, rho):
        if self.variant == "euclidean":
            return (1.0 + rho * rho) ** (-self.n_exp)
        return (1.0 - rho * rho) ** (-self.n_exp)


@dataclass(frozen=True)
class RadialWeight:
    """Positive radial weight g(r) with its declared total integral over
    R^n (math.inf when unbounded, None when unknown)."""

    g: Callable
    declared_total: Optional[float]
    label: str = "custom"

    @classmethod
    def constant(cls, c=1.0):
        if c <= 0.0:
            raise ValueError("constant weight must be positive")
        return cls(lambda r: c + 0.0 * np.asarray(r), math.inf, f"constant({c})")

    @classmethod
    def inverse_power(cls, a=1.0, k=2.0, n=2):
        """g(r) = a * (1 + r^2)^(-k); integrable over R^n iff k > n/2."""
        if a <= 0.0:
            raise ValueError("weight amplitude must be positive")
        if k > n / 2.0:
            total = a * sphere_area(n) * 0.5 * special.beta(n / 2.0, k - n / 2.0)
        else:
            total = math.inf
        return cls(lambda r: a * (1.0 + np.asarray(r) ** 2) ** (-k), total,
                   f"inverse_power(a={a}, k={k})")

    @classmethod
    def gaussian(cls, a=1.0, b=1.0, n=2):
        """g(r) = a * exp(-b r^2), total a * (pi/b)^(n/2)."""
        if a <= 0.0 or b <= 0.0:
            raise ValueError("gaussian weight needs a, b > 0")
        total = a * (math.pi / b) ** (n / 2.0)
        return cls(lambda r: a * np.exp(-b * np.asarray(r) ** 2), total,
                   f"gaussian(a={a}, b={b})")


class MassFunctions:
    """Shell integrals G, H for one kernel/weight pair, by adaptive
    quadrature (relative tolerance around 1e-12)."""

    def __init__(self, kernel, weight):
        self.kernel = kernel
        self.weight = weight
        self._area = sphere_area(kernel.n)

    def _g_shell(self, s):
        return self._area * self.weight.g(s) * s ** (self.kernel.n - 1)

    def _h_shell(self, s):
        return self._area * self.kernel.h(s) * s ** (self.kernel.n - 1)

    def G(self, r):
        if r <= 0.0:
            return 0.0
        val, _ = integrate.quad(self._g_shell, 0.0, r, **QUAD_KW)
        return val

    def H(self, rho):
        if rho >= self.kernel.rho_sup:
            raise DomainViolation(
                f"rho = {rho} outside the kernel's gradient domain "
                f"[0, {self.kernel.rho_sup})"
            )
        if rho <= 0.0:
            return 0.0
        val, _ = integrate.quad(self._h_shell, 0.0, rho, **QUAD_KW)
        return val

    @property
    def H_total(self):
        if self.kernel.variant == "minkowski":
            return math.inf
        if not hasattr(self, "_h_total"):
            val, _ = integrate.quad(self._h_shell, 0.0, math.inf, **QUAD_KW)
            self._h_total = val
        return self._h_total

    @property
    def G_total(self):
        return self.weight.declared_total

    def _grow_bracket(self, H_eval, m, lo):
        """Find hi with H(hi) >= m, growing from lo."""
        if self.kernel.variant == "minkowski":
            hi = max(0.5, lo + 0.25 * (1.0 - lo))
            for _ in range(200):
                if H_eval(hi) >= m:
                    return hi
                hi = hi + 0.5 * (1.0 - hi)
            raise GCFlowError("bracket growth failed approaching rho = 1")
        hi = max(1.0, 2.0 * lo)
        for _ in range(200):
            if H_eval(hi) >= m:
                return hi
            hi *= 2.0
        raise RangeExceeded(f"no rho with H(rho) >= {m}")

    def H_inv(self, m, rtol=1e-12):
        """Inverse of the strictly increasing H by bisection to relative
        tolerance rtol in rho."""
        if m <= 0.0:
            return 0.0
        lo = 0.0
        hi = self._grow_bracket(self.H, m, 0.0)
        while hi - lo > rtol * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            if self.H(mid) < m:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def H_inv_sorted(self, ms, rtol=1e-12):
        """H^{-1} for a nondecreasing array of masses.

        Sweeps left to right, bracketing each root just above the previous
        one and accumulating H incrementally over short intervals (local
        quadrature errors stay relative to the increments, so the running
        total keeps its relative accuracy).
        """
        ms = np.asarray(ms, dtype=float)
        out = np.zeros_like(ms)
        anchor_rho = 0.0
        anchor_val = 0.0
        prev = 0.0
        step_guess = None

        def H_at(rho):
            if rho <= anchor_rho:
                return anchor_val
            seg, _ = integrate.quad(self._h_shell, anchor_rho, rho, **QUAD_KW)
            return anchor_val + seg

        for idx, m in enumerate(ms):
            if m <= 0.0:
                out[idx] = 0.0
                continue
            if m >= anchor_val:
                lo = prev
                if step_guess is None:
                    hi = self._grow_bracket(H_at, m, lo)
                else:
                    hi = lo + 2.0 * step_guess
                    if self.kernel.variant == "minkowski":
                        hi = min(hi, lo + 0.5 * (1.0 - lo))
                    for _ in range(200):
                        if H_at(hi) >= m:
                            break
                        if self.kernel.variant == "minkowski":
                            hi = hi + 0.5 * (1.0 - hi)
                        else:
                            hi = lo + 2.0 * (hi - lo)
                    else:
                        raise GCFlowError("bracket growth failed in sweep")
            else:
                lo, hi = prev, prev
            while hi - lo > rtol * max(hi, 1e-300):
                mid = 0.5 * (lo + hi)
                if H_at(mid) < m:
                    lo = mid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
            out[idx] = root
            step_guess = max(root - prev, 1e-12)
            if root > anchor_rho:
                seg, _ = integrate.quad(self._h_shell, anchor_rho, root, **QUAD_KW)
                anchor_val += seg
                anchor_rho = root
            prev = root
        return out


@dataclass
class RadialProfile:
    """Sampled radial solution: u' = H^{-1}(e^v G(r)) on a uniform grid,
    u by cumulative trapezoids with u(0) = 0."""

    r: np.ndarray
    uprime: np.ndarray
    u: np.ndarray
    v_used: float

    @property
    def R(self):
        return float(self.r[-1])


def mass_H(kernel, rho):
    """H(rho) by adaptive quadrature."""
    return MassFunctions(kernel, RadialWeight.constant(1.0)).H(rho)


def mass_G(weight, r, n=2):
    """G(r) by adaptive quadrature (needs the ambient dimension)."""
    return MassFunctions(RadialKernel.euclidean(n), weight).G(r)


def speed(kernel, weight, R, rho):
    """v = log(H(rho) / G(R))."""
    if R <= 0.0:
        raise ValueError("R must be positive")
    mass = MassFunctions(kernel, weight)
    GR = mass.G(R)
    if GR <= 0.0:
        raise ValueError("weight mass G(R) must be positive")
    return math.log(mass.H(rho) / GR)


def rho_for_zero_speed(kernel, weight, R, mass=None):
    """The unique rho with H(rho) = G(R), or None when the kernel's total
    gradient mass cannot match G(R) (euclidean kernels only; the critical
    case G(R) = H_total counts as no root)."""
    if R <= 0.0:
        raise ValueError("R must be positive")
    mass = mass or MassFunctions(kernel, weight)
    GR = mass.G(R)
    if kernel.variant == "euclidean" and GR >= mass.H_total * (1.0 - CRITICAL_RTOL):
        return None
    lo, hi = 0.0, mass._grow_bracket(mass.H, GR, 0.0)
    while True:
        mid = 0.5 * (lo + hi)
        Hm = mass.H(mid)
        if abs(Hm - GR) <= 1e-12 * GR:
            return mid
        if Hm < GR:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            return mid


def profile(kernel, weight, R, *, v=None, rho=None, samples=2048, mass=None):
    """Construct the radial profile on [0, R] for a given speed v (or the
    speed matching a boundary gradient rho)."""
    if (v is None) == (rho is None):
        raise ValueError("give exactly one of v or rho")
    if R <= 0.0:
        raise ValueError("R must be positive")
    if samples < 8:
        raise ValueError("need at least 8 samples")
    mass = mass or MassFunctions(kernel, weight)
    if rho is not None:
        v = math.log(mass.H(rho) / mass.G(R))
    if not math.isfinite(v):
        raise ValueError("speed must be finite")

    r = np.linspace(0.0, R, samples)
    # Cumulative G over the sample intervals keeps errors relative.
    G_r = np.zeros(samples)
    acc = 0.0
    for k in range(1, samples):
        seg, _ = integrate.quad(mass._g_shell, r[k - 1], r[k], **QUAD_KW)
        acc += seg
        G_r[k] = acc
    m = math.exp(v) * G_r
    if m[-1] >= mass.H_total:
        raise RangeExceeded(
            f"e^v G(R) = {m[-1]:.6g} >= total gradient mass {mass.H_total:.6g}"
        )
    uprime = mass.H_inv_sorted(m)
    dr = np.diff(r)
    u = np.concatenate(
        ([0.0], np.cumsum(0.5 * (uprime[1:] + uprime[:-1]) * dr))
    )
    return RadialProfile(r=r, uprime=uprime, u=u, v_used=float(v))


EXISTS_BOUNDED = "exists_bounded_gradient"
EXISTS_UNBOUNDED = "exists_unbounded_gradient"
NO_ENTIRE = "no_entire_solution"


def classify_entire(kernel, weight):
    """Existence of an entire radial graph with speed 0.

    Euclidean: compare total masses, v = log(H_total / G_total); v > 0 gives
    a bounded gradient, v = 0 an unbounded one, v < 0 no solution.
    Minkowski: always exists; the gradient stays away from 1 iff the weight
    is integrable.
    """
    total = weight.declared_total
    if total is None:
        raise TotalUnknown(
            "classification needs the weight's declared total integral"
        )
    if kernel.variant == "minkowski":
        return EXISTS_BOUNDED if math.isfinite(total) else EXISTS_UNBOUNDED
    if not math.isfinite(total):
        return NO_ENTIRE
    H_tot = MassFunctions(kernel, weight).H_total
    v = math.log(H_tot / total)
    if abs(v) <= CRITICAL_RTOL:
        return EXISTS_UNBOUNDED
    return EXISTS_BOUNDED if v > 0.0 else NO_ENTIRE


NESTING_RTOL = 1e-9  # 10x the mass-function quadrature tolerance


def nesting_mismatch(profiles):
    """Largest gradient-profile disagreement across shared radii.

    Profiles of increasing R built with the same speed must coincide on
    smaller balls; the gradients are compared at exactly shared sample
    radii when the sample grids align, else at the smaller profile's radii
    by re-evaluating the construction.
    """
    worst = 0.0
    for small, big in zip(profiles, profiles[1:]):
        ratio = big.R / small.R
        n = len(small.r)
        stride = int(round(ratio))
        if stride >= 1 and abs(ratio - stride) < 1e-12 and len(big.r) == n:
            # big.r[j] = j*stride*dr_small coincides with small.r[j*stride]
            js = np.arange(0, (n - 1) // stride + 1)
            diff = np.abs(big.uprime[js] - small.uprime[js * stride])
            worst = max(worst, float(np.max(diff)))
        else:
            raise ValueError(
                "nesting check needs integer R ratios with equal sample counts"
            )
    return worst


def entire_profile(kernel, weight, R_list, samples=2048):
    """Nested zero-speed profiles on increasing balls.

    Verifies the classification permits existence and that consecutive
    profiles agree on shared radii within 10x quadrature tolerance.
    """
    R_list = tuple(float(R) for R in R_list)
    if not R_list:
        raise ValueError("R_list is empty")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("R_list must be strictly increasing")
    verdict = classify_entire(kernel, weight)
    if verdict == NO_ENTIRE:
        raise RangeExceeded(
            "no entire solution exists for this weight; profiles on "
            "arbitrarily large balls are unavailable"
        )
    mass = MassFunctions(kernel, weight)
    profiles = [
        profile(kernel, weight, R, v=0.0, samples=samples, mass=mass)
        for R in R_list
    ]
    scale = max(1.0, max(float(np.max(p.uprime)) for p in profiles))
    mismatch = nesting_mismatch(profiles) if len(profiles) > 1 else 0.0
    if mismatch > NESTING_RTOL * scale:
        raise GCFlowError(
            f"profile nesting violated: gradient mismatch {mismatch:.3e}"
        )
    return profiles
