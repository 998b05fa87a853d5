"""Exception types shared across the package."""


class GCFlowError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(GCFlowError):
    """Invalid or inconsistent run configuration."""


class DomainTooThin(GCFlowError):
    """The domain is under-resolved on the chosen grid: either a boundary
    node has no admissible interpolation foot within the search range, or an
    interior node lacks the full 9-point neighborhood."""


class ObliquenessViolated(GCFlowError):
    """An oblique direction field dips below the required inner product
    with the inner normal at some boundary node."""


class DegenerateGradient(GCFlowError):
    """The level-set gradient vanishes where a boundary direction is needed."""


class ConvexityLost(GCFlowError):
    """A field stopped being discretely convex (det <= 0 or uxx <= 0)."""

    def __init__(self, node, det, uxx):
        super().__init__(
            f"convexity lost at node {node}: det={det:.6g}, uxx={uxx:.6g}"
        )
        self.node = node
        self.det = det
        self.uxx = uxx


class GradientDomainViolated(GCFlowError):
    """The gradient left the speed law's admissible domain (|Du| >= 1 for
    Minkowski-type laws)."""

    def __init__(self, node, grad_sq):
        super().__init__(
            f"|Du|^2 = {grad_sq:.6g} leaves the gradient domain at node {node}"
        )
        self.node = node
        self.grad_sq = grad_sq


class AnchorOutsideDomain(GCFlowError):
    """The anchor node used for speed extraction is not an interior node."""


class NonConvergence(GCFlowError):
    """An iterative solve hit its step cap before reaching tolerance."""


class DomainViolation(GCFlowError):
    """A radial-kernel argument lies outside the kernel's gradient domain."""


class RangeExceeded(GCFlowError):
    """The mass balance requests more gradient mass than the kernel holds."""


class TotalUnknown(GCFlowError):
    """The weight's total integral is required but was declared unknown."""
