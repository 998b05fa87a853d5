"""gcflow: a numerical laboratory for logarithmic Gauss curvature flows.

Simulates du/dt = log det D2u - log f(x, Du) with Neumann/oblique boundary
data on convex planar domains, extracts translating profiles and their
speed by two independent routes (flow diagnostics and epsilon-regularized
elliptic continuation), and constructs rotationally symmetric entire graphs
of prescribed curvature in Euclidean and Minkowski settings.
"""

__version__ = "0.1.0"

from gcflow.domain import DomainSpec, GridSpec, build_topology
from gcflow.fields import ScalarField, SpeedLaw

__all__ = [
    "DomainSpec",
    "GridSpec",
    "ScalarField",
    "SpeedLaw",
    "build_topology",
    "__version__",
]
