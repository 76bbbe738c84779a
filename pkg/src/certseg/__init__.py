"""Certified two-phase segmentation.

Minimizes the convex relaxation of the binary two-gray-value segmentation
energy with a primal-dual iteration over three interchangeable
discretizations (finite differences on a lattice, two finite-element
variants on an adaptive quadtree), and converts the duality gap into
guaranteed a posteriori bounds: on the L2 distance to the exact relaxed
minimizer and on the area of the mis-segmented region.  The per-cell bound
contributions drive adaptive mesh refinement.
"""

__version__ = "0.1.0"

from .adapt import AdaptConfig, AdaptiveResult, mark, run_adaptive
from .errors import (
    CertsegError,
    DegenerateClusteringError,
    InfeasibleDualError,
    InputError,
    NotConvergedError,
    StepSizeError,
)
from .estimator import (
    Certificate,
    ThetaAnalytic,
    ThetaOnLattice,
    area_band,
    estimate_chi,
    estimate_u_lattice,
    estimate_u_mesh,
    verify_chi_bound,
)
from .fdgrid import FdScheme, Lattice
from .feschemes import FePrimeScheme, FeScheme
from .inputs import AnalyticInput, ImageInput, make_two_gaussian
from .model import (
    ModelParams,
    ThetaFields,
    compute_theta,
    lloyd_2means,
    optimal_constants,
    threshold,
)
from .pdsolver import SolverConfig, SolveResult, solve
from .postproc import smooth, smoothing_plan
from .quadmesh import QuadMesh

__all__ = [
    "AdaptConfig",
    "AdaptiveResult",
    "AnalyticInput",
    "Certificate",
    "CertsegError",
    "DegenerateClusteringError",
    "FdScheme",
    "FePrimeScheme",
    "FeScheme",
    "ImageInput",
    "InfeasibleDualError",
    "InputError",
    "Lattice",
    "ModelParams",
    "NotConvergedError",
    "QuadMesh",
    "SolveResult",
    "SolverConfig",
    "StepSizeError",
    "ThetaAnalytic",
    "ThetaFields",
    "ThetaOnLattice",
    "area_band",
    "compute_theta",
    "estimate_chi",
    "estimate_u_lattice",
    "estimate_u_mesh",
    "lloyd_2means",
    "make_two_gaussian",
    "mark",
    "optimal_constants",
    "run_adaptive",
    "smooth",
    "smoothing_plan",
    "solve",
    "threshold",
    "verify_chi_bound",
]
