"""Numerical verification of gradient estimates and Harnack inequalities for
drifting heat equations on weighted radial model spaces."""

__version__ = "0.1.0"

from .errors import ConfigError, DriftlabError  # noqa: E402
from .estimates import (  # noqa: E402
    EllipticGlobalEstimator,
    EstimateReport,
    HamiltonEstimator,
    LiYauEstimator,
    SoupletZhangEstimator,
    calibrate_constant,
    elliptic_global_check,
    elliptic_harnack_check,
    hamilton_check,
    li_yau_check,
    liouville_demo,
    parabolic_harnack_check,
    souplet_zhang_check,
)
from .fields import Cylinder, Grid, SolutionField  # noqa: E402
from .geometry import curvature_lower_bound, make_model_space, shipped_spaces  # noqa: E402
from .nonlinearity import Nonlinearity, gamma_quantities, liouville_predicate  # noqa: E402
from .solver import solve_elliptic, solve_parabolic  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DriftlabError",
    "EstimateReport",
    "SoupletZhangEstimator",
    "HamiltonEstimator",
    "LiYauEstimator",
    "EllipticGlobalEstimator",
    "calibrate_constant",
    "souplet_zhang_check",
    "hamilton_check",
    "elliptic_harnack_check",
    "li_yau_check",
    "parabolic_harnack_check",
    "elliptic_global_check",
    "liouville_demo",
    "Cylinder",
    "Grid",
    "SolutionField",
    "make_model_space",
    "shipped_spaces",
    "curvature_lower_bound",
    "Nonlinearity",
    "gamma_quantities",
    "liouville_predicate",
    "solve_parabolic",
    "solve_elliptic",
]
