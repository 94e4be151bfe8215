"""Marchenko-Pastur law, Bernstein approximation and the CLT for linear spectral statistics."""

__version__ = "0.1.0"

from .errors import BranchError, DomainError, MPCLTError, QuadratureError, SingularityError
from .mp_core import (
    MPModel,
    boundary_s,
    cdf,
    density,
    k_function,
    stieltjes_s,
    stieltjes_underline,
    support_edges,
)
from .functions import TestFunction, builtin, check_derivatives
from .bernstein import AffineMap, BernsteinApprox, build, corrected, correction, default_degree
from .clt_limits import (
    Contour,
    MomentParams,
    QuadConfig,
    centering_integral,
    cov_contour,
    limiting_cov,
    limiting_mean,
    mean_contour,
)
from .rmt_sim import EntryDistribution, SimConfig, SimSummary, run
