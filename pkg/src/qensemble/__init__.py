"""Discrete q-orthogonal ensembles on exponential lattices.

Closed-form partition functions, skew-orthogonal polynomials, correlation
kernels and the brute-force sums they are checked against.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .qcore import LatticePoint, QContext
from .families import (
    WeightFamily,
    al_salam_carlitz,
    big_q_jacobi,
    build_lattice,
    little_q_jacobi,
    q_laguerre,
)
from .skewengine import partition, pfaffian, sop_closed, sop_numeric
from .kernels import correlation_rho, kernel_set, qdet
from .oracle import OracleConfig, brute_correlation, brute_partition

__all__ = [
    "__version__", "LatticePoint", "QContext", "WeightFamily", "al_salam_carlitz", "big_q_jacobi",
    "build_lattice", "little_q_jacobi", "q_laguerre", "partition", "pfaffian", "sop_closed", "sop_numeric",
    "correlation_rho", "kernel_set", "qdet", "OracleConfig", "brute_correlation", "brute_partition",
]
