"""Compressed smooth sparse decomposition.

Recover a smooth background and a sparse anomaly component directly from
compressive linear measurements of a signal (CSSD) or an image (KronCSSD,
per-mode sensing matrices).
"""

from .bases import (
    BasisMatrix,
    BasisSpec,
    build_basis,
    build_bspline_basis,
    build_identity_basis,
    incoherence,
    local_support_length,
    ric_upper_bound,
)
from .errors import (
    CSSDError,
    ConditioningError,
    DivergenceError,
    DomainError,
    FeasibilityError,
    InputError,
    ParseError,
    SizeError,
    UndefinedMetricError,
)
from .sensing import (
    Measurement,
    SensingOperator,
    compress,
    empirical_ric,
    gaussian_operator,
    identity_operator,
    kron_operator,
)
from .solver import (
    Problem1D,
    Problem2D,
    DecompositionResult,
    SolverConfig,
    cross_validate_lambda,
    lambda_max,
    soft_threshold,
    solve_constrained,
    solve_cssd_1d,
    solve_kron_cssd_2d,
    universal_lambda,
)

__version__ = "0.1.0"
