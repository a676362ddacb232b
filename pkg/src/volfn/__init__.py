"""Integrated functionals of spot volatility from noisy high-frequency data.

Estimates time-integrals of smooth matrix functionals of the instantaneous
covariance of a multivariate log-price panel observed at a regular grid,
under microstructure noise and jumps: smoothed increments with jump
truncation feed windowed spot covariance estimates, a second-order bias
correction removes the functional's nonlinearity error, and plug-in
asymptotic variances yield feasible confidence intervals.  A PSD-preserving
variant trades a little rate for positive semidefinite spot matrices and
powers realized PCA (integrated eigenvalues/eigenvectors with closed-form
corrections).

Typical use::

    from volfn import LogPriceGrid, TuningPlan, builtin, estimate

    grid = LogPriceGrid(values=prices_log, delta_n=1 / 23400)
    est = estimate(grid, builtin("square", grid.d), TuningPlan(mode="hat"))
    print(est.value, est.ci)
"""
from .errors import (
    ConfigError,
    DataError,
    DegeneracyError,
    DomainError,
    NumericError,
    TuningError,
    VolfnError,
)
from .estimate import (
    BiasTensors,
    FunctionalEstimate,
    avar,
    bias_hat,
    bias_tilde,
    confidence_interval,
    estimate,
    estimate_from_spot,
    tensors,
)
from .functional import (
    ClusterSpec,
    MatrixFunctional,
    builtin,
    eig_sorted,
    eigenvalue_functional,
    eigenvector_functional,
    fd_check,
)
from .grid import IncrementSeries, LogPriceGrid, increments, load_csv, save_csv
from .kernel import (
    DiscreteKernel,
    KernelConstants,
    KernelProfile,
    constants,
    default_constants,
    discretize,
    get_profile,
    minmax_profile,
    profile_from_table,
    validate_profile,
)
from .pca import (
    RealizedSpectrum,
    realized_eigenvalues,
    realized_eigenvectors,
    window_spectra,
)
from .preavg import (
    PreAveragedSeries,
    TruncationSpec,
    noise_offset,
    preaverage,
    preaveraged_series,
    resolve_truncation,
    threshold,
    truncate,
)
from .sim import (
    FactorModelParams,
    FactorSim,
    McReport,
    McStudy,
    ScalarModelParams,
    ScalarSim,
    bipower,
    run_mc,
    simulate_factor,
    simulate_scalar,
)
from .spot import (
    SpotVolSeries,
    TuningPlan,
    floor_spectrum,
    noise_cov,
    psd_project,
    spot_hat,
    spot_series,
    spot_tilde,
    validate_tuning,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "VolfnError", "ConfigError", "TuningError", "DataError", "NumericError",
    "DegeneracyError", "DomainError",
    # grid
    "LogPriceGrid", "IncrementSeries", "increments", "load_csv", "save_csv",
    # kernel
    "KernelProfile", "DiscreteKernel", "KernelConstants", "minmax_profile",
    "get_profile", "profile_from_table", "validate_profile", "discretize",
    "constants", "default_constants",
    # preavg
    "PreAveragedSeries", "TruncationSpec", "preaverage", "noise_offset",
    "preaveraged_series", "threshold", "resolve_truncation", "truncate",
    # spot
    "TuningPlan", "SpotVolSeries", "validate_tuning", "spot_hat",
    "spot_tilde", "noise_cov", "psd_project", "floor_spectrum", "spot_series",
    # functional
    "MatrixFunctional", "ClusterSpec", "builtin", "eig_sorted",
    "eigenvalue_functional", "eigenvector_functional", "fd_check",
    # estimate
    "BiasTensors", "FunctionalEstimate", "tensors", "bias_hat", "bias_tilde",
    "avar", "estimate", "estimate_from_spot", "confidence_interval",
    # pca
    "RealizedSpectrum", "realized_eigenvalues", "realized_eigenvectors",
    "window_spectra",
    # sim
    "ScalarModelParams", "FactorModelParams", "ScalarSim", "FactorSim",
    "McStudy", "McReport", "simulate_scalar", "simulate_factor", "bipower",
    "run_mc",
]
