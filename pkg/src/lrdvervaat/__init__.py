"""Simulation and Monte Carlo verification tools for long-memory linear processes.

Modules: ``model`` (coefficients, innovations, paths, polynomial forms),
``marginals`` (F, f, Q and the density-quantile conditions), ``processes``
(empirical, quantile, Bahadur-Kiefer and Vervaat processes), ``asymptotics``
(covariances, scaling constants, limit laws), ``montecarlo`` (replications and
verdicts) and ``cli``.
"""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    autocovariances,
    lil_constant,
    limit_law,
    rate_schedule,
    sigma_constants,
    sigma_n1_exact,
)
from .marginals import check_condition, density_quantile_profile, gaussian, pareto_tail  # noqa: E402
from .model import (  # noqa: E402
    CoefficientSpec,
    InnovationLaw,
    LinearProcessModel,
    SlowlyVarying,
    compute_y2,
    make_coefficients,
    simulate_path,
)

__all__ = [
    "CoefficientSpec", "InnovationLaw", "LinearProcessModel", "SlowlyVarying", "autocovariances",
    "check_condition", "compute_y2", "density_quantile_profile", "gaussian", "lil_constant",
    "limit_law", "make_coefficients", "pareto_tail", "rate_schedule", "sigma_constants",
    "sigma_n1_exact", "simulate_path",
]
