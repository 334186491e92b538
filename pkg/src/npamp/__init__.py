"""Heteroscedasticity testing for high-dimensional regression via penalized
expectile fits at two levels and a message-passing solver.

The model is y = x @ beta0 + (1 + x @ gamma0) * eps; a coordinate j with
gamma0_j != 0 makes the noise scale depend on x_j.  Fitting the l1-penalized
expectile regression at two levels tau1 != tau2 targets beta0 + u_tau * gamma0
with level-dependent shifts u_tau, so the debiased difference of the two fits
isolates gamma0 coordinate by coordinate and yields an asymptotically normal
per-coordinate test statistic.
"""

from .amp import (AmpFit, AmpState, Dataset, SolverSettings, adjust_residuals,
                  amp_iterate, run_amp, update_b)
from .decorrelate import PufferTransform, puffer_transform
from .distributions import ErrorDistribution
from .errors import NumericalError
from .expectile import (ExpectileSpec, distribution_expectile, effective_score,
                        expectile_loss, expectile_subgradient, prox_expectile,
                        rescaled_score, sample_expectile, soft_threshold)
from .hettest import (TestReport, contrast_variance, empirical_rates,
                      power_function, test_statistics)
from .joint import (JointFit, cov_estimate, estimate_u_levels, estimate_u_tau,
                    fit_joint)
from .kernels import BACKEND
from .simulate import (SCENARIO_NAMES, SimConfig, SimResult, builtin_config,
                       generate_scenario, qq_export, run_simulation)
from .state_evolution import (SeParams, SignalPrior, amse, run_state_evolution,
                              se_step)

__version__ = "0.1.0"

__all__ = [
    "AmpFit",
    "AmpState",
    "BACKEND",
    "Dataset",
    "ErrorDistribution",
    "ExpectileSpec",
    "JointFit",
    "NumericalError",
    "PufferTransform",
    "SCENARIO_NAMES",
    "SeParams",
    "SignalPrior",
    "SimConfig",
    "SimResult",
    "SolverSettings",
    "TestReport",
    "adjust_residuals",
    "amp_iterate",
    "amse",
    "builtin_config",
    "contrast_variance",
    "cov_estimate",
    "distribution_expectile",
    "effective_score",
    "empirical_rates",
    "estimate_u_levels",
    "estimate_u_tau",
    "expectile_loss",
    "expectile_subgradient",
    "fit_joint",
    "generate_scenario",
    "power_function",
    "prox_expectile",
    "puffer_transform",
    "qq_export",
    "rescaled_score",
    "run_amp",
    "run_simulation",
    "run_state_evolution",
    "sample_expectile",
    "se_step",
    "soft_threshold",
    "test_statistics",
    "update_b",
    "__version__",
]
