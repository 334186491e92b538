"""Joint fitting across expectile levels and the cross-level covariance.

Each level gets its own penalized fit on the same data; the covariance of the
debiased coordinates across levels is estimated by the average product of the
per-level scores, which makes the estimated matrix a Gram matrix and hence
positive semidefinite by construction.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .amp import SolverSettings
from .errors import NumericalError
from .expectile import sample_expectile, ExpectileSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class JointFit:
    """Per-level fits plus the K x K covariance of the debiased coordinates."""

    fits: tuple
    sigma: np.ndarray
    levels: tuple
    degraded: bool


def cov_estimate(fit1, fit2):
    """Average product of the two fits' score vectors, (1/n) sum G1_i G2_i.

    With fit1 = fit2 this is exactly the squared empirical score scale, the
    same sum that defines zeta_emp.
    """
    g1 = fit1.state.score
    g2 = fit2.state.score
    if g1.size != g2.size:
        raise ValueError("fits come from different sample sizes")
    return float((g1 @ g2) / g1.size)


def _ensure_psd(sigma):
    """Clip negative eigenvalues (roundoff) to zero."""
    eigval, eigvec = np.linalg.eigh(sigma)
    if eigval.min() >= 0.0:
        return sigma
    clipped = (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T
    return 0.5 * (clipped + clipped.T)


def fit_joint(data, levels, settings=None):
    """Fit every expectile level on the same data and estimate the covariance.

    Arguments
    ---------
    data : Dataset
    levels : sequence of ExpectileSpec (at least two; levels may coincide)
    settings : SolverSettings, optional

    Returns a JointFit.  Non-converged per-level fits are kept but flag the
    result as degraded (with a logged warning); a flat per-level failure
    raises NumericalError.
    """
    levels = tuple(levels)
    if len(levels) < 2:
        raise ValueError("need at least two expectile levels")
    if settings is None:
        settings = SolverSettings()
    fits = tuple(settings.run(data, spec) for spec in levels)
    degraded = not all(fit.converged for fit in fits)
    if degraded:
        bad = [f"tau={fit.spec.tau:g}" for fit in fits if not fit.converged]
        logger.warning("non-converged level fits: %s", ", ".join(bad))
    k = len(fits)
    sigma = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            sigma[i, j] = sigma[j, i] = cov_estimate(fits[i], fits[j])
    return JointFit(fits=fits, sigma=_ensure_psd(sigma), levels=levels,
                    degraded=degraded)


def estimate_u_levels(data, taus, settings=None):
    """Surrogates for the error expectiles u_tau from one pilot fit.

    Runs the tau = 0.5, u = 0 fit (plain penalized least squares) once and
    returns the sample expectile of its residuals at every requested level.
    Raises NumericalError if the pilot does not converge.
    """
    if settings is None:
        settings = SolverSettings()
    pilot = settings.run(data, ExpectileSpec(0.5, 0.0))
    if not pilot.converged:
        raise NumericalError("pilot fit at tau = 0.5 did not converge")
    residuals = data.y - data.x @ pilot.beta_hat
    return tuple(sample_expectile(residuals, tau) for tau in taus)


def estimate_u_tau(data, tau, settings=None):
    """Single-level convenience wrapper around estimate_u_levels."""
    return estimate_u_levels(data, (tau,), settings)[0]
