"""Coordinate-wise heteroscedasticity test from a two-level joint fit.

Under homoscedasticity the debiased coordinates at two expectile levels share
the same target, so their standardized difference is asymptotically standard
normal.  Each coordinate gets a z-statistic, a two-sided p-value, and a
marginal reject/keep decision; the analytic power curve for the contrast is
also provided.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import NumericalError


@dataclass(frozen=True, eq=False)
class TestReport:
    """Per-coordinate statistics t, two-sided p_value, reject = (p <= alpha)."""

    t: np.ndarray
    p_value: np.ndarray
    reject: np.ndarray
    alpha: float
    levels: tuple
    sigma: np.ndarray
    contrast_sd: float


def contrast_variance(sigma):
    """Variance of the level contrast: sigma11 - 2 sigma12 + sigma22."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2, 2):
        raise ValueError("sigma must be 2 x 2")
    return float(sigma[0, 0] - 2.0 * sigma[0, 1] + sigma[1, 1])


def test_statistics(joint, alpha=0.05):
    """Build the per-coordinate test from a two-level JointFit.

    t_j = (beta_tilde_1j - beta_tilde_2j) / sqrt(s11 - 2 s12 + s22),
    p_j = 2 (1 - Phi(|t_j|)), reject iff p_j <= alpha.
    """
    if len(joint.fits) != 2:
        raise ValueError("the test needs exactly two expectile levels")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    var = contrast_variance(joint.sigma)
    if not var > 0.0:
        raise NumericalError(
            "contrast variance is not positive; the two level fits are "
            "numerically indistinguishable")
    sd = float(np.sqrt(var))
    t = (joint.fits[0].beta_tilde - joint.fits[1].beta_tilde) / sd
    p = 2.0 * ndtr(-np.abs(t))
    return TestReport(
        t=t,
        p_value=p,
        reject=p <= alpha,
        alpha=alpha,
        levels=joint.levels,
        sigma=joint.sigma,
        contrast_sd=sd,
    )


def power_function(gamma_values, u1, u2, sigma, alpha=0.05):
    """Analytic power of the two-sided test, averaged over coefficients.

    For a heteroscedasticity coefficient gamma the contrast mean is
    gamma * (u1 - u2), so with a = (u1 - u2) / sqrt(s11 - 2 s12 + s22) the
    per-coefficient power is
    1 - Phi(z_{1-alpha/2} - gamma a) + Phi(z_{alpha/2} - gamma a).
    At gamma = 0 the expression reduces exactly to alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    var = contrast_variance(sigma)
    if not var > 0.0:
        raise ValueError("contrast variance must be positive")
    gamma_values = np.atleast_1d(np.asarray(gamma_values, dtype=float))
    a = (u1 - u2) / np.sqrt(var)
    hi = ndtri(1.0 - alpha / 2.0)
    lo = ndtri(alpha / 2.0)
    shift = gamma_values * a
    power = (1.0 - ndtr(hi - shift)) + ndtr(lo - shift)
    return float(power.mean())


def empirical_rates(p_values, support, alpha=0.05):
    """False and true positive proportions of the marginal decisions.

    Arguments
    ---------
    p_values : (R, p) array of per-replication p-values.
    support : boolean mask of length p marking the truly heteroscedastic
        coordinates (one per nonnull coefficient).
    alpha : significance level.

    Returns (fp, tp); fp is None when every coordinate is nonnull and tp is
    None when none is.
    """
    p_values = np.atleast_2d(np.asarray(p_values, dtype=float))
    support = np.asarray(support, dtype=bool)
    if support.size != p_values.shape[1]:
        raise ValueError("support mask length must match the p-value columns")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    reject = p_values <= alpha
    fp = None if support.all() else float(reject[:, ~support].mean())
    tp = None if not support.any() else float(reject[:, support].mean())
    return fp, tp
