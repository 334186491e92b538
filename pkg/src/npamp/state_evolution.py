"""Deterministic scalar recursion tracking the message-passing iterates.

Two coupled scales are propagated: sigma_bar_sq, the effective residual
variance, and zeta_bar_sq, the variance of the debiased coordinates.  One
step maps (zeta, theta) to the soft-threshold denoising risk, divides by the
aspect ratio delta to get the new sigma_bar_sq, re-solves the population
unit-slope equation for the prox scale b, and evaluates the second moment of
the rescaled score at the new residual law epsilon + sigma_bar * Z.  The
full recursion refreshes the sparsity fraction omega each step to the
limiting nonzero fraction of the denoiser, the population analog of the
solver's per-iteration support refresh.

Expectations are Monte-Carlo averages over a fixed seeded draw set, so the
recursion is deterministic for a given seed.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .amp import _solve_slope_equation

DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class SeParams:
    """One iteration of the scalar recursion."""

    sigma_bar_sq: float
    zeta_bar_sq: float
    theta: float
    b: float
    omega: float = None


@dataclass(frozen=True, eq=False)
class SignalPrior:
    """Distribution of a single signal coordinate, stored as equally weighted
    atoms (the empirical measure of a coefficient vector)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("prior needs at least one finite atom")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_vector(cls, beta):
        """Empirical measure of the coordinates of ``beta``."""
        return cls(np.asarray(beta, dtype=float))

    @classmethod
    def point_mass(cls, value=0.0):
        return cls(np.array([value], dtype=float))

    @classmethod
    def sparse_gaussian(cls, p, s, scale=3.0, seed=0):
        """p atoms of which s are scale * N(0, 1) draws and the rest zero."""
        if not 0 <= s <= p:
            raise ValueError("need 0 <= s <= p")
        rng = np.random.default_rng(seed)
        v = np.zeros(p)
        v[:s] = scale * rng.standard_normal(s)
        return cls(v)

    def second_moment(self):
        return float(np.mean(self.values ** 2))

    def nonzero_fraction(self):
        return np.count_nonzero(self.values) / self.values.size

    def sample(self, rng, size):
        return rng.choice(self.values, size=size, replace=True)


def _denoise_stage(prior, zeta, theta, mc_samples, seed):
    """(risk, nonzero fraction) of soft-thresholding B + zeta Z at theta."""
    if zeta < 0 or theta < 0:
        raise ValueError("zeta and theta must be nonnegative")
    rng = np.random.default_rng([seed, 0x5e])
    b_draw = prior.sample(rng, mc_samples)
    noisy = b_draw + zeta * rng.standard_normal(mc_samples)
    denoised = np.empty_like(noisy)
    support = kernels.soft_threshold_into(noisy, theta, denoised)
    return float(np.mean((denoised - b_draw) ** 2)), support / mc_samples


def amse(prior, zeta, theta, mc_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Soft-threshold denoising risk E[(eta(B + zeta Z; theta) - B)^2].

    B is drawn from ``prior`` and Z is standard normal; the average uses
    mc_samples seeded draws.
    """
    return _denoise_stage(prior, zeta, theta, mc_samples, seed)[0]


def _residual_stage(sigma_bar_sq, err_dist, spec, delta, omega, alpha,
                    mc_samples, seed):
    """Population b, zeta_bar_sq, and theta at residual law eps + sigma * Z."""
    rng = np.random.default_rng([seed, 0xe5])
    w = err_dist.sample(rng, mc_samples) \
        + np.sqrt(sigma_bar_sq) * rng.standard_normal(mc_samples)
    w = np.ascontiguousarray(w)
    q = kernels.count_le(w, spec.u) / mc_samples
    b = _solve_slope_equation(q, omega / delta, spec.tau)
    g = np.empty_like(w)
    kernels.score_into(w, spec.tau, spec.u, b, delta / omega, g)
    zeta_bar_sq = float(np.mean(g * g))
    return SeParams(
        sigma_bar_sq=float(sigma_bar_sq),
        zeta_bar_sq=zeta_bar_sq,
        theta=alpha * float(np.sqrt(zeta_bar_sq)),
        b=b,
        omega=float(omega),
    )


def initial_params(prior, err_dist, spec, delta, omega, alpha,
                   mc_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Iteration 0 of the recursion, seeded with sigma_bar_sq = E[B^2]/delta."""
    sigma0 = prior.second_moment() / delta
    return _residual_stage(sigma0, err_dist, spec, delta, omega, alpha,
                           mc_samples, seed)


def se_step(prev, prior, err_dist, spec, delta, omega, alpha,
            mc_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Advance the recursion one step from ``prev``."""
    if not delta > 0 or not 0 < omega < 1:
        raise ValueError("need delta > 0 and omega in (0, 1)")
    risk = amse(prior, float(np.sqrt(prev.zeta_bar_sq)), prev.theta,
                mc_samples, seed)
    return _residual_stage(risk / delta, err_dist, spec, delta, omega, alpha,
                           mc_samples, seed)


def run_state_evolution(prior, err_dist, spec, delta, omega, alpha,
                        iterations=50, mc_samples=DEFAULT_MC_SAMPLES, seed=0,
                        refresh_omega=True):
    """Run the recursion for a fixed number of steps.

    ``omega`` seeds iteration 0.  With refresh_omega (the default) every later
    step re-solves its b equation at the limiting nonzero fraction
    P(eta(B + zeta Z; theta) != 0) of the denoising stage, floored at one
    atom, which mirrors the per-iteration support refresh of the solver; pass
    refresh_omega=False to hold omega fixed throughout.

    Returns the trajectory as a list of SeParams (iteration 0 first).  With a
    fixed seed the same draw set is reused in every step, so the trajectory
    is deterministic and its fixed point is crisp.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    params = initial_params(prior, err_dist, spec, delta, omega, alpha,
                            mc_samples, seed)
    trajectory = [params]
    floor = 1.0 / prior.values.size
    for _ in range(iterations - 1):
        risk, frac = _denoise_stage(prior, float(np.sqrt(params.zeta_bar_sq)),
                                    params.theta, mc_samples, seed)
        if refresh_omega:
            omega = max(frac, floor)
        params = _residual_stage(risk / delta, err_dist, spec, delta, omega,
                                 alpha, mc_samples, seed)
        trajectory.append(params)
    return trajectory
