"""Replicated simulation harness: scenario generation, the replication loop,
rate aggregation, and QQ export.

A scenario fixes the design matrix and the coefficient vectors with one seed
and redraws the errors with a second, per-replication seed, so error and
design randomness are isolated.  Replications run through joblib with an
order-preserving reduction; results are bit-reproducible for a given config
regardless of worker count.
"""

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import cholesky, toeplitz
from scipy.special import ndtri

from .amp import Dataset, SolverSettings
from .decorrelate import puffer_transform
from .distributions import ErrorDistribution
from .errors import NumericalError
from .expectile import ExpectileSpec, distribution_expectile
from .hettest import test_statistics
from .joint import estimate_u_levels, fit_joint

logger = logging.getLogger(__name__)

JOBS_ENV_VAR = "NPAMP_JOBS"
MAX_FAILURE_FRACTION = 0.05

_PROFILES = {
    "desk": dict(n=100, p=200, replications=100),
    "paper": dict(n=250, p=500, replications=400),
}


def _default_error():
    return ErrorDistribution.normal(0.0, 1.0, scale_sd=0.5)


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulation run depends on.

    The design matrix, beta0, and gamma0 are drawn once from design_seed and
    held fixed across replications (set redraw_design for a fresh draw each
    replication); errors are drawn per replication from error_seed.
    """

    n: int = 100
    p: int = 200
    beta_support: int = 5
    beta_scale: float = 3.0
    error: ErrorDistribution = field(default_factory=_default_error)
    heteroscedastic: bool = False
    gamma_pattern: tuple = (3.0, 1.0, -5.0, -5.0, -3.0)
    gamma_overlap: bool = False
    levels: tuple = (0.2, 0.8)
    test_alpha: float = 0.05
    use_true_u: bool = True
    replications: int = 100
    design_seed: int = 2024
    error_seed: int = 7
    ar_rho: float = None
    decorrelate: bool = False
    redraw_design: bool = False
    solver: SolverSettings = field(default_factory=SolverSettings)
    name: str = ""

    def __post_init__(self):
        if self.n < 2 or self.p < 1 or self.n > self.p:
            raise ValueError("need 2 <= n <= p")
        if not 0 <= self.beta_support <= self.p:
            raise ValueError("beta_support must be in [0, p]")
        if len(self.levels) != 2 or not all(0.0 < t < 1.0 for t in self.levels):
            raise ValueError("levels must be two expectile levels in (0, 1)")
        if self.levels[0] == self.levels[1]:
            raise ValueError("the two expectile levels must differ")
        if not 0.0 < self.test_alpha < 1.0:
            raise ValueError("test_alpha must be in (0, 1)")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.heteroscedastic:
            g = len(self.gamma_pattern)
            if g == 0:
                raise ValueError("gamma_pattern is empty")
            if self.gamma_overlap:
                if g > max(self.beta_support, 1):
                    raise ValueError(
                        "overlapping gamma support needs beta_support >= "
                        "len(gamma_pattern)")
            elif self.beta_support + g > self.p:
                raise ValueError(
                    "disjoint supports need beta_support + len(gamma_pattern) "
                    "<= p")
        if self.ar_rho is not None and not -1.0 < self.ar_rho < 1.0:
            raise ValueError("ar_rho must be in (-1, 1)")


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    """The coefficient vectors behind one generated dataset."""

    beta0: np.ndarray
    gamma0: np.ndarray

    @property
    def gamma_support(self):
        return self.gamma0 != 0.0


def _design_rng(cfg, replication):
    if cfg.redraw_design:
        return np.random.default_rng([cfg.design_seed, 104729, replication])
    return np.random.default_rng([cfg.design_seed])


def generate_scenario(cfg, replication):
    """Draw (Dataset, ScenarioTruth) for one replication of ``cfg``.

    The response follows y = x @ beta0 + (1 + x @ gamma0) * eps with iid
    errors from cfg.error; gamma0 is zero when cfg.heteroscedastic is off.
    Rows of x are N(0, I/n), or N(0, Sigma/n) with AR(1) Sigma when ar_rho is
    set.  Changing error_seed never changes (x, beta0, gamma0).
    """
    n, p = cfg.n, cfg.p
    rng_design = _design_rng(cfg, replication)
    w = rng_design.standard_normal((n, p))
    if cfg.ar_rho is None:
        x = w / np.sqrt(n)
    else:
        cov = toeplitz(cfg.ar_rho ** np.arange(p))
        x = w @ cholesky(cov, lower=False) / np.sqrt(n)
    order = rng_design.permutation(p)
    beta0 = np.zeros(p)
    s = cfg.beta_support
    beta0[order[:s]] = cfg.beta_scale * rng_design.standard_normal(s)
    gamma0 = np.zeros(p)
    if cfg.heteroscedastic:
        g = len(cfg.gamma_pattern)
        where = order[:g] if cfg.gamma_overlap else order[s:s + g]
        gamma0[where] = cfg.gamma_pattern
    rng_err = np.random.default_rng([cfg.error_seed, replication])
    eps = cfg.error.sample(rng_err, n)
    y = x @ beta0 + (1.0 + x @ gamma0) * eps
    return Dataset(y, x), ScenarioTruth(beta0=beta0, gamma0=gamma0)


def _simulate_one(cfg, replication, true_u):
    data, truth = generate_scenario(cfg, replication)
    if cfg.decorrelate:
        data, _ = puffer_transform(data)
    if true_u is not None:
        u_pair = true_u
    else:
        u_pair = estimate_u_levels(data, cfg.levels, cfg.solver)
    specs = tuple(ExpectileSpec(tau, u)
                  for tau, u in zip(cfg.levels, u_pair))
    joint = fit_joint(data, specs, cfg.solver)
    report = test_statistics(joint, cfg.test_alpha)
    return dict(
        p_value=report.p_value,
        t=report.t,
        sigma=joint.sigma,
        contrast_sd=report.contrast_sd,
        u=u_pair,
        degraded=joint.degraded,
        gamma_support=truth.gamma_support,
    )


def _guarded(cfg, replication, true_u):
    try:
        return "ok", _simulate_one(cfg, replication, true_u)
    except NumericalError as exc:
        return "fail", f"replication {replication}: {exc}"


@dataclass(frozen=True, eq=False)
class SimResult:
    """Aggregated simulation output.

    fp / tp are rejection proportions over null / nonnull coordinates and
    replications (None when the respective group is empty); null_t_pooled
    collects the null-coordinate statistics of every replication for QQ
    checks.  elapsed_seconds is informational and never serialized.
    """

    config: SimConfig
    fp: float
    tp: float
    p_values: np.ndarray
    t_stats: np.ndarray
    null_t_pooled: np.ndarray
    sigma_mean: np.ndarray
    contrast_sd_mean: float
    u_mean: tuple
    gamma_support: np.ndarray
    replications_used: int
    failures: int
    degraded: int
    elapsed_seconds: float

    def to_dict(self, full=False):
        out = {
            "name": self.config.name,
            "n": self.config.n,
            "p": self.config.p,
            "levels": list(self.config.levels),
            "alpha": self.config.test_alpha,
            "heteroscedastic": self.config.heteroscedastic,
            "fp": self.fp,
            "tp": self.tp,
            "replications_used": self.replications_used,
            "failures": self.failures,
            "degraded": self.degraded,
            "u": list(self.u_mean),
            "sigma_mean": self.sigma_mean.tolist(),
            "contrast_sd_mean": self.contrast_sd_mean,
        }
        if full:
            out["p_values"] = self.p_values.tolist()
            out["t_stats"] = self.t_stats.tolist()
            out["null_t_pooled"] = self.null_t_pooled.tolist()
            out["gamma_support"] = self.gamma_support.astype(int).tolist()
        return out


def resolve_jobs(n_jobs=None):
    """Worker count: explicit argument, else the NPAMP_JOBS variable, else 1."""
    if n_jobs is not None:
        return int(n_jobs)
    env = os.environ.get(JOBS_ENV_VAR)
    if env:
        return int(env)
    return 1


def run_simulation(cfg, n_jobs=None):
    """Run every replication of ``cfg`` and aggregate rejection rates.

    Replications that fail numerically are dropped; more than 5% of them
    failing aborts the run.  The reduction is sequential in replication
    order, so the result does not depend on the worker count.
    """
    start = time.monotonic()
    true_u = None
    if cfg.use_true_u:
        true_u = tuple(distribution_expectile(cfg.error, tau)
                       for tau in cfg.levels)
    jobs = resolve_jobs(n_jobs)
    outcomes = Parallel(n_jobs=jobs)(
        delayed(_guarded)(cfg, r, true_u) for r in range(cfg.replications))

    payloads = [payload for status, payload in outcomes if status == "ok"]
    messages = [payload for status, payload in outcomes if status == "fail"]
    failures = len(messages)
    if failures > MAX_FAILURE_FRACTION * cfg.replications:
        raise NumericalError(
            f"{failures} of {cfg.replications} replications failed: "
            + "; ".join(messages[:5]))
    if failures:
        logger.warning("excluded %d failed replications: %s", failures,
                       "; ".join(messages))
    if not payloads:
        raise NumericalError("no replication completed")

    p_values = np.vstack([pl["p_value"] for pl in payloads])
    t_stats = np.vstack([pl["t"] for pl in payloads])
    alpha = cfg.test_alpha
    null_parts = []
    null_hits = 0
    null_total = 0
    sup_hits = 0
    sup_total = 0
    for pl in payloads:
        mask = pl["gamma_support"]
        null_parts.append(pl["t"][~mask])
        null_hits += int(np.count_nonzero(pl["p_value"][~mask] <= alpha))
        null_total += int(np.count_nonzero(~mask))
        sup_hits += int(np.count_nonzero(pl["p_value"][mask] <= alpha))
        sup_total += int(np.count_nonzero(mask))
    fp = null_hits / null_total if null_total else None
    tp = sup_hits / sup_total if sup_total else None

    sigma_mean = np.mean([pl["sigma"] for pl in payloads], axis=0)
    u_mean = tuple(np.mean([pl["u"] for pl in payloads], axis=0))
    return SimResult(
        config=cfg,
        fp=fp,
        tp=tp,
        p_values=p_values,
        t_stats=t_stats,
        null_t_pooled=np.concatenate(null_parts),
        sigma_mean=sigma_mean,
        contrast_sd_mean=float(np.mean([pl["contrast_sd"]
                                        for pl in payloads])),
        u_mean=u_mean,
        gamma_support=payloads[0]["gamma_support"],
        replications_used=len(payloads),
        failures=failures,
        degraded=sum(int(pl["degraded"]) for pl in payloads),
        elapsed_seconds=time.monotonic() - start,
    )


def qq_export(values):
    """Sorted values paired with standard normal plotting quantiles.

    Returns an (m, 2) array with theoretical quantiles
    Phi^{-1}((i - 0.5) / m) in the first column and the sorted input in the
    second.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("need at least one value")
    m = v.size
    theo = ndtri((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([theo, v])


# -- built-in scenarios -----------------------------------------------------

_ERROR_MAKERS = {
    "normal": lambda: ErrorDistribution.normal(0.0, 1.0, scale_sd=0.5),
    "t3": lambda: ErrorDistribution.student_t(3.0, scale_sd=0.5),
    "laplace": lambda: ErrorDistribution.laplace(0.0, 1.0, scale_sd=0.5),
    "mixture1": lambda: ErrorDistribution.mixture_normal(
        [0.9, 0.1], [-0.2, 1.8], [0.25, 0.01]),
    "mixture2": lambda: ErrorDistribution.mixture_normal(
        [0.9, 0.1], [0.2, -1.8], [0.25, 0.01]),
    "mixture3": lambda: ErrorDistribution.mixture_normal(
        [0.95, 0.05], [0.0, 0.0], [0.25, 4.0]),
}


def _scenario_specs():
    specs = {}
    for err in _ERROR_MAKERS:
        specs[f"null_{err}"] = dict(error=err, heteroscedastic=False)
        specs[f"het_{err}"] = dict(error=err, heteroscedastic=True)
    specs["high_sparsity"] = dict(error="normal", heteroscedastic=True)
    specs["medium_sparsity"] = dict(error="normal", heteroscedastic=True,
                                    beta_support_fraction=0.1)  # s = 50 at paper scale
    for rho, tag in ((0.3, "03"), (0.7, "07")):
        specs[f"ar_null_{tag}"] = dict(error="normal", heteroscedastic=False,
                                       ar_rho=rho, decorrelate=True)
        specs[f"ar_het_{tag}"] = dict(error="normal", heteroscedastic=True,
                                      ar_rho=rho, decorrelate=True)
    return specs


SCENARIO_NAMES = tuple(sorted(_scenario_specs()))


def builtin_config(name, profile="desk", **overrides):
    """A named scenario at the given size profile.

    Profiles: ``desk`` (n=100, p=200, R=100) and ``paper`` (n=250, p=500,
    R=400).  Keyword overrides are applied on top (for example
    ``levels=(0.6, 0.8)`` or ``replications=10``).
    """
    specs = _scenario_specs()
    if name not in specs:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(SCENARIO_NAMES)}")
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}; available: desk, paper")
    spec = dict(specs[name])
    scale = dict(_PROFILES[profile])
    err = _ERROR_MAKERS[spec.pop("error")]()
    frac = spec.pop("beta_support_fraction", None)
    support = 5 if frac is None else max(int(round(frac * scale["p"])), 1)
    kwargs = dict(
        n=scale["n"],
        p=scale["p"],
        beta_support=support,
        error=err,
        replications=scale["replications"],
        name=name,
        **spec,
    )
    kwargs.update(overrides)
    return SimConfig(**kwargs)
