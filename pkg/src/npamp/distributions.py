"""Error-law catalogue for simulations and population-level calculations.

Each law knows its mean, standard deviation, how to sample, and its upper
partial moment E[(Y - u)+], which is what the expectile defining equation
integrates.  An optional post-scaling recenters the law to mean zero and
rescales it to a target standard deviation (the convention used by the
simulation scenarios for the unimodal laws).
"""

import numpy as np
from scipy import integrate, stats

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _normal_partial_moment(u, mu, sigma):
    # E[(Y - u)+] for Y ~ N(mu, sigma^2), by the standard closed form.
    a = (u - mu) / sigma
    return (mu - u) * stats.norm.sf(a) + sigma * np.exp(-0.5 * a * a) / _SQRT_2PI


class ErrorDistribution:
    """A univariate error law with optional center-and-rescale post-processing.

    Use the constructors ``normal``, ``student_t``, ``laplace``,
    ``mixture_normal`` and ``empirical`` rather than ``__init__`` directly.
    When ``scale_sd`` is set, the law is the affine image
    (Y - mean) * scale_sd / sd of the base law, so it has mean 0 and standard
    deviation ``scale_sd``.
    """

    def __init__(self, kind, params, scale_sd=None):
        if scale_sd is not None and not scale_sd > 0:
            raise ValueError("scale_sd must be positive")
        self.kind = kind
        self.params = params
        self.scale_sd = scale_sd

    @classmethod
    def normal(cls, mu=0.0, sigma=1.0, scale_sd=None):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return cls("normal", (float(mu), float(sigma)), scale_sd)

    @classmethod
    def student_t(cls, df, scale_sd=None):
        if not df > 2:
            raise ValueError("student_t needs df > 2 for a finite variance")
        return cls("student_t", (float(df),), scale_sd)

    @classmethod
    def laplace(cls, mu=0.0, b=1.0, scale_sd=None):
        if not b > 0:
            raise ValueError("laplace scale b must be positive")
        return cls("laplace", (float(mu), float(b)), scale_sd)

    @classmethod
    def mixture_normal(cls, weights, means, variances, scale_sd=None):
        w = np.asarray(weights, dtype=float)
        m = np.asarray(means, dtype=float)
        v = np.asarray(variances, dtype=float)
        if w.ndim != 1 or w.shape != m.shape or w.shape != v.shape:
            raise ValueError("weights, means, variances must be 1-d of equal length")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise ValueError("component variances must be positive")
        return cls("mixture_normal", (w, m, v), scale_sd)

    @classmethod
    def empirical(cls, samples, scale_sd=None):
        s = np.asarray(samples, dtype=float).ravel()
        if s.size < 2 or not np.all(np.isfinite(s)):
            raise ValueError("empirical law needs >= 2 finite samples")
        return cls("empirical", (s,), scale_sd)

    # -- base law (before post-scaling) -------------------------------------

    def _base_mean(self):
        if self.kind == "normal":
            return self.params[0]
        if self.kind == "student_t":
            return 0.0
        if self.kind == "laplace":
            return self.params[0]
        if self.kind == "mixture_normal":
            w, m, _ = self.params
            return float(w @ m)
        return float(self.params[0].mean())

    def _base_var(self):
        if self.kind == "normal":
            return self.params[1] ** 2
        if self.kind == "student_t":
            df = self.params[0]
            return df / (df - 2.0)
        if self.kind == "laplace":
            return 2.0 * self.params[1] ** 2
        if self.kind == "mixture_normal":
            w, m, v = self.params
            return float(w @ (v + m * m) - (w @ m) ** 2)
        return float(self.params[0].var())

    def _base_partial_moment(self, u):
        if self.kind == "normal":
            mu, sigma = self.params
            return _normal_partial_moment(u, mu, sigma)
        if self.kind == "student_t":
            df = self.params[0]
            val, _ = integrate.quad(lambda y: (y - u) * stats.t.pdf(y, df),
                                    u, np.inf, epsabs=1e-12, epsrel=1e-12)
            return val
        if self.kind == "laplace":
            mu, b = self.params
            if u >= mu:
                return 0.5 * b * np.exp(-(u - mu) / b)
            return (mu - u) + 0.5 * b * np.exp(-(mu - u) / b)
        if self.kind == "mixture_normal":
            w, m, v = self.params
            sds = np.sqrt(v)
            return float(sum(wi * _normal_partial_moment(u, mi, si)
                             for wi, mi, si in zip(w, m, sds)))
        s = self.params[0]
        return float(np.mean(np.clip(s - u, 0.0, None)))

    def _base_sample(self, rng, size):
        if self.kind == "normal":
            mu, sigma = self.params
            return rng.normal(mu, sigma, size)
        if self.kind == "student_t":
            return rng.standard_t(self.params[0], size)
        if self.kind == "laplace":
            mu, b = self.params
            return rng.laplace(mu, b, size)
        if self.kind == "mixture_normal":
            w, m, v = self.params
            comp = rng.choice(w.size, size=size, p=w)
            return rng.normal(m[comp], np.sqrt(v)[comp])
        return rng.choice(self.params[0], size=size, replace=True)

    # -- public law (after optional post-scaling) ---------------------------

    def _affine(self):
        """(shift, factor) such that the public law is (Y - shift) * factor."""
        if self.scale_sd is None:
            return 0.0, 1.0
        return self._base_mean(), self.scale_sd / np.sqrt(self._base_var())

    def mean(self):
        if self.scale_sd is not None:
            return 0.0
        return self._base_mean()

    def std(self):
        if self.scale_sd is not None:
            return self.scale_sd
        return float(np.sqrt(self._base_var()))

    def variance(self):
        return self.std() ** 2

    def partial_moment(self, u):
        """Upper partial moment E[(Y - u)+] of the law."""
        shift, factor = self._affine()
        return factor * self._base_partial_moment(shift + u / factor)

    def sample(self, rng, size):
        """Draw ``size`` variates using the generator ``rng``."""
        shift, factor = self._affine()
        return (self._base_sample(rng, size) - shift) * factor

    def scaled(self, target_sd):
        """The same base law, recentered to mean 0 and rescaled to ``target_sd``."""
        return ErrorDistribution(self.kind, self.params, scale_sd=float(target_sd))

    def __repr__(self):
        extra = "" if self.scale_sd is None else f", scale_sd={self.scale_sd}"
        if self.kind == "empirical":
            return f"ErrorDistribution(empirical, n={self.params[0].size}{extra})"
        return f"ErrorDistribution({self.kind}, {self.params}{extra})"
