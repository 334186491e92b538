"""Asymmetric squared (expectile) loss: loss, subgradient, prox, scores,
soft-thresholding, and sample / population expectiles.

The level-tau loss centered at u is rho(x) = |tau - 1{x <= u}| * (x - u)^2.
Its prox has a closed two-branch form, and the effective score
G_tilde(z; b) = b * rho'(Prox(z; b)) = z - Prox(z; b) is piecewise linear in z.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class ExpectileSpec:
    """An expectile level tau in (0, 1) together with its center u."""

    tau: float
    u: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if not np.isfinite(self.u):
            raise ValueError("u must be finite")


def _as_1d(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    return arr.reshape(-1), arr.ndim == 0


def _restore(out, scalar, like):
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(like))


def expectile_loss(x, spec):
    """Evaluate rho_tau(x; u) = |tau - 1{x <= u}| * (x - u)^2 elementwise."""
    x = np.asarray(x, dtype=float)
    w = np.where(x <= spec.u, 1.0 - spec.tau, spec.tau)
    return w * (x - spec.u) ** 2


def expectile_subgradient(x, spec):
    """Evaluate rho'(x) = 2 |1{x <= u} - tau| * (x - u) elementwise."""
    x = np.asarray(x, dtype=float)
    w = np.where(x <= spec.u, 1.0 - spec.tau, spec.tau)
    return 2.0 * w * (x - spec.u)


def prox_expectile(z, b, spec):
    """Proximal map argmin_x { b * rho(x) + (x - z)^2 / 2 } of the loss.

    Closed form: (z + 2b(1-tau)u) / (2b(1-tau) + 1) on z <= u and
    (z + 2b*tau*u) / (2b*tau + 1) on z > u.
    """
    if not b > 0:
        raise ValueError("prox parameter b must be positive")
    flat, scalar = _as_1d(z)
    out = np.empty_like(flat)
    kernels.prox_into(flat, spec.tau, spec.u, b, out)
    return _restore(out, scalar, z)


def effective_score(z, b, spec):
    """Effective score G_tilde(z; b) = b * rho'(Prox(z; b)) = z - Prox(z; b)."""
    if not b > 0:
        raise ValueError("prox parameter b must be positive")
    flat, scalar = _as_1d(z)
    out = np.empty_like(flat)
    kernels.score_into(flat, spec.tau, spec.u, b, 1.0, out)
    return _restore(out, scalar, z)


def rescaled_score(z, b, spec, delta, omega):
    """Rescaled score G(z; b) = (delta / omega) * G_tilde(z; b)."""
    if not b > 0:
        raise ValueError("prox parameter b must be positive")
    if not delta > 0 or not omega > 0:
        raise ValueError("delta and omega must be positive")
    flat, scalar = _as_1d(z)
    out = np.empty_like(flat)
    kernels.score_into(flat, spec.tau, spec.u, b, delta / omega, out)
    return _restore(out, scalar, z)


def soft_threshold(x, theta):
    """Soft threshold eta(x; theta) = sign(x) * max(|x| - theta, 0)."""
    if theta < 0:
        raise ValueError("threshold must be nonnegative")
    flat, scalar = _as_1d(x)
    out = np.empty_like(flat)
    kernels.soft_threshold_into(flat, theta, out)
    return _restore(out, scalar, x)


def _bisect(f, lo, hi, tol=_BISECT_TOL):
    """Root of an increasing function by bisection; bracket is expanded
    geometrically if f(lo) > 0 or f(hi) < 0."""
    span = max(hi - lo, 1.0)
    for _ in range(200):
        if f(lo) <= 0.0:
            break
        lo -= span
        span *= 2.0
    else:
        raise RuntimeError("failed to bracket the root from below")
    span = max(hi - lo, 1.0)
    for _ in range(200):
        if f(hi) >= 0.0:
            break
        hi += span
        span *= 2.0
    else:
        raise RuntimeError("failed to bracket the root from above")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_expectile(values, tau):
    """The level-tau expectile of a sample.

    Solves u - mean(r) = ((2 tau - 1) / (1 - tau)) * mean((r - u) 1{r >= u})
    by bisection on the (strictly increasing) defining function.  Evaluation
    uses sorted suffix sums, so each step costs O(log n) after one sort.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    r = np.asarray(values, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("need at least one value")
    if not np.all(np.isfinite(r)):
        raise ValueError("values must be finite")
    rs = np.sort(r)
    if rs[0] == rs[-1]:
        return float(rs[0])
    n = rs.size
    mean = float(rs.mean())
    c = (2.0 * tau - 1.0) / (1.0 - tau)
    # suffix[i] = sum of rs[i:]
    suffix = np.concatenate([np.cumsum(rs[::-1])[::-1], [0.0]])

    def gap(u):
        i = np.searchsorted(rs, u, side="left")
        tail = suffix[i] - u * (n - i)
        return (u - mean) - c * tail / n

    return float(_bisect(gap, float(rs[0]), float(rs[-1])))


def distribution_expectile(dist, tau):
    """The level-tau expectile of an error law.

    Solves u - E[Y] = ((2 tau - 1) / (1 - tau)) * E[(Y - u)+] by bisection,
    starting from the bracket mean +/- 10 sd and expanding geometrically if
    needed.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    m = dist.mean()
    sd = dist.std()
    c = (2.0 * tau - 1.0) / (1.0 - tau)

    def gap(u):
        return (u - m) - c * dist.partial_moment(u)

    return float(_bisect(gap, m - 10.0 * sd, m + 10.0 * sd))
