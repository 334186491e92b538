"""l1-penalized expectile regression solved by approximate message passing.

One iteration carries three coupled updates: a residual step with a memory
(Onsager) correction, a scale parameter b chosen so the effective score has
unit average slope over the current residuals, and a soft-threshold step on
the debiased coordinates.  The threshold is alpha times the empirical score
scale zeta, and the grid of alpha values is resolved by keeping the converged
fit with the smallest zeta.

At tau = 0.5 with u = 0 the recursion collapses to the classic message-passing
iteration for the lasso, which is what the equivalence tests exploit.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError
from .expectile import ExpectileSpec

DEFAULT_ALPHA_GRID = tuple(0.5 + 0.25 * i for i in range(11))
DEFAULT_MAX_ITER = 200
DEFAULT_TOL = 1e-6

_B_BRACKET = (1e-8, 1e8)
_B_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    """A response vector y (length n) and design matrix x (n rows, p columns)."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if y.ndim != 1 or x.ndim != 2:
            raise ValueError("y must be 1-d and x must be 2-d")
        if x.shape[0] != y.size:
            raise ValueError(
                f"x has {x.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("y and x must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class AmpState:
    """Everything iteration t produced.

    beta_hat is the thresholded estimate, beta_tilde = beta_hat + x.T @ score
    the debiased coordinates, z the corrected residuals, b the prox scale,
    theta the threshold, zeta_emp the empirical score scale, support_size the
    nonzero count of beta_hat, omega the sparsity fraction used to rescale the
    score, and score the rescaled score vector G(z; b) itself.
    """

    t: int
    beta_hat: np.ndarray
    beta_tilde: np.ndarray
    z: np.ndarray
    b: float
    theta: float
    zeta_emp: float
    support_size: int
    omega: float
    score: np.ndarray


@dataclass(frozen=True, eq=False)
class AmpFit:
    """A finished run: final state plus convergence and tuning metadata."""

    state: AmpState
    converged: bool
    iterations: int
    alpha: float
    delta: float
    omega: float
    spec: ExpectileSpec

    @property
    def beta_hat(self):
        return self.state.beta_hat

    @property
    def beta_tilde(self):
        return self.state.beta_tilde

    @property
    def zeta_emp(self):
        return self.state.zeta_emp


def _score(z, b, spec, delta, omega):
    out = np.empty_like(z)
    kernels.score_into(z, spec.tau, spec.u, b, delta / omega, out)
    return out


def _solve_slope_equation(q, target, tau):
    """Root of q * c1(b) + (1 - q) * c2(b) = target in b.

    c1(b) = 2b(1-tau)/(2b(1-tau)+1) and c2(b) = 2b tau/(2b tau+1) both
    increase from 0 to 1, so the left side does too and the root is unique
    for target in (0, 1).  Bisection on [1e-8, 1e8] to 1e-10 on the equation
    value.
    """

    def gap(b):
        a_le = 2.0 * b * (1.0 - tau)
        a_gt = 2.0 * b * tau
        return q * a_le / (a_le + 1.0) + (1.0 - q) * a_gt / (a_gt + 1.0) - target

    lo, hi = _B_BRACKET
    if gap(lo) > 0.0 or gap(hi) < 0.0:
        raise NumericalError(
            "unit-slope equation has no root inside the bracket "
            f"[{lo:g}, {hi:g}]")
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        val = gap(mid)
        if abs(val) <= _B_TOL:
            return mid
        if val < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def update_b(z, support_size, n, spec, delta, omega):
    """Solve the unit-slope equation for the prox scale b over residuals z.

    The equation is s/n = c1(b) * (#{z_i <= u} / n) + c2(b) * (#{z_i > u} / n)
    with c1, c2 as in ``_solve_slope_equation``; ties z_i = u count in the
    first branch.  A root exists iff 0 < s < n, and it is unique.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.size != n:
        raise ValueError(f"z has {z.size} entries but n = {n}")
    if support_size <= 0:
        raise ValueError(
            "support_size must be positive (callers substitute 1 for an "
            "empty support)")
    if support_size >= n:
        raise NumericalError(
            f"support_size {support_size} >= n {n}: the unit-slope equation "
            "has no finite root")
    q = kernels.count_le(z, spec.u) / n
    return _solve_slope_equation(q, support_size / n, spec.tau)


def adjust_residuals(data, state, prev_state, spec, delta, omega=None):
    """Residuals y - x @ beta_hat plus the memory correction.

    The correction is (k/n) * G(z_prev; b_prev) where k counts the nonzero
    coordinates of eta(beta_hat_prev + x.T @ G(z_prev; b_prev); theta_prev).
    With prev_state None (iteration 0) the correction is absent.  omega
    defaults to the sparsity fraction stored in prev_state, which is the one
    its score was rescaled with.
    """
    resid = data.y - data.x @ state.beta_hat
    if prev_state is None:
        return resid
    if omega is None:
        omega = prev_state.omega
    g_prev = _score(prev_state.z, prev_state.b, spec, delta, omega)
    arg = prev_state.beta_hat + data.x.T @ g_prev
    thresholded = np.empty_like(arg)
    k = kernels.soft_threshold_into(arg, prev_state.theta, thresholded)
    return resid + (k / data.n) * g_prev


def amp_iterate(data, state, spec, delta, alpha, omega=None):
    """Advance the recursion one step from the completed iteration ``state``.

    Thresholds the debiased coordinates, recomputes corrected residuals, the
    prox scale b, the score and its empirical scale zeta, the threshold
    theta = alpha * zeta, and the next debiased coordinates.  The sparsity
    fraction omega is refreshed to max(support, 1)/p from the fresh threshold
    step unless an explicit omega is supplied; the same count feeds the
    unit-slope equation, which keeps the score scale and the b equation
    coupled.
    """
    x, y = data.x, data.y
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least two observations")
    beta_next = np.empty(p)
    k = kernels.soft_threshold_into(state.beta_tilde, state.theta, beta_next)
    # Memory correction: k equals the count in adjust_residuals because
    # beta_tilde stores beta_hat + x.T @ score from the previous step.
    z_next = (y - x @ beta_next) + (k / n) * state.score
    if omega is None:
        s_eff = max(k, 1)
        omega_next = s_eff / p
    else:
        if not 0.0 < omega < 1.0:
            raise ValueError("omega must be in (0, 1)")
        omega_next = omega
        s_eff = max(int(round(omega * p)), 1)
    b_next = update_b(z_next, s_eff, n, spec, delta, omega_next)
    g = _score(z_next, b_next, spec, delta, omega_next)
    zeta = float(np.sqrt((g @ g) / n))
    if not np.isfinite(zeta):
        raise NumericalError("score scale became non-finite")
    theta_next = alpha * zeta
    beta_tilde_next = beta_next + x.T @ g
    if not np.all(np.isfinite(beta_tilde_next)):
        raise NumericalError("debiased coordinates became non-finite")
    return AmpState(
        t=state.t + 1,
        beta_hat=beta_next,
        beta_tilde=beta_tilde_next,
        z=z_next,
        b=b_next,
        theta=theta_next,
        zeta_emp=zeta,
        support_size=k,
        omega=omega_next,
        score=g,
    )


def initial_state(data, spec, delta, omega0, s0, alpha):
    """Iteration 0: beta_hat = 0, z = y, and the b/score/threshold trio."""
    n, p = data.x.shape
    z0 = data.y.copy()
    b0 = update_b(z0, s0, n, spec, delta, omega0)
    g0 = _score(z0, b0, spec, delta, omega0)
    zeta0 = float(np.sqrt((g0 @ g0) / n))
    if not np.isfinite(zeta0):
        raise NumericalError("score scale became non-finite at iteration 0")
    return AmpState(
        t=0,
        beta_hat=np.zeros(p),
        beta_tilde=data.x.T @ g0,
        z=z0,
        b=b0,
        theta=alpha * zeta0,
        zeta_emp=zeta0,
        support_size=0,
        omega=omega0,
        score=g0,
    )


def _run_single_alpha(data, spec, delta, omega0, s0, alpha, max_iter, tol):
    state = initial_state(data, spec, delta, omega0, s0, alpha)
    converged = False
    for _ in range(max_iter):
        new = amp_iterate(data, state, spec, delta, alpha)
        rel = float(np.linalg.norm(new.beta_hat - state.beta_hat))
        rel /= max(1.0, float(np.linalg.norm(state.beta_hat)))
        state = new
        if rel < tol:
            converged = True
            break
    return AmpFit(
        state=state,
        converged=converged,
        iterations=state.t,
        alpha=alpha,
        delta=delta,
        omega=state.omega,
        spec=spec,
    )


def run_amp(data, spec, delta=None, omega_init=None,
            alpha_grid=DEFAULT_ALPHA_GRID, max_iter=DEFAULT_MAX_ITER,
            tol=DEFAULT_TOL):
    """Fit the penalized expectile regression over a grid of alpha values.

    Arguments
    ---------
    data : Dataset
        Observations; requires 2 <= n <= p.
    spec : ExpectileSpec
        Expectile level tau and center u.
    delta : float, optional
        Aspect ratio n/p; computed from the data when omitted.
    omega_init : float, optional
        Sparsity fraction for iteration 0.  Defaults to max(floor(0.05 p), 1)/p;
        subsequent iterations refresh it to max(support, 1)/p.
    alpha_grid : sequence of float
        Threshold multipliers to try; the converged fit with the smallest
        empirical score scale zeta wins.
    max_iter, tol : int, float
        Per-alpha iteration cap and relative-change stopping tolerance on
        beta_hat.

    Returns
    -------
    AmpFit.  If no alpha converged, the best-effort fit (smallest zeta among
    the completed runs) is returned with ``converged=False``.  Raises
    NumericalError if every alpha failed outright.
    """
    n, p = data.x.shape
    if n < 2:
        raise ValueError("need at least two observations")
    if n > p:
        raise ValueError(
            f"n = {n} > p = {p}: only underdetermined designs are supported")
    if delta is None:
        delta = n / p
    if not delta > 0:
        raise ValueError("delta must be positive")
    if omega_init is None:
        s0 = max(int(0.05 * p), 1)
    else:
        if not 0.0 < omega_init < 1.0:
            raise ValueError("omega_init must be in (0, 1)")
        s0 = max(int(round(omega_init * p)), 1)
    omega0 = s0 / p
    alpha_grid = tuple(alpha_grid)
    if not alpha_grid or any(a <= 0 for a in alpha_grid):
        raise ValueError("alpha_grid must be nonempty with positive entries")

    candidates = []
    failures = []
    for alpha in alpha_grid:
        try:
            candidates.append(_run_single_alpha(
                data, spec, delta, omega0, s0, alpha, max_iter, tol))
        except NumericalError as exc:
            failures.append(f"alpha={alpha:g}: {exc}")
    if not candidates:
        raise NumericalError(
            "every alpha in the grid failed: " + "; ".join(failures))
    converged = [fit for fit in candidates if fit.converged]
    pool = converged if converged else candidates
    return min(pool, key=lambda fit: fit.state.zeta_emp)


@dataclass(frozen=True)
class SolverSettings:
    """Bundled run_amp options for the joint, testing, and simulation layers."""

    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    omega_init: float = None
    delta: float = None

    def run(self, data, spec):
        return run_amp(data, spec, delta=self.delta, omega_init=self.omega_init,
                       alpha_grid=self.alpha_grid, max_iter=self.max_iter,
                       tol=self.tol)
