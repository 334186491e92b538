"""Pure numpy twin of the compiled kernels in ``_kernels.pyx``.

Per-element expression order matches the Cython source exactly, so the two
backends produce bit-identical output (checked by the backend equivalence
tests).
"""

import numpy as np


def count_le(z, u):
    """Number of entries with z[i] <= u."""
    return int(np.count_nonzero(z <= u))


def score_into(z, tau, u, b, scale, out):
    """Write scale * G_tilde(z[i]; b) into out, where G_tilde = z - Prox(z; b)."""
    a_le = 2.0 * b * (1.0 - tau)
    a_gt = 2.0 * b * tau
    f_le = a_le / (a_le + 1.0)
    f_gt = a_gt / (a_gt + 1.0)
    factor = np.where(z <= u, f_le, f_gt)
    np.multiply(factor * (z - u), scale, out=out)


def prox_into(z, tau, u, b, out):
    """Write Prox(z[i]; b) of the level-tau asymmetric squared loss into out."""
    a_le = 2.0 * b * (1.0 - tau)
    a_gt = 2.0 * b * tau
    out[...] = np.where(z <= u, (z + a_le * u) / (a_le + 1.0),
                        (z + a_gt * u) / (a_gt + 1.0))


def soft_threshold_into(x, theta, out):
    """Write eta(x[i]; theta) into out; return the number of nonzero outputs."""
    t = np.abs(x) - theta
    live = t > 0.0
    # the explicit zero branch keeps dead entries at +0.0, as in the
    # compiled kernel (np.sign(x) * 0.0 would give -0.0 for negative x)
    out[...] = np.where(live, np.where(x > 0.0, t, -t), 0.0)
    return int(np.count_nonzero(live))
