"""Design decorrelation by flattening the singular-value spectrum.

For an n x p design with n <= p, the transform F = sqrt(p/n) U D_hat U^T is
built from the thin SVD X = U D V^T, where D_hat inverts each singular value
above 1/sqrt(n) and replaces the rest by sqrt(n).  Applying F to (y, X)
preserves the linear model exactly and gives the transformed design equal
singular values sqrt(p/n) whenever the original spectrum is nondegenerate,
which restores the spectral conditions the message-passing theory needs.
"""

from dataclasses import dataclass

import numpy as np

from .amp import Dataset


@dataclass(frozen=True, eq=False)
class PufferTransform:
    """The flattening matrix f (n x n), the adjusted inverse spectrum d_hat,
    and the original singular values."""

    f: np.ndarray
    d_hat: np.ndarray
    singular_values: np.ndarray


def puffer_transform(data):
    """Flatten the design spectrum; returns (transformed Dataset, transform).

    Left singular vectors use a deterministic sign convention (first nonzero
    entry positive), so the transform does not depend on the sign choices of
    the SVD routine.  The threshold rule is exact: d_hat_i = sqrt(n) when
    d_i <= 1/sqrt(n), else 1/d_i.
    """
    x, y = data.x, data.y
    n, p = x.shape
    if n > p:
        raise ValueError(f"n = {n} > p = {p}: the transform needs n <= p")
    u, d, vt = np.linalg.svd(x, full_matrices=False)
    # Deterministic column signs for u (rows of vt flip along).
    idx = np.argmax(u != 0.0, axis=0)
    lead = u[idx, np.arange(u.shape[1])]
    flip = np.where(lead < 0.0, -1.0, 1.0)
    u = u * flip
    vt = vt * flip[:, None]
    root_n = np.sqrt(n)
    d_hat = np.empty_like(d)
    small = d <= 1.0 / root_n
    d_hat[small] = root_n
    d_hat[~small] = 1.0 / d[~small]
    f = np.sqrt(p / n) * ((u * d_hat) @ u.T)
    transformed = Dataset(f @ y, f @ x)
    return transformed, PufferTransform(f=f, d_hat=d_hat, singular_values=d)
