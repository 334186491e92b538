# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise kernels for the expectile AMP inner loop.

These are the per-iteration O(n) / O(p) passes: branch counting, the effective
score of the asymmetric squared loss, its proximal map, and soft-thresholding
with a support count.  The matrix-vector products stay in BLAS either way, so
this module only carries the elementwise work.

``npamp._kernels_py`` is a pure numpy twin with identical per-element
expression order; the two backends produce bit-identical output.
"""

from libc.math cimport fabs


def count_le(const double[::1] z, double u):
    """Number of entries with z[i] <= u."""
    cdef Py_ssize_t i, n = z.shape[0]
    cdef Py_ssize_t c = 0
    for i in range(n):
        if z[i] <= u:
            c += 1
    return c


def score_into(const double[::1] z, double tau, double u, double b,
               double scale, double[::1] out):
    """Write scale * G_tilde(z[i]; b) into out, where G_tilde = z - Prox(z; b).

    The effective score of the level-tau asymmetric squared loss centered at u
    is piecewise linear in z with slope 2b(1-tau)/(2b(1-tau)+1) on z <= u and
    2b*tau/(2b*tau+1) on z > u.
    """
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double a_le = 2.0 * b * (1.0 - tau)
    cdef double a_gt = 2.0 * b * tau
    cdef double f_le = a_le / (a_le + 1.0)
    cdef double f_gt = a_gt / (a_gt + 1.0)
    for i in range(n):
        if z[i] <= u:
            out[i] = (f_le * (z[i] - u)) * scale
        else:
            out[i] = (f_gt * (z[i] - u)) * scale


def prox_into(const double[::1] z, double tau, double u, double b,
              double[::1] out):
    """Write Prox(z[i]; b) of the level-tau asymmetric squared loss into out."""
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double a_le = 2.0 * b * (1.0 - tau)
    cdef double a_gt = 2.0 * b * tau
    cdef double num_le = a_le * u
    cdef double num_gt = a_gt * u
    cdef double den_le = a_le + 1.0
    cdef double den_gt = a_gt + 1.0
    for i in range(n):
        if z[i] <= u:
            out[i] = (z[i] + num_le) / den_le
        else:
            out[i] = (z[i] + num_gt) / den_gt


def soft_threshold_into(const double[::1] x, double theta, double[::1] out):
    """Write eta(x[i]; theta) = sign(x[i]) * max(|x[i]| - theta, 0) into out.

    Returns the number of nonzero outputs.
    """
    cdef Py_ssize_t i, n = x.shape[0]
    cdef Py_ssize_t support = 0
    cdef double t
    for i in range(n):
        t = fabs(x[i]) - theta
        if t <= 0.0:
            out[i] = 0.0
        else:
            out[i] = t if x[i] > 0.0 else -t
            support += 1
    return support
