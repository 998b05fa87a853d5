"""Compiled stencil kernels: 9-point gather, explicit update, boundary fill.

Per-node expression order mirrors ``_numpy`` exactly; the build disables FP
contraction so both backends agree bit for bit.
"""

from libc.math cimport fabs, INFINITY


def prepare(const double[:, ::1] u, const int[::1] ii, const int[::1] jj,
            double hx, double hy, double[:, ::1] out):
    """See kernels._numpy.prepare; identical contract and row layout."""
    cdef Py_ssize_t K = ii.shape[0]
    cdef Py_ssize_t k, k_det = 0, k_uxx = 0
    cdef int i, j
    cdef double uc, ue, uw, un, us, une, unw, use, usw
    cdef double ux, uy, uxx, uyy, uxy, det, denom
    cdef double twohx = 2.0 * hx
    cdef double twohy = 2.0 * hy
    cdef double hx2 = hx * hx
    cdef double hy2 = hy * hy
    cdef double hxy4 = 4.0 * hx * hy
    cdef double hxy = hx * hy
    cdef double min_det = INFINITY, min_uxx = INFINITY, max_denom = -INFINITY

    for k in range(K):
        i = ii[k]
        j = jj[k]
        uc = u[i, j]
        ue = u[i + 1, j]
        uw = u[i - 1, j]
        un = u[i, j + 1]
        us = u[i, j - 1]
        une = u[i + 1, j + 1]
        unw = u[i - 1, j + 1]
        use = u[i + 1, j - 1]
        usw = u[i - 1, j - 1]

        ux = (ue - uw) / twohx
        uy = (un - us) / twohy
        uxx = (ue - 2.0 * uc + uw) / hx2
        uyy = (un - 2.0 * uc + us) / hy2
        uxy = (une - use - unw + usw) / hxy4
        det = uxx * uyy - uxy * uxy
        if det > 0.0:
            denom = (uyy / hx2 + uxx / hy2 + fabs(uxy) / hxy) / det
        else:
            denom = INFINITY

        out[0, k] = uc
        out[1, k] = ux
        out[2, k] = uy
        out[3, k] = ux * ux + uy * uy
        out[4, k] = uxx
        out[5, k] = uyy
        out[6, k] = uxy
        out[7, k] = det
        out[8, k] = denom

        if det < min_det:
            min_det = det
            k_det = k
        if uxx < min_uxx:
            min_uxx = uxx
            k_uxx = k
        if denom > max_denom:
            max_denom = denom

    return min_det, k_det, min_uxx, k_uxx, max_denom


def update(double[:, ::1] u, const int[::1] ii, const int[::1] jj,
           const double[::1] rhs, double dt):
    """In-place explicit update u[interior] += dt * rhs."""
    cdef Py_ssize_t K = ii.shape[0]
    cdef Py_ssize_t k
    for k in range(K):
        u[ii[k], jj[k]] += dt * rhs[k]


def boundary(double[:, ::1] u, const int[::1] bi, const int[::1] bj,
             const int[:, ::1] ci, const int[:, ::1] cj, const double[:, ::1] w,
             const double[::1] inc):
    """In-place boundary fill: u[b] = sum_m w[b,m]*u[corner_m] + inc[b]."""
    cdef Py_ssize_t K = bi.shape[0]
    cdef Py_ssize_t k
    cdef double s
    for k in range(K):
        s = ((w[k, 0] * u[ci[k, 0], cj[k, 0]]
              + w[k, 1] * u[ci[k, 1], cj[k, 1]])
             + w[k, 2] * u[ci[k, 2], cj[k, 2]]) \
            + w[k, 3] * u[ci[k, 3], cj[k, 3]]
        u[bi[k], bj[k]] = s + inc[k]
