"""Vectorized fallback implementation of the hot per-step kernels.

The per-node expression order matches ``_core.pyx`` exactly (and the
extension is compiled without FP contraction), so both backends produce
bit-identical output arrays.  All transcendentals (log, log1p) live in
shared driver code, never in a backend.
"""

import numpy as np

# Row layout of the `out` workspace filled by prepare().
ROW_UC = 0
ROW_UX = 1
ROW_UY = 2
ROW_GSQ = 3
ROW_UXX = 4
ROW_UYY = 5
ROW_UXY = 6
ROW_DET = 7
ROW_DENOM = 8
N_ROWS = 9


def prepare(u, ii, jj, hx, hy, out):
    """Evaluate the 9-point stencil at every interior node.

    Fills ``out`` (shape [9, K]) with the center value, central gradient,
    |Du|^2, second differences, Hessian determinant and the explicit-step
    denominator (uyy/hx^2 + uxx/hy^2 + |uxy|/(hx*hy)) / det.  The
    denominator is +inf where det <= 0.

    Returns (min_det, k_min_det, min_uxx, k_min_uxx, max_denom); argmins
    take the first occurrence in packed order.
    """
    uc = u[ii, jj]
    ue = u[ii + 1, jj]
    uw = u[ii - 1, jj]
    un = u[ii, jj + 1]
    us = u[ii, jj - 1]
    une = u[ii + 1, jj + 1]
    unw = u[ii - 1, jj + 1]
    use = u[ii + 1, jj - 1]
    usw = u[ii - 1, jj - 1]

    twohx = 2.0 * hx
    twohy = 2.0 * hy
    hx2 = hx * hx
    hy2 = hy * hy
    hxy4 = 4.0 * hx * hy
    hxy = hx * hy

    ux = (ue - uw) / twohx
    uy = (un - us) / twohy
    uxx = (ue - 2.0 * uc + uw) / hx2
    uyy = (un - 2.0 * uc + us) / hy2
    uxy = (une - use - unw + usw) / hxy4
    det = uxx * uyy - uxy * uxy
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = (uyy / hx2 + uxx / hy2 + np.abs(uxy) / hxy) / det
    denom[det <= 0.0] = np.inf

    out[ROW_UC] = uc
    out[ROW_UX] = ux
    out[ROW_UY] = uy
    out[ROW_GSQ] = ux * ux + uy * uy
    out[ROW_UXX] = uxx
    out[ROW_UYY] = uyy
    out[ROW_UXY] = uxy
    out[ROW_DET] = det
    out[ROW_DENOM] = denom

    k_det = int(np.argmin(det))
    k_uxx = int(np.argmin(uxx))
    return (
        float(det[k_det]),
        k_det,
        float(uxx[k_uxx]),
        k_uxx,
        float(np.max(denom)),
    )


def update(u, ii, jj, rhs, dt):
    """In-place explicit update u[interior] += dt * rhs."""
    u[ii, jj] += dt * rhs


def boundary(u, bi, bj, ci, cj, w, inc):
    """In-place boundary update: u[b] = sum_m w[b,m] * u[corner_m] + inc[b].

    Corners are interior nodes, so the writes never feed each other.  The
    4-term sum is accumulated left to right to match the compiled kernel.
    """
    g = u[ci, cj]
    s = ((w[:, 0] * g[:, 0] + w[:, 1] * g[:, 1]) + w[:, 2] * g[:, 2]) + w[:, 3] * g[:, 3]
    u[bi, bj] = s + inc
