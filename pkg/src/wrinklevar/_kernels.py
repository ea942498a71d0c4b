"""Per-node energy density kernels used by the assembly loop.

Inputs are flat arrays over quadrature nodes: the planar gradient entries
``H11, H12, H21, H22``, the slope ``g1, g2`` of w and the curvature entries
``k11, k12, k22``.  Outputs are the weighted membrane and bending sums and,
optionally, the weighted partial derivatives

* ``dH`` (N, 4): d/dH11, d/dH12, d/dH21, d/dH22 (chain rule through J)
* ``dg`` (N, 2): d/dg1, d/dg2
* ``dk`` (N, 3): d/dk11, d/dk12, d/dk22 with k12 a single variable

Two interchangeable implementations exist: a numba loop and a vectorized
numpy one.
"""
import numpy as np

from ._backend import default_backend, njit


def density_numpy(H11, H12, H21, H22, g1, g2, k11, k12, k22, wq, c1, c2, D, nu,
                  want_grad=True):
    F2 = H11 * H11 + H12 * H12 + H21 * H21 + H22 * H22 + g1 * g1 + g2 * g2
    J = H11 * H22 - H12 * H21
    Jm2 = 1.0 / (J * J)
    mem = c1 * (F2 + Jm2 - 3.0) + c2 * (J * J + F2 * Jm2 - 3.0)
    tr = k11 + k22
    bend = 0.5 * D * (tr * tr - 2.0 * (1.0 - nu) * (k11 * k22 - k12 * k12))
    mem_sum = float(np.dot(wq, mem))
    bend_sum = float(np.dot(wq, bend))
    if not want_grad:
        return mem_sum, bend_sum, None, None, None
    s = 2.0 * (c1 + c2 * Jm2) * wq
    dJ = (-2.0 * c1 * Jm2 / J + 2.0 * c2 * J - 2.0 * c2 * F2 * Jm2 / J) * wq
    dH = np.empty((J.size, 4))
    dH[:, 0] = s * H11 + dJ * H22
    dH[:, 1] = s * H12 - dJ * H21
    dH[:, 2] = s * H21 - dJ * H12
    dH[:, 3] = s * H22 + dJ * H11
    dg = np.empty((J.size, 2))
    dg[:, 0] = s * g1
    dg[:, 1] = s * g2
    dk = np.empty((J.size, 3))
    dk[:, 0] = D * (tr - (1.0 - nu) * k22) * wq
    dk[:, 1] = 2.0 * D * (1.0 - nu) * k12 * wq
    dk[:, 2] = D * (tr - (1.0 - nu) * k11) * wq
    return mem_sum, bend_sum, dH, dg, dk


@njit
def _density_loop(H11, H12, H21, H22, g1, g2, k11, k12, k22, wq, c1, c2, D, nu,
                  want_grad):
    n = H11.shape[0]
    dH = np.empty((n if want_grad else 0, 4))
    dg = np.empty((n if want_grad else 0, 2))
    dk = np.empty((n if want_grad else 0, 3))
    mem_sum = 0.0
    bend_sum = 0.0
    for i in range(n):
        F2 = (H11[i] * H11[i] + H12[i] * H12[i] + H21[i] * H21[i]
              + H22[i] * H22[i] + g1[i] * g1[i] + g2[i] * g2[i])
        J = H11[i] * H22[i] - H12[i] * H21[i]
        Jm2 = 1.0 / (J * J)
        mem = c1 * (F2 + Jm2 - 3.0) + c2 * (J * J + F2 * Jm2 - 3.0)
        tr = k11[i] + k22[i]
        bend = 0.5 * D * (tr * tr - 2.0 * (1.0 - nu)
                          * (k11[i] * k22[i] - k12[i] * k12[i]))
        mem_sum += wq[i] * mem
        bend_sum += wq[i] * bend
        if want_grad:
            s = 2.0 * (c1 + c2 * Jm2) * wq[i]
            dJ = (-2.0 * c1 * Jm2 / J + 2.0 * c2 * J
                  - 2.0 * c2 * F2 * Jm2 / J) * wq[i]
            dH[i, 0] = s * H11[i] + dJ * H22[i]
            dH[i, 1] = s * H12[i] - dJ * H21[i]
            dH[i, 2] = s * H21[i] - dJ * H12[i]
            dH[i, 3] = s * H22[i] + dJ * H11[i]
            dg[i, 0] = s * g1[i]
            dg[i, 1] = s * g2[i]
            dk[i, 0] = D * (tr - (1.0 - nu) * k22[i]) * wq[i]
            dk[i, 1] = 2.0 * D * (1.0 - nu) * k12[i] * wq[i]
            dk[i, 2] = D * (tr - (1.0 - nu) * k11[i]) * wq[i]
    return mem_sum, bend_sum, dH, dg, dk


def density_numba(H11, H12, H21, H22, g1, g2, k11, k12, k22, wq, c1, c2, D, nu,
                  want_grad=True):
    mem, bend, dH, dg, dk = _density_loop(
        H11, H12, H21, H22, g1, g2, k11, k12, k22, wq,
        float(c1), float(c2), float(D), float(nu), bool(want_grad),
    )
    if not want_grad:
        return mem, bend, None, None, None
    return mem, bend, dH, dg, dk


KERNELS = {"numpy": density_numpy, "numba": density_numba}


def get_density_kernel(backend=None):
    return KERNELS[backend or default_backend()]


# -- energy differences ------------------------------------------------------
#
# W(z + dz) - W(z) written so that every term is proportional to dz; the
# result keeps its relative accuracy even when it is far below eps * W(z).


def change_numpy(z, dz, wq, c1, c2, D, nu):
    H11, H12, H21, H22, g1, g2, k11, k12, k22 = z
    d11, d12, d21, d22, e1, e2, l11, l12, l22 = dz
    dF2 = ((2 * H11 + d11) * d11 + (2 * H12 + d12) * d12 + (2 * H21 + d21) * d21
           + (2 * H22 + d22) * d22 + (2 * g1 + e1) * e1 + (2 * g2 + e2) * e2)
    F2 = H11 * H11 + H12 * H12 + H21 * H21 + H22 * H22 + g1 * g1 + g2 * g2
    J = H11 * H22 - H12 * H21
    dJ = H11 * d22 + d11 * H22 + d11 * d22 - H12 * d21 - d12 * H21 - d12 * d21
    Jn = J + dJ
    S = J + Jn
    dJm2 = -dJ * S / (J * J * Jn * Jn)
    dJ2 = dJ * S
    dF2Jm2 = dF2 / (Jn * Jn) + F2 * dJm2
    mem = c1 * (dF2 + dJm2) + c2 * (dJ2 + dF2Jm2)
    tr, dtr = k11 + k22, l11 + l22
    ddet = k11 * l22 + l11 * k22 + l11 * l22 - 2.0 * k12 * l12 - l12 * l12
    bend = 0.5 * D * ((2.0 * tr + dtr) * dtr - 2.0 * (1.0 - nu) * ddet)
    return float(np.dot(wq, mem + bend)), float(np.min(Jn))


@njit
def _change_loop(z, dz, wq, c1, c2, D, nu):
    n = wq.shape[0]
    total = 0.0
    minJ = np.inf
    for i in range(n):
        H11, H12, H21, H22 = z[0, i], z[1, i], z[2, i], z[3, i]
        g1, g2, k11, k12, k22 = z[4, i], z[5, i], z[6, i], z[7, i], z[8, i]
        d11, d12, d21, d22 = dz[0, i], dz[1, i], dz[2, i], dz[3, i]
        e1, e2, l11, l12, l22 = dz[4, i], dz[5, i], dz[6, i], dz[7, i], dz[8, i]
        dF2 = ((2 * H11 + d11) * d11 + (2 * H12 + d12) * d12
               + (2 * H21 + d21) * d21 + (2 * H22 + d22) * d22
               + (2 * g1 + e1) * e1 + (2 * g2 + e2) * e2)
        F2 = H11 * H11 + H12 * H12 + H21 * H21 + H22 * H22 + g1 * g1 + g2 * g2
        J = H11 * H22 - H12 * H21
        dJ = H11 * d22 + d11 * H22 + d11 * d22 - H12 * d21 - d12 * H21 - d12 * d21
        Jn = J + dJ
        if Jn < minJ:
            minJ = Jn
        S = J + Jn
        dJm2 = -dJ * S / (J * J * Jn * Jn)
        dJ2 = dJ * S
        dF2Jm2 = dF2 / (Jn * Jn) + F2 * dJm2
        mem = c1 * (dF2 + dJm2) + c2 * (dJ2 + dF2Jm2)
        tr, dtr = k11 + k22, l11 + l22
        ddet = k11 * l22 + l11 * k22 + l11 * l22 - 2.0 * k12 * l12 - l12 * l12
        bend = 0.5 * D * ((2.0 * tr + dtr) * dtr - 2.0 * (1.0 - nu) * ddet)
        total += wq[i] * (mem + bend)
    return total, minJ


def change_numba(z, dz, wq, c1, c2, D, nu):
    return _change_loop(np.ascontiguousarray(z), np.ascontiguousarray(dz), wq,
                        float(c1), float(c2), float(D), float(nu))


CHANGE_KERNELS = {"numpy": change_numpy, "numba": change_numba}


def get_change_kernel(backend=None):
    return CHANGE_KERNELS[backend or default_backend()]
