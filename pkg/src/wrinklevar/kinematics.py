"""Kinematic maps for the plate/membrane model.

Tensors are plain numpy arrays with optional leading batch axes:

* ``Mat2``    -- shape ``(..., 2, 2)``
* ``SymMat2`` -- shape ``(..., 2, 2)``, symmetric
* ``Mat32``   -- shape ``(..., 3, 2)``; rows e1, e2, e3, columns e1, e2
* ``Vec2``/``Vec3`` -- shape ``(..., 2)`` / ``(..., 3)``

Every function is pure and broadcasts over the batch axes.
"""
import numpy as np


def det2(A):
    A = np.asarray(A, dtype=float)
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def cof2(A):
    """Cofactor matrix, so that ``A @ cof2(A).T == det2(A) * I``."""
    A = np.asarray(A, dtype=float)
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 0, 1] = -A[..., 1, 0]
    out[..., 1, 0] = -A[..., 0, 1]
    out[..., 1, 1] = A[..., 0, 0]
    return out


def assemble_F(H, gradw):
    """Deformation gradient ``grad h + e3 (x) grad w`` as a 3x2 array."""
    H = np.asarray(H, dtype=float)
    gradw = np.asarray(gradw, dtype=float)
    shape = np.broadcast_shapes(H.shape[:-2], gradw.shape[:-1])
    F = np.empty(shape + (3, 2))
    F[..., :2, :] = H
    F[..., 2, :] = gradw
    return F


def planar_block(F):
    return np.asarray(F, dtype=float)[..., :2, :]


def right_cauchy_green(F):
    F = np.asarray(F, dtype=float)
    return np.einsum("...ka,...kb->...ab", F, F)


def area_ratio_J(H):
    """Area ratio used throughout the model: the planar determinant."""
    return det2(H)


def exact_area_ratio(F):
    """``sqrt(det(F^T F))``, i.e. ``|f,1 x f,2|``. Diagnostic only."""
    # the cross product avoids the cancellation in det(C)
    F = np.asarray(F, dtype=float)
    c = np.cross(F[..., :, 0], F[..., :, 1])
    return np.hypot(np.hypot(c[..., 0], c[..., 1]), c[..., 2])


def curvature_K(hessw):
    # small-slope curvature is the Hessian of w itself
    return np.asarray(hessw, dtype=float)


def frob(A):
    A = np.asarray(A, dtype=float)
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def distributional_det_pairing(hfield, testfn, grid):
    """Weak determinant of ``h`` tested against ``testfn``.

    Evaluates ``-1/2 * int ([cof grad h]^T h) . grad(testfn) dx`` with the
    grid's difference operators and trapezoidal weights.

    Parameters
    ----------
    hfield : array, shape (ny, nx, 2)
    testfn : array, shape (ny, nx); must vanish on the two outermost node rings.
    grid : GridSpec
    """
    # local import: discretization depends on this module
    from .discretization import grad_scalar, grad_vec2, quadrature_integrate

    hfield = np.asarray(hfield, dtype=float)
    testfn = np.asarray(testfn, dtype=float)
    if hfield.shape != grid.shape + (2,) or testfn.shape != grid.shape:
        raise ValueError("field dimensions do not match the grid")
    ring = np.ones(grid.shape, dtype=bool)
    ring[2:-2, 2:-2] = False
    if np.any(testfn[ring] != 0.0):
        raise ValueError(
            "test function must vanish on the two outermost node rings"
        )
    H = grad_vec2(hfield, grid)
    gphi = grad_scalar(testfn, grid)
    v = np.einsum("...ba,...b->...a", cof2(H), hfield)
    integrand = -0.5 * np.sum(v * gphi, axis=-1)
    return quadrature_integrate(integrand, grid)
