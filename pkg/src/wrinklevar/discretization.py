"""Uniform-grid finite differences, trapezoidal quadrature and clamped boundaries.

Nodal fields are stored as arrays of shape ``(ny, nx, ...)`` with ``x1``
varying along the last grid axis; flattening is row-major, so node ``n`` is
``j * nx + i``.  Degrees of freedom are interleaved per node as
``(h1, h2, w)``.
"""
import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .kinematics import det2

SIDES = ("left", "right", "bottom", "top")
FIELD_COLUMNS = ("x1", "x2", "h1", "h2", "w", "J", "w11", "w12", "w22")


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid needs at least 4 nodes per direction")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain side lengths must be positive")

    @property
    def hx(self):
        return self.Lx / (self.nx - 1)

    @property
    def hy(self):
        return self.Ly / (self.ny - 1)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def n_nodes(self):
        return self.nx * self.ny

    def coords(self):
        x1 = np.linspace(0.0, self.Lx, self.nx)
        x2 = np.linspace(0.0, self.Ly, self.ny)
        return np.meshgrid(x1, x2, indexing="xy")

    def side_nodes(self, side):
        m = np.zeros(self.shape, dtype=bool)
        if side == "left":
            m[:, 0] = True
        elif side == "right":
            m[:, -1] = True
        elif side == "bottom":
            m[0, :] = True
        elif side == "top":
            m[-1, :] = True
        else:
            raise ValueError(f"unknown side {side!r}")
        return m


@dataclass(frozen=True, eq=False)
class DeformationState:
    """Nodal planar map ``h`` (ny, nx, 2) and out-of-plane displacement ``w`` (ny, nx)."""

    h: np.ndarray
    w: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        w = np.array(self.w, dtype=float)
        if h.shape != self.grid.shape + (2,) or w.shape != self.grid.shape:
            raise ValueError("field dimensions do not match the grid")
        h.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w", w)

    @classmethod
    def identity(cls, grid):
        X1, X2 = grid.coords()
        return cls(np.stack([X1, X2], axis=-1), np.zeros(grid.shape), grid)

    @classmethod
    def from_dofs(cls, u, grid):
        u = np.asarray(u, dtype=float).reshape(grid.shape + (3,))
        return cls(u[..., :2], u[..., 2], grid)

    def dofs(self):
        return np.concatenate([self.h, self.w[..., None]], axis=-1).ravel()

    def replace(self, h=None, w=None):
        return DeformationState(
            self.h if h is None else h, self.w if w is None else w, self.grid
        )


def _uniaxial_h(stretch):
    def h_o(x1, x2):
        return stretch * x1, x2

    return h_o


def _zero_w(x1, x2):
    return np.zeros(np.broadcast(x1, x2).shape)


@dataclass(frozen=True)
class BoundarySpec:
    """Clamped part of the boundary and its prescribed trace.

    ``h_o`` and ``w_o`` map ``(x1, x2)`` arrays to ``(h1, h2)`` and ``w``.
    Left unset, they default to the uniaxial stretch ``(stretch*x1, x2)``
    and ``w = 0``.
    """

    sides: tuple = ("left", "right")
    stretch: float = 1.0
    h_o: object = None
    w_o: object = None

    def __post_init__(self):
        sides = tuple(s for s in SIDES if s in set(self.sides))
        if not sides:
            raise ValueError("the clamped boundary must have positive length")
        if len(sides) != len(set(self.sides)):
            raise ValueError(f"unknown side in {self.sides!r}")
        object.__setattr__(self, "sides", sides)
        if not np.isfinite(self.stretch) or self.stretch <= 0:
            raise ValueError("stretch must be a positive finite number")

    def with_stretch(self, stretch):
        return BoundarySpec(self.sides, stretch, self.h_o, self.w_o)

    def trace(self, x1, x2):
        h_o = self.h_o or _uniaxial_h(self.stretch)
        w_o = self.w_o or _zero_w
        h1, h2 = h_o(x1, x2)
        w = w_o(x1, x2)
        h = np.stack(np.broadcast_arrays(h1, h2), axis=-1)
        w = np.broadcast_to(np.asarray(w, dtype=float), np.shape(x1))
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(w))):
            raise ValueError("prescribed boundary trace is not finite")
        return h, w

    def node_mask(self, grid):
        m = np.zeros(grid.shape, dtype=bool)
        for s in self.sides:
            m |= grid.side_nodes(s)
        return m


@dataclass(frozen=True)
class LoadSpec:
    """Dead loads: ``m`` pairs with grad w, ``b = (b1, b2, b3)`` with ``h + w e3``.

    Either may be a constant vector or a nodal field.
    """

    m: object = (0.0, 0.0)
    b: object = (0.0, 0.0, 0.0)

    def fields(self, grid):
        m = np.broadcast_to(np.asarray(self.m, dtype=float), grid.shape + (2,))
        b = np.broadcast_to(np.asarray(self.b, dtype=float), grid.shape + (3,))
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise ValueError("loads must be finite")
        return m, b

    def is_zero(self):
        return not (np.any(np.asarray(self.m)) or np.any(np.asarray(self.b)))


@dataclass(frozen=True, eq=False)
class BoundaryMask:
    """Constrained degrees of freedom after :func:`apply_boundary`.

    ``dof`` flags interleaved ``(h1, h2, w)`` entries; ``ghost`` flags the
    nodes carrying a normal-slope (ghost reflection) constraint on ``w``.
    """

    dof: np.ndarray
    ghost: np.ndarray = field(default=None)

    @property
    def size(self):
        return int(self.dof.sum()) + int(self.ghost.sum())


# -- 1D stencils ------------------------------------------------------------


def _d1(n, h):
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    D[n - 1, n - 3 :] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return D.tocsr()


def _d2(n, h):
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1 : i + 2] = np.array([1.0, -2.0, 1.0]) / h**2
    D[0, 0:4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
    D[n - 1, n - 4 :] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
    return D.tocsr()


def _replace_rows(A, rows, B=None):
    """Rows of ``A`` at ``rows`` replaced by the same rows of ``B`` (or zeroed)."""
    keep = np.ones(A.shape[0])
    keep[rows] = 0.0
    out = sp.diags(keep) @ A
    if B is not None:
        pick = np.zeros(A.shape[0])
        pick[rows] = 1.0
        out = out + sp.diags(pick) @ B
    return out.tocsr()


@dataclass(frozen=True, eq=False)
class Operators:
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Dxw: sp.csr_matrix
    Dyw: sp.csr_matrix
    Dxx: sp.csr_matrix
    Dyy: sp.csr_matrix
    Dxy: sp.csr_matrix
    weights: np.ndarray


@lru_cache(maxsize=32)
def operators(grid, clamped=()):
    """Sparse difference operators on flattened nodal fields.

    ``Dx``/``Dy`` act on ``h``.  The ``w`` operators encode the clamp
    ``grad w . nu = 0`` on the sides in ``clamped`` through ghost
    reflection: normal slope rows vanish, the normal second difference
    becomes ``2 (w_1 - w_0) / h^2`` and the mixed derivative vanishes.
    """
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    Ix, Iy = sp.identity(nx, format="csr"), sp.identity(ny, format="csr")
    Dx = sp.kron(Iy, _d1(nx, hx), format="csr")
    Dy = sp.kron(_d1(ny, hy), Ix, format="csr")
    Dxx = sp.kron(Iy, _d2(nx, hx), format="csr")
    Dyy = sp.kron(_d2(ny, hy), Ix, format="csr")
    Dxy = (Dx @ Dy).tocsr()

    # ghost-reflection second differences along each axis
    gx = _d2(nx, hx).tolil()
    gx[0, :] = 0.0
    gx[0, 0:2] = np.array([-2.0, 2.0]) / hx**2
    gx[nx - 1, :] = 0.0
    gx[nx - 1, nx - 2 :] = np.array([2.0, -2.0]) / hx**2
    Gxx = sp.kron(Iy, gx.tocsr(), format="csr")
    gy = _d2(ny, hy).tolil()
    gy[0, :] = 0.0
    gy[0, 0:2] = np.array([-2.0, 2.0]) / hy**2
    gy[ny - 1, :] = 0.0
    gy[ny - 1, ny - 2 :] = np.array([2.0, -2.0]) / hy**2
    Gyy = sp.kron(gy.tocsr(), Ix, format="csr")

    xnodes = np.zeros(grid.shape, dtype=bool)
    ynodes = np.zeros(grid.shape, dtype=bool)
    for s in clamped:
        if s in ("left", "right"):
            xnodes |= grid.side_nodes(s)
        else:
            ynodes |= grid.side_nodes(s)
    xr = np.flatnonzero(xnodes.ravel())
    yr = np.flatnonzero(ynodes.ravel())
    Dxw = _replace_rows(Dx, xr)
    Dyw = _replace_rows(Dy, yr)
    Dxx_w = _replace_rows(Dxx, xr, Gxx)
    Dyy_w = _replace_rows(Dyy, yr, Gyy)
    Dxy_w = _replace_rows(Dxy, np.union1d(xr, yr))

    wx = np.full(nx, hx)
    wx[[0, -1]] *= 0.5
    wy = np.full(ny, hy)
    wy[[0, -1]] *= 0.5
    weights = np.outer(wy, wx).ravel()
    weights.setflags(write=False)
    return Operators(Dx, Dy, Dxw, Dyw, Dxx_w, Dyy_w, Dxy_w, weights)


def _ops(grid, bc):
    return operators(grid, () if bc is None else bc.sides)


def _check(field, grid, trailing=()):
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape + tuple(trailing):
        raise ValueError(
            f"field shape {field.shape} does not match grid {grid.shape}"
        )
    return field


def grad_scalar(field, grid):
    f = _check(field, grid).ravel()
    ops = operators(grid)
    return np.stack([ops.Dx @ f, ops.Dy @ f], axis=-1).reshape(grid.shape + (2,))


def grad_vec2(hfield, grid):
    """``H[..., a, b] = d h_a / d x_b`` at every node."""
    h = _check(hfield, grid, (2,))
    out = np.empty(grid.shape + (2, 2))
    for a in range(2):
        out[..., a, :] = grad_scalar(h[..., a], grid)
    return out


def grad_w(field, grid, bc=None):
    """Slope of ``w`` with the clamp applied (zero normal slope on clamped sides)."""
    f = _check(field, grid).ravel()
    ops = _ops(grid, bc)
    return np.stack([ops.Dxw @ f, ops.Dyw @ f], axis=-1).reshape(grid.shape + (2,))


def hessian_scalar(field, grid, bc=None):
    f = _check(field, grid).ravel()
    ops = _ops(grid, bc)
    w11 = (ops.Dxx @ f).reshape(grid.shape)
    w22 = (ops.Dyy @ f).reshape(grid.shape)
    w12 = (ops.Dxy @ f).reshape(grid.shape)
    return np.stack(
        [np.stack([w11, w12], axis=-1), np.stack([w12, w22], axis=-1)], axis=-2
    )


def quadrature_weights(grid):
    return operators(grid).weights.reshape(grid.shape)


def quadrature_integrate(field, grid):
    f = _check(field, grid)
    # fixed summation order keeps results bit-reproducible
    return float(np.dot(operators(grid).weights, f.ravel()))


def nodal_J(state):
    return det2(grad_vec2(state.h, state.grid))


def apply_boundary(state, bc):
    """Overwrite clamped nodes with the prescribed trace; return ``(state, mask)``."""
    grid = state.grid
    nodes = bc.node_mask(grid)
    X1, X2 = grid.coords()
    h_o, w_o = bc.trace(X1, X2)
    h = np.array(state.h)
    w = np.array(state.w)
    h[nodes] = h_o[nodes]
    w[nodes] = w_o[nodes]
    dof = np.repeat(nodes.ravel(), 3)
    return DeformationState(h, w, grid), BoundaryMask(dof=dof, ghost=nodes.ravel())


def load_potential(state, loads, grid=None, bc=None):
    """Dead-load work ``int m . grad w + b . (h + w e3) dx``."""
    grid = grid or state.grid
    if state.grid != grid:
        raise ValueError("state does not live on the given grid")
    if loads is None or loads.is_zero():
        return 0.0
    m, b = loads.fields(grid)
    gw = grad_w(state.w, grid, bc)
    integrand = (
        np.sum(m * gw, axis=-1)
        + np.sum(b[..., :2] * state.h, axis=-1)
        + b[..., 2] * state.w
    )
    return quadrature_integrate(integrand, grid)


# -- CSV field export -------------------------------------------------------


def write_fields_csv(path, state, bc=None):
    grid = state.grid
    X1, X2 = grid.coords()
    J = nodal_J(state)
    K = hessian_scalar(state.w, grid, bc)
    cols = [
        X1, X2, state.h[..., 0], state.h[..., 1], state.w, J,
        K[..., 0, 0], K[..., 0, 1], K[..., 1, 1],
    ]
    data = np.stack([c.ravel() for c in cols], axis=-1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELD_COLUMNS)
        for row in data:
            writer.writerow([f"{v:.17g}" for v in row])


def read_fields_csv(path, grid):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIELD_COLUMNS:
            raise ValueError(f"unexpected field columns {header!r}")
        data = np.array([[float(v) for v in row] for row in reader])
    if data.shape[0] != grid.n_nodes:
        raise ValueError(
            f"{path}: {data.shape[0]} nodes, grid expects {grid.n_nodes}"
        )
    X1, X2 = grid.coords()
    if not (
        np.allclose(data[:, 0], X1.ravel()) and np.allclose(data[:, 1], X2.ravel())
    ):
        raise ValueError(f"{path}: node coordinates do not match the grid")
    h = data[:, 2:4].reshape(grid.shape + (2,))
    w = data[:, 4].reshape(grid.shape)
    return DeformationState(h, w, grid)
