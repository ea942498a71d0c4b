"""Discrete energy, its exact gradient, and feasibility-preserving descent.

The discrete energy is

    E[h, w] = sum_n q_n W(K_n, F_n) - phi[h, w]

with trapezoidal weights ``q_n``, ``F_n`` built from the difference
operators of :mod:`wrinklevar.discretization` and ``K_n`` the clamp-aware
discrete Hessian of ``w``.  The gradient is obtained by transposing the
same operators, so it is the exact derivative of the discrete energy.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import discretization as disc
from ._kernels import get_change_kernel, get_density_kernel
from .analysis import wrinkle_metrics

log = logging.getLogger(__name__)


class InfeasibleState(ValueError):
    """Raised when the area ratio drops to or below the feasibility floor."""


class LineSearchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class MinimizerConfig:
    gtol_rel: float = 1e-8
    gtol_abs: float = 1e-10
    max_iter: int = 5000
    memory: int = 10
    backtrack: float = 0.5
    armijo: float = 1e-4
    jmin: float = 1e-8
    delta: float = None  # perturbation amplitude; None means 1e-4 * Ly
    mode: int = 3
    backend: str = None

    def __post_init__(self):
        for name in ("gtol_rel", "gtol_abs", "armijo", "jmin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_iter < 1 or self.memory < 1:
            raise ValueError("max_iter and memory must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.delta is not None and not self.delta >= 0:
            raise ValueError("delta must be >= 0")
        if self.mode < 1:
            raise ValueError("mode must be >= 1")
        if self.backend not in (None, "numpy", "numba"):
            raise ValueError("backend must be 'numpy' or 'numba'")

    def amplitude(self, grid):
        return 1e-4 * grid.Ly if self.delta is None else self.delta


@dataclass(frozen=True)
class EnergyBreakdown:
    membrane: float
    bending: float
    load: float

    @property
    def total(self):
        return self.membrane + self.bending - self.load


@dataclass
class RunTrace:
    energy: list = field(default_factory=list)
    gradnorm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    min_J: list = field(default_factory=list)

    def append(self, energy, gradnorm, step, min_J):
        self.energy.append(energy)
        self.gradnorm.append(gradnorm)
        self.step.append(step)
        self.min_J.append(min_J)

    def __len__(self):
        return len(self.energy)

    def is_monotone(self):
        e = np.asarray(self.energy)
        return bool(np.all(np.diff(e) <= 0.0))

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iter,energy,gradnorm,step,minJ\n")
            for i, row in enumerate(
                zip(self.energy, self.gradnorm, self.step, self.min_J)
            ):
                fh.write(f"{i}," + ",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class MinimizeResult:
    state: disc.DeformationState
    energy: EnergyBreakdown
    trace: RunTrace
    converged: bool
    message: str
    initial_energy: float

    @property
    def iterations(self):
        return len(self.trace) - 1


class EnergyModel:
    """Energy and gradient of flattened DOF vectors for one problem setup."""

    def __init__(self, grid, params, loads=None, bc=None, backend=None):
        self.grid = grid
        self.params = params
        self.loads = loads if loads is not None else disc.LoadSpec()
        self.bc = bc
        self.ops = disc.operators(grid, () if bc is None else bc.sides)
        self.kernel = get_density_kernel(backend)
        self.change_kernel = get_change_kernel(backend)
        o = self.ops
        self._T = {k: getattr(o, k).T.tocsr()
                   for k in ("Dx", "Dy", "Dxw", "Dyw", "Dxx", "Dyy", "Dxy")}
        m, b = self.loads.fields(grid)
        self._m = m.reshape(-1, 2)
        self._b = b.reshape(-1, 3)
        self._has_load = not self.loads.is_zero()

    def _split(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, 3)
        return u[:, 0], u[:, 1], u[:, 2]

    def kinematics(self, u):
        """Stacked nodal ``(H11, H12, H21, H22, g1, g2, k11, k12, k22)``, shape (9, N)."""
        h1, h2, w = self._split(u)
        o = self.ops
        return np.stack([o.Dx @ h1, o.Dy @ h1, o.Dx @ h2, o.Dy @ h2,
                         o.Dxw @ w, o.Dyw @ w, o.Dxx @ w, o.Dxy @ w, o.Dyy @ w])

    def min_J(self, u):
        H11, H12, H21, H22 = self.kinematics(u)[:4]
        return float(np.min(H11 * H22 - H12 * H21))

    def evaluate(self, u, want_grad=True, jmin=0.0):
        """Return ``(EnergyBreakdown, gradient or None, min J)``.

        Raises :class:`InfeasibleState` when ``min J <= jmin``.
        """
        kin = self.kinematics(u)
        H11, H12, H21, H22, g1, g2 = kin[:6]
        minJ = float(np.min(H11 * H22 - H12 * H21))
        if not minJ > jmin:
            raise InfeasibleState(f"min J = {minJ:.3e} <= {jmin:.1e}")
        p = self.params
        q = self.ops.weights
        mem, bend, dH, dg, dk = self.kernel(
            *kin, q, p.c1, p.c2, p.D, p.nu, want_grad=want_grad
        )
        self.last_kin = kin
        load = 0.0
        if self._has_load:
            h1, h2, w = self._split(u)
            m, b = self._m, self._b
            load = float(np.dot(q, m[:, 0] * g1 + m[:, 1] * g2 + b[:, 0] * h1
                                + b[:, 1] * h2 + b[:, 2] * w))
        energy = EnergyBreakdown(mem, bend, load)
        if not want_grad:
            return energy, None, minJ
        T = self._T
        if self._has_load:
            dg = dg - q[:, None] * self._m
        g = np.empty((q.size, 3))
        g[:, 0] = T["Dx"] @ dH[:, 0] + T["Dy"] @ dH[:, 1]
        g[:, 1] = T["Dx"] @ dH[:, 2] + T["Dy"] @ dH[:, 3]
        g[:, 2] = (T["Dxw"] @ dg[:, 0] + T["Dyw"] @ dg[:, 1]
                   + T["Dxx"] @ dk[:, 0] + T["Dxy"] @ dk[:, 1]
                   + T["Dyy"] @ dk[:, 2])
        if self._has_load:
            g -= q[:, None] * self._b
        return energy, g.ravel(), minJ

    def change(self, kin, du):
        """``(E(u + du) - E(u), min J at u + du)`` given ``kin = kinematics(u)``.

        Computed in difference form, so it stays accurate far below the
        rounding level of ``E(u)`` itself.
        """
        p = self.params
        q = self.ops.weights
        dkin = self.kinematics(du)
        dE, minJ = self.change_kernel(kin, dkin, q, p.c1, p.c2, p.D, p.nu)
        if self._has_load:
            d1, d2, dw = self._split(du)
            m, b = self._m, self._b
            dE -= float(np.dot(q, m[:, 0] * dkin[4] + m[:, 1] * dkin[5]
                               + b[:, 0] * d1 + b[:, 1] * d2 + b[:, 2] * dw))
        return dE, minJ

    def dof_weights(self):
        return np.repeat(self.ops.weights, 3)

    def preconditioner(self, free):
        """Factorized SPD operator on the free DOFs used as the initial inverse Hessian.

        Membrane Laplacians scaled by the reference modulus ``2 (c1 + c2)``
        plus the exact bending Hessian for ``w``, shifted by a small mass
        term so blocks without Dirichlet data stay invertible.
        """
        o, p = self.ops, self.params
        M = sp.diags(o.weights)
        s = 2.0 * (p.c1 + p.c2)
        Lh = s * (o.Dx.T @ M @ o.Dx + o.Dy.T @ M @ o.Dy)
        tr = o.Dxx + o.Dyy
        Lw = s * (o.Dxw.T @ M @ o.Dxw + o.Dyw.T @ M @ o.Dyw) + p.D * (
            p.nu * (tr.T @ M @ tr)
            + (1.0 - p.nu) * (o.Dxx.T @ M @ o.Dxx + 2.0 * o.Dxy.T @ M @ o.Dxy
                              + o.Dyy.T @ M @ o.Dyy)
        )
        L = max(self.grid.Lx, self.grid.Ly)
        shift = 1e-2 * s * (np.pi / L) ** 2 * M
        e = [sp.csr_matrix(([1.0], ([k], [k])), shape=(3, 3)) for k in range(3)]
        P = (sp.kron(Lh + shift, e[0]) + sp.kron(Lh + shift, e[1])
             + sp.kron(Lw + shift, e[2])).tocsc()
        idx = np.flatnonzero(free)
        lu = splu(P[idx][:, idx].tocsc())
        return lu.solve


def _constrained(state, bc, freeze):
    mask = np.zeros(3 * state.grid.n_nodes, dtype=bool)
    if bc is not None:
        state, bmask = disc.apply_boundary(state, bc)
        mask |= bmask.dof
    if freeze is not None:
        mask |= np.asarray(freeze, dtype=bool)
    return state, mask


def freeze_w_mask(grid):
    """DOF mask holding every ``w`` entry fixed (flat-branch solves)."""
    m = np.zeros((grid.n_nodes, 3), dtype=bool)
    m[:, 2] = True
    return m.ravel()


def assemble_energy(state, params, loads=None, bc=None, jmin=1e-8, backend=None):
    model = EnergyModel(state.grid, params, loads, bc, backend)
    energy, _, _ = model.evaluate(state.dofs(), want_grad=False, jmin=jmin)
    return energy


def assemble_gradient(state, params, loads=None, bc=None, jmin=1e-8, backend=None):
    """Gradient of the total energy; entries of clamped DOFs are zeroed."""
    model = EnergyModel(state.grid, params, loads, bc, backend)
    _, g, _ = model.evaluate(state.dofs(), jmin=jmin)
    if bc is not None:
        g[np.repeat(bc.node_mask(state.grid).ravel(), 3)] = 0.0
    return g


def _line_search(model, u, kin, g, d, config):
    """Backtrack from step 1; returns ``(alpha, u_new, dE)``."""
    slope = float(np.dot(g, d))
    if not slope < 0:
        raise ValueError("direction is not a descent direction")
    alpha = 1.0
    while alpha >= 1e-16:
        dE, minJ = model.change(kin, alpha * d)
        if minJ > config.jmin and np.isfinite(dE) and \
                dE <= config.armijo * alpha * slope:
            return alpha, u + alpha * d, dE
        alpha *= config.backtrack
    raise LineSearchFailed("line search failed: step underflow")


def feasible_line_search(state, direction, params, loads=None, bc=None,
                         config=MinimizerConfig()):
    """Backtracking Armijo search that never leaves ``J > jmin``.

    Returns ``(step, new_state)``.
    """
    model = EnergyModel(state.grid, params, loads, bc, config.backend)
    u = state.dofs()
    _, g, _ = model.evaluate(u, jmin=config.jmin)
    d = np.asarray(direction, dtype=float).ravel()
    if bc is not None:
        g = g.copy()
        g[np.repeat(bc.node_mask(state.grid).ravel(), 3)] = 0.0
    alpha, trial, _ = _line_search(model, u, model.last_kin, g, d, config)
    return alpha, disc.DeformationState.from_dofs(trial, state.grid)


def _two_loop(g, S, Y, rho, apply_H0):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    r = apply_H0(q)
    if S:
        y = Y[-1]
        r *= np.dot(S[-1], y) / np.dot(y, apply_H0(y))
    for (s, y, rr), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = rr * np.dot(y, r)
        r += (a - b) * s
    return -r


def minimize(state0, params, loads=None, bc=None, config=MinimizerConfig(),
             freeze=None):
    """Preconditioned limited-memory quasi-Newton descent from an admissible state.

    ``freeze`` is an optional boolean DOF mask of extra fixed entries
    (e.g. :func:`freeze_w_mask`).  Accepted iterates have nonincreasing
    energy and ``min J > config.jmin``.  The trace records the initial
    energy followed by the accumulated accepted decreases.
    """
    grid = state0.grid
    state0, fixed = _constrained(state0, bc, freeze)
    free = ~fixed
    model = EnergyModel(grid, params, loads, bc, config.backend)
    qd = model.dof_weights()[free]

    u = state0.dofs()
    energy, g_full, minJ = model.evaluate(u, jmin=config.jmin)
    kin = model.last_kin
    g = g_full[free]
    E = energy.total
    E_init = E
    gnorm = float(np.sqrt(np.dot(g, g / qd)))
    gtol = max(config.gtol_rel * gnorm, config.gtol_abs)
    trace = RunTrace()
    trace.append(E, gnorm, 0.0, minJ)

    converged = gnorm <= gtol
    message = "converged" if converged else "iteration cap reached"
    apply_H0 = model.preconditioner(free) if free.any() else None
    S, Y, rho = [], [], []
    it = 0
    while not converged and it < config.max_iter:
        it += 1
        d = _two_loop(g, S, Y, rho, apply_H0)
        if not np.dot(g, d) < 0:
            S, Y, rho = [], [], []
            d = -apply_H0(g)
        d_full = np.zeros_like(u)
        d_full[free] = d
        try:
            alpha, u_new, dE = _line_search(model, u, kin, g_full, d_full, config)
        except LineSearchFailed:
            if S:
                S, Y, rho = [], [], []
                continue
            message = "line search failed"
            break
        _, g_full, minJ = model.evaluate(u_new, jmin=config.jmin)
        kin = model.last_kin
        g_new = g_full[free]
        s = alpha * d
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.sqrt(np.dot(s, s) * np.dot(y, y)):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
            if len(S) > config.memory:
                S.pop(0)
                Y.pop(0)
                rho.pop(0)
        u, g = u_new, g_new
        E = E + dE
        gnorm = float(np.sqrt(np.dot(g, g / qd)))
        trace.append(E, gnorm, alpha, minJ)
        if gnorm <= gtol:
            converged = True
            message = "converged"
    log.debug("minimize: %s after %d iterations, E=%.6e", message, it, E)
    state = disc.DeformationState.from_dofs(u, grid)
    energy = model.evaluate(u, want_grad=False, jmin=config.jmin)[0]
    return MinimizeResult(state, energy, trace, converged, message, E_init)


def perturb_out_of_plane(state, delta, mode, bc=None):
    """Add ``delta sin(mode pi x2/Ly) bump`` to ``w``.

    The bump ``sin^2(pi x1/Lx)`` vanishes with zero normal slope on the
    left/right sides; a matching ``sin^2(pi x2/Ly)`` factor is included when
    bottom or top is clamped.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return state
    grid = state.grid
    X1, X2 = grid.coords()
    bump = np.sin(np.pi * X1 / grid.Lx) ** 2
    if bc is not None and ({"bottom", "top"} & set(bc.sides)):
        bump = bump * np.sin(np.pi * X2 / grid.Ly) ** 2
    dw = delta * np.sin(mode * np.pi * X2 / grid.Ly) * bump
    return state.replace(w=state.w + dw)


def extended_trace_state(grid, bc):
    """State that equals the prescribed trace at every node."""
    X1, X2 = grid.coords()
    h, w = bc.trace(X1, X2)
    return disc.DeformationState(h, w, grid)


@dataclass
class SweepStep:
    stretch: float
    state: disc.DeformationState
    energy: EnergyBreakdown
    metrics: object
    converged: bool
    trace: RunTrace
    message: str = ""


def continuation_sweep(lam_from, lam_to, steps, params, loads=None,
                       bc=disc.BoundarySpec(), config=MinimizerConfig(),
                       grid=None, state0=None, freeze=None, perturb=True):
    """Minimize along a uniform schedule of boundary stretches.

    Each step warm-starts from the previous converged state, shifted by
    the change of the prescribed trace, plus a fresh out-of-plane
    perturbation (unless ``perturb`` is false).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if grid is None:
        if state0 is None:
            raise ValueError("either grid or state0 is required")
        grid = state0.grid
    schedule = np.linspace(lam_from, lam_to, steps) if steps > 1 else [lam_from]
    X1, X2 = grid.coords()
    out = []
    prev_state, prev_bc = state0, None
    for lam in schedule:
        bc_k = bc.with_stretch(float(lam))
        if prev_state is None:
            start = extended_trace_state(grid, bc_k)
        elif prev_bc is None:
            start = prev_state
        else:
            h_new, w_new = bc_k.trace(X1, X2)
            h_old, w_old = prev_bc.trace(X1, X2)
            start = prev_state.replace(
                h=prev_state.h + (h_new - h_old), w=prev_state.w + (w_new - w_old)
            )
            if disc.nodal_J(start).min() <= config.jmin:
                start = extended_trace_state(grid, bc_k)
        if perturb:
            start = perturb_out_of_plane(start, config.amplitude(grid), config.mode, bc_k)
        res = minimize(start, params, loads, bc_k, config, freeze=freeze)
        if not res.converged:
            log.warning("sweep step lambda=%.6g: %s", lam, res.message)
        out.append(SweepStep(float(lam), res.state, res.energy,
                             wrinkle_metrics(res.state), res.converged,
                             res.trace, res.message))
        prev_state, prev_bc = res.state, bc_k
    return out
