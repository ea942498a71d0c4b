"""Post-processing: wrinkle metrics and the out-of-plane weak-form residual."""
from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from .constitutive import total_derivatives
from .kinematics import assemble_F, det2


@dataclass(frozen=True)
class WrinkleMetrics:
    amplitude: float
    wavelength: float  # None when fewer than two zero crossings
    sign_change_count: int


def mid_section(state):
    """``(x2, w)`` along ``x1 = Lx / 2``, interpolating between node columns."""
    grid = state.grid
    x2 = np.linspace(0.0, grid.Ly, grid.ny)
    t = 0.5 * (grid.nx - 1)
    i0 = int(np.floor(t))
    frac = t - i0
    if frac == 0.0:
        return x2, np.array(state.w[:, i0])
    return x2, (1.0 - frac) * state.w[:, i0] + frac * state.w[:, i0 + 1]


def zero_crossings(x, s, band):
    crossings = []
    last = None
    for i in range(len(s)):
        if abs(s[i]) <= band:
            continue
        if last is not None and np.sign(s[i]) != np.sign(s[last]):
            a, b = s[last], s[i]
            crossings.append(x[last] + (x[i] - x[last]) * a / (a - b))
        last = i
    return np.array(crossings)


def wrinkle_metrics(state):
    x2, s = mid_section(state)
    amplitude = float(np.max(np.abs(s))) if s.size else 0.0
    if amplitude == 0.0:
        return WrinkleMetrics(0.0, None, 0)
    zc = zero_crossings(x2, s, 1e-12 * amplitude)
    wavelength = float(2.0 * np.mean(np.diff(zc))) if zc.size >= 2 else None
    return WrinkleMetrics(amplitude, wavelength, int(zc.size))


@dataclass
class ResidualReport:
    n: float
    measure_fraction: float
    residuals: np.ndarray  # normalized by the test-function norms
    raw: np.ndarray
    norms: np.ndarray

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


def _clamp_profile(s, lo, hi):
    """1D factor vanishing with zero slope at the clamped ends of [0, 1]."""
    p = np.ones_like(s)
    if lo:
        p = p * s**2
    if hi:
        p = p * (1.0 - s) ** 2
    return p


def clamped_test_functions(grid, bc, count, seed, modes=3):
    """Random smooth test functions with zero value and slope on the clamped sides.

    Each is a product of clamped polynomial bumps with a random cosine
    modulation; returns an array of shape ``(count, ny, nx)``.
    """
    rng = np.random.default_rng(seed)
    X1, X2 = grid.coords()
    s, t = X1 / grid.Lx, X2 / grid.Ly
    sides = set(() if bc is None else bc.sides)
    envelope = (
        _clamp_profile(s, "left" in sides, "right" in sides)
        * _clamp_profile(t, "bottom" in sides, "top" in sides)
    )
    envelope = envelope / np.max(envelope)
    out = np.empty((count,) + grid.shape)
    for k in range(count):
        c = rng.standard_normal((modes + 1, modes + 1))
        mod = np.zeros(grid.shape)
        for i in range(modes + 1):
            for j in range(modes + 1):
                mod += c[i, j] * np.cos(i * np.pi * s) * np.cos(j * np.pi * t)
        out[k] = envelope * mod
    return out


def nodal_stresses(state, params, bc=None):
    """``(W_K, W_F, J)`` at every node."""
    grid = state.grid
    H = disc.grad_vec2(state.h, grid)
    J = det2(H)
    if np.any(J <= 0):
        raise ValueError("state is not feasible (J <= 0 somewhere)")
    F = assemble_F(H, disc.grad_w(state.w, grid, bc))
    K = disc.hessian_scalar(state.w, grid, bc)
    WK, WF = total_derivatives(K, F, params)
    return WK, WF, J


def omega_n_mask(WK, WF, J, n):
    size = np.sqrt(np.sum(WK**2, axis=(-2, -1))) + np.sqrt(np.sum(WF**2, axis=(-2, -1)))
    return (size <= n) & (J >= 1.0 / n)


def equilibrium_residual(state, params, n, test_set_size, seed, bc=None,
                         loads=None, etas=None):
    """Out-of-plane weak form restricted to the discrete ``Omega_n``.

    For each test function eta evaluates::

        int chi_n { W_K : grad^2 eta + (W_F^T e3) . grad eta } dx

    (minus the dead-load work ``m . grad eta + b3 eta`` when ``loads`` is
    given) with the same stencils and quadrature as the energy, and
    normalizes by ``||grad^2 eta|| + ||grad eta||``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = state.grid
    WK, WF, J = nodal_stresses(state, params, bc)
    chi = omega_n_mask(WK, WF, J, n).astype(float)
    q = disc.quadrature_weights(grid)
    frac = float(np.sum(q * chi) / np.sum(q))
    if frac == 0.0:
        empty = np.zeros(0)
        return ResidualReport(n, 0.0, empty, empty, empty)
    if etas is None:
        etas = clamped_test_functions(grid, bc, test_set_size, seed)
    m = b3 = None
    if loads is not None and not loads.is_zero():
        m, b = loads.fields(grid)
        b3 = b[..., 2]
    raw, norms = [], []
    for eta in etas:
        ge = disc.grad_w(eta, grid, bc)
        He = disc.hessian_scalar(eta, grid, bc)
        integrand = np.sum(WK * He, axis=(-2, -1)) + np.sum(WF[..., 2, :] * ge, axis=-1)
        if m is not None:
            integrand = integrand - np.sum(m * ge, axis=-1) - b3 * eta
        raw.append(disc.quadrature_integrate(chi * integrand, grid))
        norms.append(
            np.sqrt(disc.quadrature_integrate(np.sum(He**2, axis=(-2, -1)), grid))
            + np.sqrt(disc.quadrature_integrate(np.sum(ge**2, axis=-1), grid))
        )
    raw = np.array(raw)
    norms = np.array(norms)
    return ResidualReport(n, frac, raw / norms, raw, norms)
