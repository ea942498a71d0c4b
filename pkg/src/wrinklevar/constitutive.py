"""Mooney-Rivlin membrane plus von Karman bending energy density.

The membrane part uses the incompressible Mooney-Rivlin invariants with
``det C`` replaced by ``J**2`` and ``J = det(grad h)``::

    I1 = |F|^2 + J^-2,    I2 = J^2 + |F|^2 J^-2
    Phi = c1 (I1 - 3) + c2 (I2 - 3)

so the density is a closed-form function ``Gamma(K, F, J)`` that blows up
as ``J -> 0+``.
"""
from dataclasses import dataclass

import numpy as np

from .kinematics import cof2, det2, planar_block, right_cauchy_green


class DomainError(ValueError):
    """Raised when the density is requested at a non-positive area ratio."""


class GrowthUnavailable(ValueError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    c1: float = 1.0
    c2: float = 0.1
    D: float = 1e-3
    nu: float = 0.3

    def __post_init__(self):
        for name in ("c1", "c2", "D", "nu"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.c1 > 0:
            raise ValueError("c1 must be > 0")
        if not self.c2 >= 0:
            raise ValueError("c2 must be >= 0")
        if not self.D > 0:
            raise ValueError("D must be > 0")
        if not 0 <= self.nu < 1:
            raise ValueError("nu must satisfy 0 <= nu < 1")
        if not self.c2 < 3 * self.c1:
            raise ValueError("c2 must be < 3*c1 (sampled-convex regime)")

    @classmethod
    def unchecked(cls, **kw):
        """Build parameters outside the validated regime (for falsification runs)."""
        obj = object.__new__(cls)
        base = dict(c1=1.0, c2=0.1, D=1e-3, nu=0.3)
        base.update(kw)
        for k, v in base.items():
            object.__setattr__(obj, k, float(v))
        return obj


@dataclass(frozen=True)
class GrowthConstants:
    C1: float
    C2: float
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        if not self.C1 > 0:
            raise ValueError("C1 must be > 0")
        if not (self.p > 1 and self.q > 4 / 3 and self.r > 1):
            raise ValueError("exponents must satisfy p > 1, q > 4/3, r > 1")
        if self.q >= 2 and not self.p > 2 * self.q / (2 + self.q):
            raise ValueError("p must exceed 2q/(2+q) when q >= 2")


def _check_J(J):
    J = np.asarray(J, dtype=float)
    if np.any(~(J > 0)):
        raise DomainError("area ratio J must be > 0")
    return J


def bending_energy(K, params):
    K = np.asarray(K, dtype=float)
    tr = K[..., 0, 0] + K[..., 1, 1]
    return 0.5 * params.D * (tr * tr - 2.0 * (1.0 - params.nu) * det2(K))


def membrane_energy(F, J, params):
    J = _check_J(J)
    F = np.asarray(F, dtype=float)
    F2 = np.sum(F * F, axis=(-2, -1))
    Jm2 = 1.0 / (J * J)
    return params.c1 * (F2 + Jm2 - 3.0) + params.c2 * (J * J + F2 * Jm2 - 3.0)


def membrane_energy_exact(F, params):
    """Mooney-Rivlin membrane energy written in ``C = F^T F`` with the true ``det C``.

    This is the density the model approximates; its rank-one behaviour in
    out-of-plane directions differs from :func:`membrane_energy`.
    """
    C = right_cauchy_green(F)
    trC = C[..., 0, 0] + C[..., 1, 1]
    detC = det2(C)
    if np.any(~(detC > 0)):
        raise DomainError("det C must be > 0")
    return params.c1 * (trC + 1.0 / detC - 3.0) + params.c2 * (
        detC + trC / detC - 3.0
    )


def gamma_density(K, F, J, params):
    return bending_energy(K, params) + membrane_energy(F, J, params)


def total_density(K, F, params):
    J = det2(planar_block(F))
    return gamma_density(K, F, J, params)


def gamma_derivatives(K, F, J, params):
    """Partial derivatives of ``Gamma`` in its three independent arguments.

    Returns ``(dK, dF, dJ)`` with ``dK`` the symmetric tensor gradient
    ``D [nu tr(K) I + (1 - nu) K]``.
    """
    J = _check_J(J)
    K = np.asarray(K, dtype=float)
    F = np.asarray(F, dtype=float)
    c1, c2, D, nu = params.c1, params.c2, params.D, params.nu
    tr = K[..., 0, 0] + K[..., 1, 1]
    dK = D * (1.0 - nu) * K + (D * nu * tr)[..., None, None] * np.eye(2)
    dF = (2.0 * (c1 + c2 / (J * J)))[..., None, None] * F
    F2 = np.sum(F * F, axis=(-2, -1))
    J3 = J * J * J
    dJ = -2.0 * c1 / J3 + 2.0 * c2 * J - 2.0 * c2 * F2 / J3
    return dK, dF, dJ


def total_derivatives(K, F, params):
    """``(W_K, W_F)`` with the chain rule through ``J = det(grad h)``."""
    F = np.asarray(F, dtype=float)
    H = planar_block(F)
    dK, dF, dJ = gamma_derivatives(K, F, det2(H), params)
    WF = dF.copy()
    WF[..., :2, :] += dJ[..., None, None] * cof2(H)
    return dK, WF


def derive_growth_constants(params):
    """Constants for the lower bound ``W >= C1 (|K|^2 + |F|^2 + J^2) + C2``."""
    if params.c2 == 0:
        raise GrowthUnavailable(
            "H2 r-coercivity unavailable: c2 = 0 leaves no J^r term"
        )
    C1 = min(params.D * (1.0 - params.nu) / 2.0, params.c1, params.c2)
    return GrowthConstants(C1=C1, C2=-3.0 * (params.c1 + params.c2))


def growth_lower_bound(K, F, J, growth):
    K = np.asarray(K, dtype=float)
    F = np.asarray(F, dtype=float)
    nK = np.sqrt(np.sum(K * K, axis=(-2, -1)))
    nF = np.sqrt(np.sum(F * F, axis=(-2, -1)))
    J = np.asarray(J, dtype=float)
    return growth.C1 * (nK**growth.p + nF**growth.q + J**growth.r) + growth.C2
