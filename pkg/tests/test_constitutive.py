import numpy as np
import pytest

from wrinklevar import constitutive as con
from wrinklevar.constitutive import MaterialParams

from conftest import embed


def test_params_defaults_and_validation():
    p = MaterialParams()
    assert (p.c1, p.c2, p.D, p.nu) == (1.0, 0.1, 1e-3, 0.3)
    for bad in ({"c1": 0.0}, {"c2": -1.0}, {"D": 0.0}, {"nu": 1.0}, {"nu": -0.1},
                {"c1": 0.01, "c2": 1.0}, {"c1": float("nan")}):
        with pytest.raises(ValueError):
            MaterialParams(**bad)
    q = MaterialParams.unchecked(c1=0.01, c2=1.0)
    assert q.c2 > 3 * q.c1


def test_bending_energy(params):
    k = 0.7
    assert con.bending_energy(np.diag([k, 0.0]), params) == pytest.approx(params.D * k**2 / 2)
    assert con.bending_energy(k * np.eye(2), params) == pytest.approx(params.D * (1 + params.nu) * k**2)
    assert con.bending_energy(np.zeros((2, 2)), params) == 0.0


def test_bending_energy_isotropic_form(params, rng):
    K = rng.standard_normal((50, 2, 2))
    K = K + np.swapaxes(K, -1, -2)
    tr = np.trace(K, axis1=-2, axis2=-1)
    ref = 0.5 * params.D * (params.nu * tr**2 + (1 - params.nu) * np.sum(K**2, axis=(-2, -1)))
    np.testing.assert_allclose(con.bending_energy(K, params), ref, rtol=1e-12)


def test_membrane_energy_values(params):
    assert con.membrane_energy(embed(), 1.0, params) == pytest.approx(0.0, abs=1e-15)
    F = embed(np.diag([2.0, 2.0]))
    # I1 = 8 + 1/16, I2 = 16 + 1/2
    assert con.membrane_energy(F, 4.0, params) == pytest.approx(6.4125, rel=1e-14)
    assert con.membrane_energy(embed(), 1e-3, params) >= params.c1 * 1e6 - 3 * (params.c1 + params.c2)


def test_membrane_energy_domain(params):
    for J in (0.0, -1.0, np.nan):
        with pytest.raises(con.DomainError):
            con.membrane_energy(embed(), J, params)


def test_gamma_additive(params):
    k = 0.3
    assert con.gamma_density(np.diag([k, 0.0]), embed(), 1.0, params) == pytest.approx(params.D * k**2 / 2)
    assert con.total_density(np.zeros((2, 2)), embed(np.diag([2.0, 2.0])), params) == pytest.approx(6.4125)


def test_reference_state_derivatives(params):
    dK, dF, dJ = con.gamma_derivatives(np.zeros((2, 2)), embed(), 1.0, params)
    np.testing.assert_array_equal(dK, 0.0)
    np.testing.assert_allclose(dF, 2.2 * embed(), rtol=1e-15)
    # -2 c1 + 2 c2 - 2 c2 |F|^2 with |F|^2 = 2
    assert dJ == pytest.approx(-2.2, rel=1e-15)
    WK, WF = con.total_derivatives(np.zeros((2, 2)), embed(), params)
    np.testing.assert_allclose(WF, 0.0, atol=1e-15)
    np.testing.assert_array_equal(WK, 0.0)


def test_dK_closed_form(params):
    k = 1.7
    dK, _, _ = con.gamma_derivatives(k * np.eye(2), embed(), 1.0, params)
    np.testing.assert_allclose(dK, params.D * (1 + params.nu) * k * np.eye(2), rtol=1e-14)


def _fd(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def _random_point(rng):
    K = rng.standard_normal((2, 2))
    K = 0.5 * (K + K.T)
    H = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    F = embed(H, 0.5 * rng.standard_normal(2))
    return K, F


@pytest.mark.parametrize("seed", range(5))
def test_gamma_derivatives_fd(params, seed):
    rng = np.random.default_rng(seed)
    K, F = _random_point(rng)
    J = 0.5 + rng.random()
    dK, dF, dJ = con.gamma_derivatives(K, F, J, params)
    np.testing.assert_allclose(_fd(lambda x: con.gamma_density(x, F, J, params), K), dK, rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(_fd(lambda x: con.gamma_density(K, x, J, params), F), dF, rtol=1e-5, atol=1e-9)
    fdJ = (con.gamma_density(K, F, J + 1e-6, params) - con.gamma_density(K, F, J - 1e-6, params)) / 2e-6
    assert fdJ == pytest.approx(dJ, rel=1e-5)


@pytest.mark.parametrize("seed", range(5))
def test_total_derivatives_fd(params, seed):
    rng = np.random.default_rng(100 + seed)
    K, F = _random_point(rng)
    WK, WF = con.total_derivatives(K, F, params)
    np.testing.assert_allclose(_fd(lambda x: con.total_density(K, x, params), F), WF, rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(_fd(lambda x: con.total_density(x, F, params), K), WK, rtol=1e-5, atol=1e-9)


def test_growth_constants(params):
    g = con.derive_growth_constants(params)
    assert g.C1 == pytest.approx(3.5e-4)
    assert g.C2 == pytest.approx(-3.3)
    assert (g.p, g.q, g.r) == (2.0, 2.0, 2.0)
    ref = con.growth_lower_bound(np.zeros((2, 2)), embed(), 1.0, g)
    assert ref <= 0.0 == con.gamma_density(np.zeros((2, 2)), embed(), 1.0, params)
    with pytest.raises(con.GrowthUnavailable):
        con.derive_growth_constants(MaterialParams(c2=0.0))
    with pytest.raises(ValueError):
        con.GrowthConstants(C1=0.0, C2=-1.0)
    with pytest.raises(ValueError):
        con.GrowthConstants(C1=1.0, C2=-1.0, q=1.2)


def test_exact_membrane_agrees_in_plane(params, rng):
    # without slope, det C = J^2 so the two membrane forms coincide
    H = np.eye(2) + 0.2 * rng.standard_normal((20, 2, 2))
    F = np.zeros((20, 3, 2))
    F[:, :2] = H
    J = np.linalg.det(H)
    np.testing.assert_allclose(con.membrane_energy_exact(F, params), con.membrane_energy(F, J, params), rtol=1e-12)
