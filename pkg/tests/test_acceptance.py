"""Acceptance criteria.  Each test prints one ``[criterion N] PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
when output capture is on).
"""
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from wrinklevar import discretization as disc
from wrinklevar.analysis import equilibrium_residual
from wrinklevar.cli import run_command
from wrinklevar.constitutive import MaterialParams, derive_growth_constants
from wrinklevar.discretization import BoundarySpec, DeformationState, GridSpec, LoadSpec
from wrinklevar.kinematics import distributional_det_pairing
from wrinklevar.minimizer import (
    EnergyModel,
    MinimizerConfig,
    assemble_energy,
    assemble_gradient,
    continuation_sweep,
    extended_trace_state,
    freeze_w_mask,
    minimize,
    perturb_out_of_plane,
)
from wrinklevar.verify import (
    SampleBox,
    bump_testfn,
    check_blowup_H3,
    check_convexity_H1,
    check_growth_H2,
    oscillatory_map,
    planar_F,
    rank_one_closed_form,
    rank_one_second_derivative,
)

P = MaterialParams()
E3 = np.array([0.0, 0.0, 1.0])


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


# -- 1 -----------------------------------------------------------------------


def test_c01_gradient_consistency(capsys):
    t0 = time.perf_counter()
    grid = GridSpec(8, 8)
    loads = LoadSpec(m=(0.05, -0.02), b=(0.1, -0.1, 0.2))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        # interior stretch consistent with the clamp, plus nodal noise
        lam = 1.0 + 0.2 * rng.random()
        bc = BoundarySpec(stretch=lam)
        s = DeformationState.identity(grid)
        s = s.replace(h=s.h * [lam, 1.0] + 0.01 * rng.standard_normal(s.h.shape),
                      w=0.05 * rng.standard_normal(grid.shape))
        s, _ = disc.apply_boundary(s, bc)
        g = assemble_gradient(s, P, loads, bc)
        model = EnergyModel(grid, P, loads, bc)
        u = s.dofs()
        free = ~np.repeat(bc.node_mask(grid).ravel(), 3)
        fd = np.zeros_like(u)
        for i in np.flatnonzero(free):
            eps = 1e-6 * max(1.0, abs(u[i]))
            up, um = u.copy(), u.copy()
            up[i] += eps
            um[i] -= eps
            fd[i] = (model.evaluate(up, False)[0].total - model.evaluate(um, False)[0].total) / (2 * eps)
        worst = max(worst, np.abs(fd - g).max() / np.abs(g).max())
    dt = time.perf_counter() - t0
    ok = worst < 1e-5 and dt < 5.0
    report(capsys, 1, ok, f"max rel err {worst:.3e} (< 1e-5), runtime {dt:.2f}s (< 5s)")
    assert ok


# -- 2 -----------------------------------------------------------------------


def test_c02_reference_state(capsys):
    grid = GridSpec(16, 8, 2.0, 1.0)
    bc = BoundarySpec()
    s = DeformationState.identity(grid)
    E = assemble_energy(s, P, LoadSpec(), bc).total
    g = assemble_gradient(s, P, LoadSpec(), bc).reshape(grid.shape + (3,))
    gi = np.abs(g[1:-1, 1:-1]).max()
    ok = E == 0.0 and gi <= 1e-12
    report(capsys, 2, ok, f"E = {E:.3e}, max interior |grad| = {gi:.3e} (<= 1e-12)")
    assert ok


# -- 3 -----------------------------------------------------------------------


def test_c03_hypothesis_suite(capsys):
    t0 = time.perf_counter()
    h1 = check_convexity_H1(P, SampleBox(Kmax=5, Fmax=5, Jmin=0.2, Jmax=5, N=100_000, seed=0))
    h2 = check_growth_H2(P, SampleBox(Kmax=10, Fmax=10, Jmin=1e-6, Jmax=10, N=1_000_000, seed=0))
    h3 = check_blowup_H3(P, (1e-1, 1e-2, 1e-3))
    gc = derive_growth_constants(P)
    vals = h3.detail["gamma"]
    dt = time.perf_counter() - t0
    ok = (h1.violations == 0 and h2.violations == 0 and h3.passed
          and gc.C1 == pytest.approx(min(P.D * (1 - P.nu) / 2, P.c1, P.c2))
          and gc.C2 == pytest.approx(-3 * (P.c1 + P.c2)) and (gc.p, gc.q, gc.r) == (2, 2, 2)
          and vals[-1] > 1e6 - 3.3 and np.all(np.diff(vals) > 0) and dt < 30.0)
    report(capsys, 3, ok,
           f"H1 {h1.violations}/1e5, H2 {h2.violations}/1e6 (C1={gc.C1:.3g}, C2={gc.C2:.3g}), "
           f"H3 Gamma(1e-3)={vals[-1]:.6g}, runtime {dt:.2f}s (< 30s)")
    assert ok


# -- 4 -----------------------------------------------------------------------


def test_c04_rank_one_failure(capsys):
    # the witness F0 = diag(2, 0.4) has a = 4, s = lam2^2 = 0.16; its closed
    # form gives -24.54375.  The value -1.575 belongs to s = 0.4.
    g_fd = rank_one_second_derivative(P, planar_F(2.0, 0.4), E3, np.array([0.0, 1.0]), step=1e-4)
    oracle = 2 * (P.c1 * (1 - 1 / (4 * 0.16**2)) + P.c2 * (4 - 1 / 0.16**2))
    g_alt = rank_one_second_derivative(P, planar_F(2.0, np.sqrt(0.4)), E3, np.array([0.0, 1.0]), step=1e-4)
    cf_alt = rank_one_closed_form(P, 2.0, np.sqrt(0.4), 1)
    ok = abs(g_fd - oracle) <= 1e-3 and g_fd < 0 and abs(g_alt - (-1.575)) <= 1e-3 \
        and abs(cf_alt - (-1.575)) <= 1e-12
    report(capsys, 4, ok,
           f"g''(0) at diag(2,0.4), b=e2: {g_fd:.6f} vs oracle(a=4,s=0.16) {oracle:.6f}; "
           f"-1.575 reproduced at diag(2,sqrt(0.4)): {g_alt:.6f}")
    assert ok


# -- 5 -----------------------------------------------------------------------


def test_c05_distributional_determinant(capsys):
    grid = GridSpec(161, 161)
    phi = bump_testfn(grid)
    ref = disc.quadrature_integrate(phi, grid)
    ident = distributional_det_pairing(oscillatory_map(0, grid), phi, grid)
    ks = (4, 8, 16)
    nodes_per_period = 2 * np.pi / max(ks) / grid.hx
    err = np.array([abs(distributional_det_pairing(oscillatory_map(k, grid), phi, grid) - ref) for k in ks])
    rel = err / abs(ref)
    ok = abs(ident - ref) <= 1e-12 * max(1.0, abs(ref)) and np.all(np.diff(err) < 0) \
        and rel[-1] < 1e-2 and nodes_per_period >= 32
    report(capsys, 5, ok,
           f"identity |diff| {abs(ident - ref):.2e}; rel errors k=4,8,16: "
           f"{', '.join(f'{r:.3e}' for r in rel)}; {nodes_per_period:.1f} nodes/period")
    assert ok


# -- 6 -----------------------------------------------------------------------


def test_c06_poisson_contraction(capsys):
    lam = 1.3
    grid = GridSpec(16, 16)
    X1, X2 = grid.coords()
    st = DeformationState(np.stack([lam * X1, X2], -1), np.zeros(grid.shape), grid)
    frozen = np.zeros((grid.n_nodes, 3), bool)
    frozen[:, [0, 2]] = True
    res = minimize(st, P, freeze=frozen.ravel())
    lam2 = disc.grad_vec2(res.state.h, grid)[..., 1, 1]

    def phi(s):
        a = lam**2
        return P.c1 * (a + s - 3 + 1 / (a * s)) + P.c2 * (a * s + (a + s) / (a * s) - 3)

    oracle = np.sqrt(minimize_scalar(phi, bracket=(0.3, 0.6, 1.2), method="golden", tol=1e-12).x)
    spread = np.abs(lam2 - oracle).max() / oracle
    ok = res.converged and spread < 5e-5
    report(capsys, 6, ok, f"lateral stretch {lam2.mean():.8f} vs golden-section {oracle:.8f} "
                          f"(max rel dev {spread:.2e}, 4 sig. digits)")
    assert ok


# -- 7, 8, 9: shared end-to-end sweep -----------------------------------------


SWEEP_GRID = GridSpec(64, 32, 2.0, 1.0)
SWEEP_BC = BoundarySpec(("left", "right"))
SWEEP_CFG = MinimizerConfig()


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    steps = continuation_sweep(1.0, 1.3, 6, P, None, SWEEP_BC, SWEEP_CFG, grid=SWEEP_GRID)
    dt = time.perf_counter() - t0
    flat = continuation_sweep(1.0, 1.3, 6, P, None, SWEEP_BC, SWEEP_CFG, grid=SWEEP_GRID,
                              freeze=freeze_w_mask(SWEEP_GRID), perturb=False)
    return steps, flat, dt


def _wrinkled(step, flat_step):
    # strictly below the flat branch beyond rounding of the totals
    tol = 1e-12 * max(1.0, abs(flat_step.energy.total))
    return (step.converged and step.metrics.sign_change_count >= 2
            and step.energy.total < flat_step.energy.total - tol)


def test_c07_wrinkling_end_to_end(capsys, sweep):
    steps, flat, dt = sweep
    hits = [s for s, f in zip(steps, flat) if _wrinkled(s, f)]
    minJ = min(min(s.trace.min_J) for s in steps)
    mono = all(s.trace.is_monotone() for s in steps)
    gaps = ", ".join(f"{s.stretch:.2f}:{s.energy.total - f.energy.total:+.1e}/n={s.metrics.sign_change_count}"
                     f"/A={s.metrics.amplitude:.1e}" for s, f in zip(steps, flat))
    ok = bool(hits) and minJ > 0 and mono and dt < 60.0
    report(capsys, 7, ok, f"wrinkled steps {len(hits)}/6; E-E_flat/count/amplitude per lambda [{gaps}]; "
                          f"min J {minJ:.4f}; monotone {mono}; runtime {dt:.1f}s (< 60s)")
    assert ok


def test_c08_weak_form_residual(capsys, sweep):
    steps, flat, _ = sweep
    wrinkled = [s for s, f in zip(steps, flat) if _wrinkled(s, f)]
    target = wrinkled[-1] if wrinkled else steps[-1]
    bc = SWEEP_BC.with_stretch(target.stretch)
    rep = equilibrium_residual(target.state, P, 1e12, 20, 0, bc=bc)
    gtol = max(SWEEP_CFG.gtol_rel * target.trace.gradnorm[0], SWEEP_CFG.gtol_abs)
    rng = np.random.default_rng(0)
    interior = ~bc.node_mask(SWEEP_GRID)
    noisy = target.state.replace(w=target.state.w + 1e-3 * rng.standard_normal(SWEEP_GRID.shape) * interior)
    bad = equilibrium_residual(noisy, P, 1e12, 20, 0, bc=bc)
    small = rep.max_abs <= 10 * gtol
    separated = bad.max_abs >= 100 * rep.max_abs
    ok = bool(wrinkled) and small and separated
    premise = "wrinkled state" if wrinkled else "no wrinkled converged state exists (premise unmet)"
    report(capsys, 8, ok, f"{premise}; at lambda={target.stretch:.2f}: max residual {rep.max_abs:.2e} "
                          f"(10*gtol = {10 * gtol:.2e}), perturbed {bad.max_abs:.2e} "
                          f"(ratio {bad.max_abs / max(rep.max_abs, 1e-300):.1e}, need >= 1e2)")
    assert ok


def test_c09_descent_contract(capsys, sweep):
    steps, flat, _ = sweep
    runs = [(s.trace, s.trace.energy[0]) for s in steps + flat]
    rng = np.random.default_rng(9)
    grid = GridSpec(24, 12, 2.0, 1.0)
    for k in range(4):
        bc = BoundarySpec(stretch=1.0 + 0.1 * k)
        start = perturb_out_of_plane(extended_trace_state(grid, bc), 0.02 * rng.random(), 1 + k, bc)
        loads = LoadSpec(m=tuple(0.01 * rng.standard_normal(2)), b=tuple(0.05 * rng.standard_normal(3)))
        res = minimize(start, P, loads, bc, MinimizerConfig(max_iter=300))
        runs.append((res.trace, res.initial_energy))
    ok = all(t.energy[-1] <= e0 and t.is_monotone() and min(t.min_J) > SWEEP_CFG.jmin for t, e0 in runs)
    report(capsys, 9, ok, f"{len(runs)} runs: final <= initial, monotone traces, all iterates J > J_min")
    assert ok


# -- 10 ----------------------------------------------------------------------


def test_c10_determinism(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("boundary.stretch = 1.2\nverify.samples_h1 = 50000\nverify.samples_h2 = 50000\n")
    same = []
    for cmd in ("minimize", "verify"):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{cmd}{rep}"
            run_command([cmd, "--config", str(cfg), "--out", str(out), "--seed", "7"])
            files = ["report.txt"] + (["trace.csv"] if cmd == "minimize" else [])
            outs.append([(out / f).read_bytes() for f in files])
        same.append(outs[0] == outs[1])
    ok = all(same)
    report(capsys, 10, ok, f"bit-identical outputs: minimize (trace.csv, report.txt) {same[0]}, "
                           f"verify (report.txt) {same[1]}")
    assert ok
