"""Sampling checks of the structural properties of the energy density.

Every sampler is deterministic in ``(seed, N, box)``: the sample stream is
cut into fixed-size chunks, chunk ``i`` draws from the ``i``-th child of
``SeedSequence(seed)``, and chunk results are merged with min/sum
reductions.  The number of worker threads therefore never changes a report.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .constitutive import (
    GrowthUnavailable,
    bending_energy,
    derive_growth_constants,
    gamma_density,
    growth_lower_bound,
    membrane_energy_exact,
)
from .kinematics import det2, distributional_det_pairing

CHUNK = 1 << 15


@dataclass(frozen=True)
class SampleBox:
    Kmax: float = 5.0
    Fmax: float = 5.0
    Jmin: float = 0.2
    Jmax: float = 5.0
    N: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.Jmin > 0:
            raise ValueError("Jmin must be > 0")
        if not self.Jmax >= self.Jmin:
            raise ValueError("Jmax must be >= Jmin")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.Kmax < 0 or self.Fmax < 0:
            raise ValueError("Kmax and Fmax must be >= 0")


@dataclass
class HypothesisReport:
    name: str
    passed: bool
    violations: int
    margin: float
    witness: dict = None
    seed: int = None
    samples: int = 0
    detail: dict = field(default_factory=dict)

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        wit = "-"
        if self.witness:
            wit = ";".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
        return (f"{self.name} {verdict} violations={self.violations} "
                f"samples={self.samples} margin={self.margin:.17g} witness={wit}")


def _fmt(v):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        return f"{float(a):.17g}"
    return "[" + ",".join(f"{x:.17g}" for x in a.ravel()) + "]"


# -- sampling ----------------------------------------------------------------


def _ball(rng, n, dim, radius):
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return v * r[:, None]


def _sample_points(rng, n, box):
    """``(K, F, J)`` uniformly in the Frobenius balls and the J interval."""
    k = _ball(rng, n, 3, box.Kmax)
    K = np.empty((n, 2, 2))
    K[:, 0, 0] = k[:, 0]
    K[:, 0, 1] = K[:, 1, 0] = k[:, 1] / np.sqrt(2.0)
    K[:, 1, 1] = k[:, 2]
    F = _ball(rng, n, 6, box.Fmax).reshape(n, 3, 2)
    J = box.Jmin + (box.Jmax - box.Jmin) * rng.random(n)
    return K, F, J


def _chord_partner(rng, a, c):
    """Point on the segment from ``a`` towards ``c`` at a log-uniform fraction.

    Pairs then span chord lengths from 1e-3 of the box up to the full box,
    which exposes thin directions of negative curvature that independent
    pairs almost never straddle.  Stays in the box by convexity.
    """
    n = a[0].shape[0]
    frac = 10.0 ** rng.uniform(-3.0, 0.0, n)
    out = []
    for x, y in zip(a, c):
        f = frac.reshape((n,) + (1,) * (x.ndim - 1))
        out.append(x + f * (y - x))
    return tuple(out)


def _chunked(box, fn, workers=1):
    sizes = [CHUNK] * (box.N // CHUNK)
    if box.N % CHUNK:
        sizes.append(box.N % CHUNK)
    seeds = np.random.SeedSequence(box.seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), n) for s, n in zip(seeds, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def _merge(name, parts, box):
    """Combine ``(violations, worst margin, witness)`` chunk results."""
    violations = sum(p[0] for p in parts)
    worst = min(parts, key=lambda p: p[1])
    return HypothesisReport(
        name=name,
        passed=violations == 0,
        violations=violations,
        margin=float(worst[1]),
        witness=worst[2] if violations else None,
        seed=box.seed,
        samples=box.N,
    )


def _midpoint_check(evaluate, draw):
    def run(rng, n):
        a, b = draw(rng, n), draw(rng, n)
        mid = tuple(0.5 * (x + y) for x, y in zip(a, b))
        ga, gb, gm = evaluate(*a), evaluate(*b), evaluate(*mid)
        tol = 1e-12 * np.maximum(1.0, np.abs(ga) + np.abs(gb))
        margin = 0.5 * (ga + gb) - gm
        bad = margin < -tol
        i = int(np.argmin(margin + tol))
        witness = {"gap": -margin[i]}
        for tag, pt in (("a", a), ("b", b)):
            for j, arr in enumerate(pt):
                witness[f"{tag}{j}"] = arr[i]
        return int(bad.sum()), float(margin[i]), witness

    return run


def check_convexity_H1(params, box=SampleBox(), slice=None, workers=1):
    """Midpoint convexity of ``Gamma(K, F, J)`` on pairs drawn from ``box``.

    ``slice="bending"`` freezes ``(F, J)`` within each pair and
    ``slice="membrane"`` freezes ``K``.
    """
    if slice not in (None, "bending", "membrane"):
        raise ValueError(f"unknown slice {slice!r}")

    def evaluate(K, F, J):
        return gamma_density(K, F, J, params)

    def run(rng, n):
        K0, F0, J0 = _sample_points(rng, n, box)
        K1, F1, J1 = _chord_partner(rng, (K0, F0, J0), _sample_points(rng, n, box))
        if slice == "bending":
            F1, J1 = F0, J0
        elif slice == "membrane":
            K1 = K0
        pairs = iter([(K0, F0, J0), (K1, F1, J1)])
        return _midpoint_check(evaluate, lambda r, m: next(pairs))(rng, n)

    name = "H1_convexity" + (f"[{slice}]" if slice else "")
    return _merge(name, _chunked(box, run, workers), box)


def check_growth_H2(params, box=SampleBox(Kmax=10.0, Fmax=10.0, Jmin=1e-6, Jmax=10.0,
                                          N=1_000_000), workers=1):
    growth = derive_growth_constants(params)

    def run(rng, n):
        K, F, J = _sample_points(rng, n, box)
        margin = gamma_density(K, F, J, params) - growth_lower_bound(K, F, J, growth)
        bad = margin < -1e-12
        i = int(np.argmin(margin))
        return int(bad.sum()), float(margin[i]), {"K": K[i], "F": F[i], "J": J[i]}

    rep = _merge("H2_growth", _chunked(box, run, workers), box)
    rep.detail = {"C1": growth.C1, "C2": growth.C2, "p": growth.p,
                  "q": growth.q, "r": growth.r}
    return rep


def embedded_identity():
    F = np.zeros((3, 2))
    F[0, 0] = F[1, 1] = 1.0
    return F


def check_blowup_H3(params, J_sequence=(1e-1, 1e-2, 1e-3)):
    """Blow-up of ``Gamma(0, I, J)`` as ``J`` decreases to zero."""
    J = np.asarray(J_sequence, dtype=float)
    if np.any(J <= 0) or np.any(np.diff(J) >= 0):
        raise ValueError("J_sequence must be positive and strictly decreasing")
    vals = gamma_density(np.zeros((2, 2)), embedded_identity(), J, params)
    barrier = params.c1 / J**2 - 3.0 * (params.c1 + params.c2)
    margin = vals - barrier
    below = J < 1.0
    mono = np.diff(vals[below]) > 0
    violations = int(np.sum(margin <= 0) + np.sum(~mono))
    i = int(np.argmin(margin))
    return HypothesisReport(
        name="H3_blowup",
        passed=violations == 0,
        violations=violations,
        margin=float(margin[i]),
        witness=None if violations == 0 else {"J": J[i], "gamma": vals[i]},
        samples=J.size,
        detail={"J": J, "gamma": vals},
    )


# -- rank-one convexity ------------------------------------------------------


class NoWitnessFound(RuntimeError):
    pass


@dataclass(frozen=True)
class RankOneWitness:
    F0: np.ndarray
    a: np.ndarray
    b: np.ndarray
    second_derivative: float


def rank_one_second_derivative(params, F0, a, b, step=1e-4, K=None):
    """Second central difference of ``t -> W(K, F0 + t a (x) b)`` at 0.

    ``W`` uses the Mooney-Rivlin membrane in ``C = F^T F`` with the exact
    ``det C``.
    """
    K = np.zeros((2, 2)) if K is None else K
    ab = np.outer(a, b)
    ts = np.array([-step, 0.0, step])
    F = F0[None] + ts[:, None, None] * ab[None]
    g = bending_energy(K, params) + membrane_energy_exact(F, params)
    return float((g[0] - 2.0 * g[1] + g[2]) / step**2)


def rank_one_closed_form(params, lam1, lam2, b_index):
    """``2 b.S b`` with ``S = dPhi/dC`` at ``C = diag(lam1^2, lam2^2)``, ``b = e_{b_index+1}``."""
    a, s = lam1**2, lam2**2
    if b_index == 0:
        a, s = s, a
    return 2.0 * (params.c1 * (1.0 - 1.0 / (a * s * s)) + params.c2 * (a - 1.0 / (s * s)))


def planar_F(lam1, lam2):
    F = np.zeros((3, 2))
    F[0, 0], F[1, 1] = lam1, lam2
    return F


def find_rank_one_nonconvexity(params, lam1_grid=None, lam2_grid=None, step=1e-4):
    """Scan planar stretches ``diag(l1, l2)`` and out-of-plane directions ``e3 (x) b``."""
    lam1_grid = np.arange(1.0, 3.0001, 0.1) if lam1_grid is None else lam1_grid
    lam2_grid = np.arange(1.0, 0.0999, -0.05) if lam2_grid is None else lam2_grid
    e3 = np.array([0.0, 0.0, 1.0])
    for l1 in lam1_grid:
        for l2 in lam2_grid:
            F0 = planar_F(l1, l2)
            for bi in (0, 1):
                b = np.eye(2)[bi]
                g2 = rank_one_second_derivative(params, F0, e3, b, step)
                if g2 < 0:
                    return RankOneWitness(F0, e3, b, g2)
    raise NoWitnessFound("no witness found on the scan grid")


def rank_one_report(params):
    try:
        wit = find_rank_one_nonconvexity(params)
    except NoWitnessFound:
        return HypothesisReport("rank_one_failure", False, 0, 0.0,
                                witness={"found": 0.0})
    return HypothesisReport(
        name="rank_one_failure",
        passed=True,
        violations=0,
        margin=-wit.second_derivative,
        witness={"F0": wit.F0, "a": wit.a, "b": wit.b, "g2": wit.second_derivative},
        samples=1,
    )


# -- planar polyconvexity ----------------------------------------------------


def planar_representative(F, delta, params):
    """``(F, delta) -> c1(|F|^2 + delta^-2 - 3) + c2(delta^2 + |F|^2 delta^-2 - 3)``."""
    F2 = np.sum(np.asarray(F) ** 2, axis=(-2, -1))
    d2 = np.asarray(delta, dtype=float) ** 2
    return params.c1 * (F2 + 1.0 / d2 - 3.0) + params.c2 * (d2 + F2 / d2 - 3.0)


def check_planar_polyconvexity(params, box=SampleBox(), frozen_delta=False, workers=1):
    def draw(rng, n):
        F = _ball(rng, n, 4, box.Fmax).reshape(n, 2, 2)
        d = box.Jmin + (box.Jmax - box.Jmin) * rng.random(n)
        return F, d

    def evaluate(F, d):
        return planar_representative(F, d, params)

    def run(rng, n):
        Fa, da = draw(rng, n)
        Fb, db = _chord_partner(rng, (Fa, da), draw(rng, n))
        if frozen_delta:
            db = da
        pairs = iter([(Fa, da), (Fb, db)])
        return _midpoint_check(evaluate, lambda r, m: next(pairs))(rng, n)

    name = "planar_polyconvexity" + ("[frozen_delta]" if frozen_delta else "")
    return _merge(name, _chunked(box, run, workers), box)


# -- distributional determinant ----------------------------------------------


def oscillatory_map(k, grid):
    """``x + (0.9/k)(sin k x1, sin k x2)``; ``k = 0`` gives the identity."""
    X1, X2 = grid.coords()
    if k == 0:
        return np.stack([X1, X2], axis=-1)
    a = 0.9 / k
    return np.stack([X1 + a * np.sin(k * X1), X2 + a * np.sin(k * X2)], axis=-1)


def oscillatory_det(k, grid):
    X1, X2 = grid.coords()
    if k == 0:
        return np.ones(grid.shape)
    return (1.0 + 0.9 * np.cos(k * X1)) * (1.0 + 0.9 * np.cos(k * X2))


def bump_testfn(grid, rings=2):
    """Product of cubed polynomial bumps ``((t - lo)(hi - t))^3``.

    ``lo``/``hi`` sit ``rings`` nodes inside the boundary, so the function
    is C^2 and vanishes on the outer node rings.
    """
    X1, X2 = grid.coords()

    def bump(x, L, h):
        lo, hi = rings * h, L - rings * h
        return np.clip((x - lo) * (hi - x), 0.0, None) ** 3

    return bump(X1, grid.Lx, grid.hx) * bump(X2, grid.Ly, grid.hy)


def direct_det_quadrature(hfield, testfn, grid):
    """``int det(grad h) testfn dx`` with the discrete gradient."""
    return disc.quadrature_integrate(det2(disc.grad_vec2(hfield, grid)) * testfn, grid)


def weak_convergence_demo(k_list, testfn, grid):
    k_list = list(k_list)
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be increasing")
    return [distributional_det_pairing(oscillatory_map(k, grid), testfn, grid)
            for k in k_list]


def weak_convergence_report(grid=None, k_list=(4, 8, 16)):
    grid = grid or disc.GridSpec(161, 161)
    phi = bump_testfn(grid)
    limit = disc.quadrature_integrate(phi, grid)
    vals = np.array(weak_convergence_demo(k_list, phi, grid))
    err = np.abs(vals - limit)
    shrinking = bool(np.all(np.diff(err) < 0))
    return HypothesisReport(
        name="weak_det_convergence",
        passed=shrinking,
        violations=int(np.sum(np.diff(err) >= 0)),
        margin=float(err[-1] / abs(limit)),
        witness=None if shrinking else {"k": np.array(k_list, float), "err": err},
        samples=len(k_list),
        detail={"k": list(k_list), "pairing": vals, "limit": limit, "error": err},
    )


def run_suite(params, seed=0, n_h1=100_000, n_h2=1_000_000, workers=1):
    box1 = SampleBox(N=n_h1, seed=seed)
    box2 = SampleBox(Kmax=10.0, Fmax=10.0, Jmin=1e-6, Jmax=10.0, N=n_h2, seed=seed)
    try:
        h2 = check_growth_H2(params, box2, workers=workers)
    except GrowthUnavailable as exc:
        h2 = HypothesisReport("H2_growth", False, 0, float("nan"),
                              witness=None, seed=seed, detail={"reason": str(exc)})
    return [
        check_convexity_H1(params, box1, workers=workers),
        h2,
        check_blowup_H3(params),
        rank_one_report(params),
        check_planar_polyconvexity(params, box1, workers=workers),
        weak_convergence_report(),
    ]
