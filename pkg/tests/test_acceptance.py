"""Acceptance suite: one check per criterion, each at its stated tolerance.

Run under pytest (a summary line per criterion is printed at the end of the
session) or directly with ``python3 tests/test_acceptance.py``.
"""
import functools
import time

import numpy as np
import pytest

from helmoras.decomposition import prolong_weighted, restrict
from helmoras.experiments import PLANE_WAVE_DIRECTION, build_problem, run_gmres
from helmoras.fem import FeSpace, assemble_helmholtz, assemble_load, l2_error, plane_wave, plane_wave_data
from helmoras.linalg import factorize
from helmoras.mesh import build_rect_mesh, mesh_size_for_wavenumber
from helmoras.oras import norm_E_power, residual_correction_step, richardson

RESULTS = {}


def record(name, ok, detail):
    RESULTS[name] = (bool(ok), detail)
    assert ok, f"{name}: {detail}"


def summary_lines():
    return [f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}" for name, (ok, detail) in sorted(RESULTS.items())]


def rand(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@functools.lru_cache(maxsize=None)
def problem(geometry, k, N, cells_per_unit=None, mesh_constant=1.3, with_metric=True):
    return build_problem(geometry, k, N, cells_per_unit=cells_per_unit,
                         mesh_constant=mesh_constant, with_metric=with_metric)


@functools.lru_cache(maxsize=None)
def norm(geometry, k, N, s, mesh_constant=1.3):
    est = norm_E_power(problem(geometry, k, N, mesh_constant=mesh_constant).op, s)
    assert est.converged, est
    return est.norm


def test_criterion_1_algebraic_identities():
    p = problem("strip", 10.0, 2, cells_per_unit=12)
    op, cover = p.op, p.cover
    rng = np.random.default_rng(2024)
    worst = {}

    # partition of unity over 100 random vectors
    e = 0.0
    for _ in range(100):
        v = rand(rng, op.n)
        w = sum(prolong_weighted(cover, l, restrict(cover, l, v)) for l in range(len(cover)))
        e = max(e, np.linalg.norm(w - v) / np.linalg.norm(v))
    worst["pou"] = e

    # powers through the block operator
    e = 0.0
    for s in range(1, 5):
        v = rand(rng, op.n)
        w = op.restrict_all(v)
        for _ in range(s):
            w = op.apply_T_block(w)
        lhs = op.apply_E_power(v, s)
        e = max(e, np.linalg.norm(lhs - op.prolong_weighted_all(w)) / np.linalg.norm(lhs))
    worst["power"] = e

    # residual correction versus one Richardson step
    f = assemble_load(p.space, plane_wave_data(10.0, PLANE_WAVE_DIRECTION))
    e = 0.0
    for _ in range(5):
        u = rand(rng, op.n)
        a = residual_correction_step(op, u, f)
        b = richardson(op, f, u, 1)[0][1]
        e = max(e, np.linalg.norm(a - b) / np.linalg.norm(b))
    worst["step"] = e

    # adjoint identity
    e = 0.0
    for _ in range(20):
        v, w = rand(rng, op.n), rand(rng, op.n)
        lhs = np.vdot(w, op.apply_E(v))
        rhs = np.vdot(op.apply_E_adjoint(w), v)
        e = max(e, abs(lhs - rhs) / abs(lhs))
    worst["adjoint"] = e

    ok = (op.n == 825 and worst["pou"] <= 1e-13 and worst["power"] <= 1e-9
          and worst["step"] <= 1e-12 and worst["adjoint"] <= 1e-11)
    detail = f"dofs={op.n} " + " ".join(f"{k}={v:.1e}" for k, v in worst.items())
    record("criterion 1 (algebraic identities)", ok, detail)


def test_criterion_2_strip_k20():
    n1, n2, n3 = (norm("strip", 20.0, 2, s) for s in (1, 2, 3))
    ok = 3.5 <= n1 <= 8.5 and n2 < 1 and n3 < 0.15 and n1 / n2 >= 4 and n2 / n3 >= 4
    record("criterion 2 (strip k=20 N=2)", ok, f"norms {n1:.3g} / {n2:.3g} / {n3:.3g}, reference 5.6 / 0.52 / 0.05")


def test_criterion_3_k_growth():
    n20, n40 = norm("strip", 20.0, 2, 1), norm("strip", 40.0, 2, 1)
    ratio = n40 / n20
    record("criterion 3 (k growth of ||E||)", 1.2 <= ratio <= 2.5,
           f"||E||(40)/||E||(20) = {n40:.3g}/{n20:.3g} = {ratio:.3f}, reference 1.6")


def test_criterion_4_checkerboard_2x2():
    n3, n4 = norm("checkerboard", 40.0, 2, 3), norm("checkerboard", 40.0, 2, 4)
    record("criterion 4 (checkerboard k=40 2x2)", n4 < 0.5 and n4 < n3,
           f"||E^3||={n3:.3g} ||E^4||={n4:.3g}, reference 0.72 / 0.16")


def test_criterion_5_gmres_8x8():
    res = run_gmres(problem("checkerboard", 20.0, 8, with_metric=False), tol=1e-6, max_iter=200)
    ok = res.converged and 20 <= res.iterations <= 50
    record("criterion 5 (GMRES k=20 8x8)", ok, f"{res.iterations} iterations, reference 34")


def test_criterion_6_first_contractive_power():
    norms = []
    for s in range(1, 9):
        norms.append(norm("checkerboard", 40.0, 4, s))
    first = next((s for s, v in enumerate(norms, 1) if v < 1), None)
    tail = norms[-3:]
    ok = first is not None and first <= 8
    record("criterion 6 (first s with ||E^s||<1, k=40 4x4)", ok,
           f"s={first}; norms " + " ".join(f"{v:.3g}" for v in norms))
    # regression baseline: decreasing tail of the curve
    record("extra (monotone tail k=40 4x4)", tail[0] > tail[1] > tail[2], " > ".join(f"{v:.3g}" for v in tail))


def test_criterion_7_plane_wave_convergence():
    k = 10.0
    n0 = mesh_size_for_wavenumber(k)
    exact = plane_wave(k, PLANE_WAVE_DIRECTION)
    hs, errs = [], []
    for j in range(4):
        n = n0 * 2 ** j
        space = FeSpace(build_rect_mesh((0, 0), 1, 1, n, n), 2)
        A = assemble_helmholtz(space, k)
        f = assemble_load(space, plane_wave_data(k, PLANE_WAVE_DIRECTION))
        u = factorize(A).solve(f)
        hs.append(1 / n)
        errs.append(l2_error(space, u, exact))
    rates = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2)
    ok = rates.min() >= 2.8
    record("criterion 7 (plane-wave L2 order, degree 2)", ok,
           f"n={n0}..{n0 * 8} rates " + " ".join(f"{r:.2f}" for r in rates))


def test_criterion_8_fixed_point_and_single_subdomain():
    p = problem("strip", 10.0, 2, cells_per_unit=12)
    f = assemble_load(p.space, plane_wave_data(10.0, PLANE_WAVE_DIRECTION))
    ustar = p.op.A_factor.solve(f)
    its, _ = richardson(p.op, f, ustar, 5)
    drift = max(np.linalg.norm(u - ustar) for u in its[1:]) / np.linalg.norm(ustar)

    p1 = problem("strip", 10.0, 1)
    e1 = norm_E_power(p1.op, 1).norm
    res = run_gmres(p1)
    ok = drift <= 1e-11 and e1 <= 1e-10 and res.converged and res.iterations == 1
    record("criterion 8 (fixed point, N=1 collapse)", ok,
           f"drift={drift:.1e} ||E||(N=1)={e1:.1e} gmres_iters={res.iterations}")


@pytest.mark.parametrize("N", [6, 8])
def test_extra_non_contractive_cells(N):
    op = problem("checkerboard", 20.0, N).op
    s = N * N
    a, b = norm_E_power(op, s - 1), norm_E_power(op, s)
    record(f"extra (k=20 {N}x{N} not contractive)", a.norm > 1 and b.norm > 1,
           f"||E^{s - 1}||={a.norm:.3g} ||E^{s}||={b.norm:.3g}")


@pytest.mark.xfail(strict=True, reason="||E^s|| grows like h^(-1/2) under refinement; see the scaling check below")
def test_extra_mesh_constant_robustness():
    base = [norm("strip", 20.0, 2, s) for s in (1, 2, 3)]
    fine = [norm("strip", 20.0, 2, s, mesh_constant=0.65) for s in (1, 2, 3)]
    change = max(abs(a - b) / b for a, b in zip(fine, base))
    record("extra (C_mesh halved changes norms < 30%, strip k=20 N=2)", change < 0.3,
           "max relative change {:.3f}; ".format(change) + " ".join(f"{v:.3g}" for v in fine))


def test_extra_mesh_scaling_law():
    # at fixed k the norms follow h^(-1/2): ratio close to sqrt(n_fine / n_coarse)
    n0 = problem("strip", 20.0, 2).cells_per_unit
    n1 = problem("strip", 20.0, 2, mesh_constant=0.65).cells_per_unit
    ratios = [norm("strip", 20.0, 2, s, mesh_constant=0.65) / norm("strip", 20.0, 2, s) for s in (1, 2, 3)]
    expected = np.sqrt(n1 / n0)
    ok = all(abs(r / expected - 1) < 0.1 for r in ratios)
    record("extra (norm ratio vs sqrt(h0/h1), strip k=20 N=2)", ok,
           f"n {n0}->{n1}, sqrt ratio {expected:.3f}, observed " + " ".join(f"{r:.3f}" for r in ratios))


if __name__ == "__main__":
    t0 = time.perf_counter()
    for name, fn in list(globals().items()):
        if not name.startswith("test_"):
            continue
        args = [[6], [8]] if name == "test_extra_non_contractive_cells" else [[]]
        for a in args:
            try:
                fn(*a)
            except AssertionError:
                pass
    print("\n".join(summary_lines()))
    print(f"total {time.perf_counter() - t0:.0f}s")
