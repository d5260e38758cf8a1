"""Acceptance criteria at their stated tolerances; each prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import divfree_data, grad_p_bench, grad_u_bench, p_bench, benchmark_data, u_bench
from test_assembly import CASES, dense_oracle, reference_triangle
from epsstokes.analysis import fit_slope, run_mms, run_sweep
from epsstokes.assembly import assemble_matrix
from epsstokes.asymptotics import (Expansion, direct_scaled_remainder, remainder_curve,
                                   remainder_fits, telescoped_remainder)
from epsstokes.dofs import Field, build_dofmap, subtract_mean
from epsstokes.mesh import BoundaryPartition, build_structured
from epsstokes.norms import error_norm
from epsstokes.systems import ProblemData, es_system, solve_es, solve_pp, solve_stokes


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_1_pp_exactness(report):
    t0 = time.perf_counter()
    m = build_structured(32, 32)
    s = solve_pp(m, benchmark_data())
    eu = error_norm(s.velocity, u_bench, gradient=grad_u_bench)
    ep = error_norm(s.pressure, p_bench, gradient=grad_p_bench)
    dt = time.perf_counter() - t0
    worst = max(eu.l2, eu.h1, ep.l2, ep.h1)
    report(1, worst <= 1e-9 and dt < 5,
           f"PP errors u L2 {eu.l2:.2e} H1 {eu.h1:.2e}, p L2 {ep.l2:.2e} H1 {ep.h1:.2e} "
           f"(tol 1e-9), {dt:.2f} s (limit 5 s)")


def test_2_large_eps_rate(report):
    t0 = time.perf_counter()
    res = run_sweep(build_structured(32, 32), benchmark_data(), [10.0, 1e2, 1e3, 1e4], "pp")
    dt = time.perf_counter() - t0
    su, sp_ = res.fits["err_u_h1"], res.fits["err_p_h1"]
    ok = abs(su.slope + 1) <= 0.15 and abs(sp_.slope + 1) <= 0.15 and dt < 30
    report(2, ok, f"slopes u {su.slope:.4f} p {sp_.slope:.4f} over eps {su.window} "
                  f"(target -1 +- 0.15), {dt:.1f} s (limit 30 s)")


def test_3_small_eps_rate(report):
    t0 = time.perf_counter()
    eps = [1e-4, 1e-3, 1e-2, 1e-1]
    res = run_sweep(build_structured(32, 32), benchmark_data(), eps, "stokes")
    dt = time.perf_counter() - t0
    fu = res.fits["err_u_h1"]
    eu = [r["err_u_h1"] for r in res.rows]
    ep = [r["err_p_l2"] for r in res.rows]
    all_points = fit_slope([(r["eps"], r["err_u_h1"]) for r in res.rows])
    mono_u = all(a < b for a, b in zip(eu, eu[1:]))
    mono_p = all(a < b for a, b in zip(ep, ep[1:]))
    ok = (not fu.degenerate) and 0.5 <= fu.slope <= 1.15 and mono_u and mono_p and dt < 30
    report(3, ok, f"velocity H1 slope {fu.slope:.3f} over window {fu.window} "
                  f"(all four points: {all_points.slope:.3f}; required [0.5, 1.15]); "
                  f"floor {res.floors['err_u_h1']:.2e}; errors {['%.3g' % e for e in eu]}; "
                  f"monotone u {mono_u}, [p] L2 {mono_p}; {dt:.1f} s")


def test_4_divergence_free_collapse(report):
    m = build_structured(32, 32)
    pp = solve_pp(m, divfree_data())
    st = solve_stokes(m, divfree_data())
    worst = 0.0
    for eps in (1e-4, 1.0, 1e4):
        es = solve_es(m, divfree_data(), eps)
        worst = max(worst, error_norm(es.velocity, pp.velocity).h1, error_norm(es.velocity, st.velocity).h1)
    report(4, worst <= 1e-9, f"max velocity H1 distance to PP and Stokes {worst:.2e} (tol 1e-9)")


def test_5_asymptotic_expansion(report):
    m = build_structured(32, 32)
    data = benchmark_data()
    exp = Expansion(m, data, 2)
    grid = [10.0, 1e2, 1e3, 1e4]
    f1 = remainder_fits(remainder_curve(m, data, 1, grid, exp), exp.pp)["rem_u_h1"]
    f2 = remainder_fits(remainder_curve(m, data, 2, grid, exp), exp.pp)["rem_u_h1"]
    tele = 0.0
    for eps in (10.0, 100.0):
        es = solve_es(m, data, eps)
        for k in (1, 2):
            d = error_norm(telescoped_remainder(exp, es, eps, k), direct_scaled_remainder(exp, es, eps, k)).h1
            tele = max(tele, d)
    ok = abs(f1.slope + 2) <= 0.15 and abs(f2.slope + 3) <= 0.25 and tele <= 1e-8
    report(5, ok, f"k=1 slope {f1.slope:.4f} over {f1.window}, k=2 slope {f2.slope:.4f} over "
                  f"{f2.window}, telescoping gap {tele:.2e} (tol 1e-8)")


def test_6_coercivity(report):
    m = build_structured(16, 16)
    rng = np.random.default_rng(2024)
    worst = 0.0
    positive = True
    for eps in (1e-3, 1.0, 1e3):
        ops, system, layout = es_system(m, benchmark_data(), eps)
        keep = system.free < layout.nu + layout.np_
        K = system.matrix[keep][:, keep]
        for _ in range(100):
            x = rng.standard_normal(keep.sum())
            full = np.zeros(system.n_total)
            full[system.free[keep]] = x
            v, q, _ = layout.split(full)
            expected = error_norm(Field(ops.V, v)).h1_semi ** 2 + eps * error_norm(Field(ops.Q, q)).h1_semi ** 2
            value = x @ (K @ x)
            positive &= value > 0
            worst = max(worst, abs(value - expected) / expected)
    report(6, positive and worst <= 1e-10, f"max relative gap {worst:.2e} (tol 1e-10), all positive {positive}")


def test_7_assembly_oracle(report):
    worst = 0.0
    for nx, ny in ((1, 1), (2, 1), (1, 2), (2, 2)):
        m = build_structured(nx, ny)
        for form, rk, ck in CASES:
            row, col = build_dofmap(m, rk), build_dofmap(m, ck)
            worst = max(worst, np.max(np.abs(assemble_matrix(m, row, col, form).toarray() - dense_oracle(m, row, col, form))))
    t = reference_triangle()
    d = build_dofmap(t, "P1")
    K = assemble_matrix(t, d, d, "laplacian_scalar").toarray()
    M = assemble_matrix(t, d, d, "mass").toarray()
    hand_k = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    hand_m = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24
    gap = max(np.max(np.abs(K - hand_k)), np.max(np.abs(M - hand_m)))
    report(7, worst <= 1e-12 and gap <= 1e-15,
           f"sparse vs dense oracle {worst:.2e} (tol 1e-12); reference P1 matrices gap {gap:.1e}")


def test_8_mixed_bc_consistency(report):
    m = build_structured(32, 32)
    neu = benchmark_data()
    mix = benchmark_data(pressure_bc="mixed", partition=BoundaryPartition.mixed({"left"}), p_b=p_bench)

    def gap(a, b):
        return max(error_norm(a.velocity, b.velocity).h1,
                   error_norm(subtract_mean(a.pressure), subtract_mean(b.pressure)).h1)

    gaps = {"pp": gap(solve_pp(m, neu), solve_pp(m, mix))}
    for eps in (1e-2, 1.0, 1e2):
        gaps[f"es {eps:g}"] = gap(solve_es(m, neu, eps), solve_es(m, mix, eps))
    ok = all(g <= 1e-9 for g in gaps.values())
    report(8, ok, "H1 gaps after mean alignment " + ", ".join(f"{k}: {v:.2e}" for k, v in gaps.items())
           + " (tol 1e-9)")


def test_9_taylor_hood_mms(report):
    poly = ProblemData(F=lambda x, y: (-2.0 + 0 * x, 0 * y), u_b=lambda x, y: (x * x, -2 * x * y))
    s = solve_stokes(build_structured(8, 8), poly)
    exact_u = error_norm(s.velocity, lambda x, y: (x * x, -2 * x * y),
                         gradient=lambda x, y: ((2 * x, 0 * x), (-2 * y, -2 * x))).h1
    exact_p = error_norm(s.pressure).l2
    pi = np.pi
    u = lambda x, y: (np.sin(pi * x) * np.cos(pi * y), -np.cos(pi * x) * np.sin(pi * y))
    p = lambda x, y: np.sin(pi * x) * np.sin(pi * y)
    F = lambda x, y: (2 * pi**2 * u(x, y)[0] + pi * np.cos(pi * x) * np.sin(pi * y),
                      2 * pi**2 * u(x, y)[1] + pi * np.sin(pi * x) * np.cos(pi * y))
    res = run_mms(ProblemData(F=F, u_b=u), "stokes", u, p, [8, 16, 32])
    ou, op = res.fits["err_u_h1"].slope, res.fits["err_p_l2"].slope
    ok = exact_u <= 1e-10 and exact_p <= 1e-10 and abs(ou - 2) <= 0.2 and abs(op - 2) <= 0.2
    report(9, ok, f"polynomial case errors u {exact_u:.1e} p {exact_p:.1e}; smooth case orders "
                  f"velocity H1 {ou:.3f}, pressure L2 {op:.3f} (target 2 +- 0.2)")
