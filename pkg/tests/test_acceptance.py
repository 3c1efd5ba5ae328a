"""Acceptance criteria, one test (and one PASS/FAIL summary line) each.

Tolerances are pinned as module constants. Exact propagators come from
``exact_evolve``, whose step-doubling certificate is cross-checked against an
adaptive Runge-Kutta integrator in ``test_propagator.py``.
"""

import math
import subprocess
import sys
import time

import mpmath
import numpy as np
import pytest

from tdsim import operators as ops
from tdsim.counting import CountingParams, census, crossover, gate_counts, volume_fraction
from tdsim.propagator import exact_evolve
from tdsim.randomized import McConfig, average_step, mc_average_step, randomized_product_formula, verify_avg_bound
from tdsim.scenarios import BUILTIN_MODELS, ac_stark, builtin_model, random_2local, telegraph_pair, two_term_spin
from tdsim.smoothing import ac_stark_for_sigma, ac_stark_scenario, smooth, verify_decoupling
from tdsim.trotter import evolve_plan, hd_recursive_decompose, hd_split_step, piecewise_constant_evolve, plan_decomposition

SPLIT_SLACK = 1e-9
RUNTIME_C1 = 60.0
SLOPE_C2, SLOPE_C2_TOL = 2.0, 0.2
C3_EXTRAPOLATION_FACTOR = 10.0
C3_HALVING_FACTOR = 2.0
MC_SLOPE, MC_SLOPE_TOL = -0.5, 0.15
C8_EPSILON, C8_PASS_RATE = 0.1, 0.9
C10_IDENTITY_TOL = 1e-2
C10_SLOPE, C10_SLOPE_TOL = 1.0, 0.25
CENSUS_TOL = 1e-9
K10_VALUE, K10_TOL = -1816.0, 1.0


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def random_two_term(i):
    return random_2local(2 + i % 2, 2, 1000 + i)


def test_c1_hd_step_bound(record):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, cap_violations, max_c12_ratio = -np.inf, 0, 0.0
    for i in range(100):
        m = random_two_term(i)
        dt = float(rng.choice([0.025, 0.05, 0.1, 0.2]))
        t = float(rng.uniform(0.0, m.horizon - dt))
        _, rep = hd_split_step(m.terms[0], [m.terms[1]], t, dt, n_qubits=m.n_qubits)
        worst = max(worst, rep.measured_error - rep.bound)
        ratio = rep.c12 / (0.5 * m.c_max ** 2)
        max_c12_ratio = max(max_c12_ratio, ratio)
        cap_violations += ratio > 1.0 + 1e-12
    elapsed = time.perf_counter() - start
    ok_a = record("1a", worst <= SPLIT_SLACK and elapsed < RUNTIME_C1,
                  f"max(measured - c12 dt^2) = {worst:.2e} <= {SPLIT_SLACK:g} over 100 trials, {elapsed:.1f}s")
    ok_b = record("1b", cap_violations == 0,
                  f"c12 <= c_max^2/2 violated in {cap_violations}/100 trials (max c12/(c_max^2/2) = "
                  f"{max_c12_ratio:.3f}); c12 <= c_max^2 always holds")
    assert ok_a
    assert ok_b


def test_c2_hd_second_order(record):
    m = two_term_spin()
    dts = [0.2, 0.1, 0.05, 0.025]
    errs = [hd_split_step(m.terms[0], [m.terms[1]], 0.0, dt, n_qubits=1)[1].measured_error for dt in dts]
    slope = loglog_slope(dts, errs)
    ok = record("2", abs(slope - SLOPE_C2) <= SLOPE_C2_TOL, f"slope {slope:.3f} (target {SLOPE_C2} +- {SLOPE_C2_TOL})")
    assert ok


def test_c3_smoothness_contrast(record):
    m = telegraph_pair()
    u = exact_evolve(m, 0.0, m.horizon)
    err = {dt: ops.spectral_norm(piecewise_constant_evolve(m, dt) - u) for dt in (0.2, 0.02, 0.01)}
    # quadratic extrapolation from the coarsest step of the sweep
    quad = err[0.2] * (0.01 / 0.2) ** 2
    beats_extrapolation = err[0.01] > C3_EXTRAPOLATION_FACTOR * quad
    stalls = err[0.02] / err[0.01] < C3_HALVING_FACTOR
    worst = -np.inf
    for j in range(100):
        _, rep = hd_split_step(m.terms[0], [m.terms[1]], 0.01 * j, 0.01, n_qubits=1)
        worst = max(worst, rep.measured_error - rep.bound)
    hd_ok = worst <= SPLIT_SLACK
    ok = record("3", beats_extrapolation and stalls and hd_ok,
                f"piecewise err(0.01) = {err[0.01]:.3g} vs 10x quadratic extrapolation {10 * quad:.3g}; "
                f"err(0.02)/err(0.01) = {err[0.02] / err[0.01]:.2f} < 2; HD max(measured - bound) = {worst:.1e}")
    assert ok


def test_c4_recursive_bound(record):
    rng = np.random.default_rng(4)
    worst = {}
    for L in (4, 8):
        ratios = []
        for trial in range(50):
            m = random_2local(4, L, 4000 + 100 * L + trial)
            dt = float(rng.choice([0.05, 0.1]))
            t = float(rng.uniform(0.0, m.horizon - dt))
            _, rep = hd_recursive_decompose(m, t, dt)
            bound = 0.5 * m.c_max ** 2 * L ** 2 * dt ** 2
            ratios.append(rep.measured_error - (bound + rep.oracle_tol))
        worst[L] = max(ratios)
    ok = record("4", all(v <= 0 for v in worst.values()),
                "max(measured - c_max^2 L^2 dt^2/2 - tol): " + ", ".join(f"L={L}: {v:.2e}" for L, v in worst.items()))
    assert ok


def test_c5_planned_total_error(record):
    parts, ok_all = [], True
    for name in BUILTIN_MODELS:
        m = builtin_model(name)
        u = exact_evolve(m, 0.0, m.horizon)
        for eps in (0.5, 0.1):
            plan = plan_decomposition(m, eps)
            err = ops.spectral_norm(evolve_plan(m, plan) - u)
            ok_all &= err <= eps / 2
            parts.append(f"{name}@{eps:g}: {err:.2e}")
    ok = record("5", ok_all, "error <= eps/2: " + "; ".join(parts))
    assert ok


def test_c6_average_bound(record):
    rng = np.random.default_rng(6)
    fails, worst = 0, 0.0
    for i in range(100):
        m = random_2local(2 + i % 2, 1 + i % 4, 6000 + i)
        dt = float(rng.uniform(0.01, 1.0))
        t = float(rng.uniform(0.0, m.horizon - dt))
        rep = verify_avg_bound(m, t, dt)
        fails += not rep.ok
        worst = max(worst, rep.measured / rep.bound)
    ok = record("6", fails == 0, f"{100 - fails}/100 within 2||H||^2 dt; max measured/bound = {worst:.3f}")
    assert ok


def test_c7_monte_carlo_rate(record):
    m = two_term_spin()
    dt = 0.5
    avg = average_step(m, 0.0, dt)
    ms = [4, 16, 64, 256, 1024, 4096]
    med = [float(np.median([ops.spectral_norm(mc_average_step(m, 0.0, dt, McConfig(k, s, dt)) - avg)
                            for s in range(200)])) for k in ms]
    slope = loglog_slope(ms, med)
    ok = record("7", abs(slope - MC_SLOPE) <= MC_SLOPE_TOL,
                f"slope {slope:.3f} (target {MC_SLOPE} +- {MC_SLOPE_TOL}); medians {med[0]:.2e}..{med[-1]:.2e}")
    assert ok


def test_c8_randomized_end_to_end(record):
    parts, ok_all = [], True
    for m in (two_term_spin(), telegraph_pair()):
        plan = plan_decomposition(m, C8_EPSILON)
        u = exact_evolve(m, 0.0, m.horizon)
        errs = np.array([ops.spectral_norm(randomized_product_formula(m, McConfig(16, s, plan.dt))[0] - u)
                         for s in range(100)])
        rate = float(np.mean(errs <= C8_EPSILON))
        ok_all &= rate >= C8_PASS_RATE
        parts.append(f"{m.name}: {rate:.2f} (median {np.median(errs):.2e})")
    ok = record("8", ok_all, f"fraction with error <= {C8_EPSILON}: " + "; ".join(parts))
    assert ok


def test_c9_decoupling_bound(record):
    fails, n, worst = 0, 0, 0.0
    for i in range(50):
        m = random_2local(2, 1 + i % 3, 9000 + i)
        for f in (1e-3, 1e-2, 1e-1):
            rep = verify_decoupling(m, f * m.horizon)
            fails += not rep.ok
            n += 1
            worst = max(worst, rep.measured / rep.bound)
    for f in (1e-3, 1e-2, 1e-1):
        for sc in (ac_stark_scenario(0.1, 20.0, 64), ac_stark_for_sigma(0.1, 5.0, f * 5.0)):
            rep = verify_decoupling(sc.model, f * sc.horizon)
            fails += not rep.ok
            n += 1
            worst = max(worst, rep.measured / rep.bound)
    ok = record("9", fails == 0, f"{n - fails}/{n} within 2||H||^2 T sqrt(2/pi) sigma; max measured/bound = {worst:.3f}")
    assert ok


def test_c10_ac_stark(record):
    sc = ac_stark_scenario(0.1, 20.0, 64)
    u = exact_evolve(sc.model, 0.0, sc.horizon)
    dev = ops.spectral_norm(u - sc.reference)
    smoothed = smooth(sc.model, 2.0 / sc.omega).evolve()
    ident = ops.spectral_norm(smoothed - np.eye(2))
    sigmas = [0.02, 0.05, 0.1, 0.2, 0.5]
    diffs = [verify_decoupling(ac_stark_for_sigma(0.1, 5.0, s).model, s).measured for s in sigmas]
    slope = loglog_slope(sigmas, diffs)
    ok = record("10", dev <= sc.tolerance and ident <= C10_IDENTITY_TOL and abs(slope - C10_SLOPE) <= C10_SLOPE_TOL,
                f"phase {sc.phase:.4f}, ||U - ref|| = {dev:.2e} <= {sc.tolerance:.2e}; "
                f"||U~ - I|| = {ident:.2e}; ||U - U~|| slope in sigma {slope:.3f}")
    assert ok


def test_c11_gate_count_arithmetic(record):
    base = CountingParams(c_max=1.0, T=1.0, L=2, epsilon=0.1)
    g = gate_counts(base).G
    exact = g == 1.0 * 1.0 * 1.0 * 8 / 0.1
    t2 = gate_counts(CountingParams(c_max=1.0, T=2.0, L=2, epsilon=0.1)).G == 4 * g
    l2 = gate_counts(CountingParams(c_max=1.0, T=1.0, L=4, epsilon=0.1)).G == 8 * g
    plan = plan_decomposition(two_term_spin(), 0.1)
    ok = record("11", exact and t2 and l2 and plan.gate_count == g,
                f"G = {g:g}; T->2T x{gate_counts(CountingParams(T=2.0)).G / g:g}; "
                f"L->2L x{gate_counts(CountingParams(L=4)).G / g:g}; planned gates {plan.gate_count}")
    assert ok


def test_c12_census(record):
    mpmath.mp.dps = 60
    worst = 0.0
    for K in range(1, 21):
        n = mpmath.mpf(2) ** K
        lg = mpmath.loggamma(n)
        # direct log-gamma evaluation of log10(N V / S), without cancelling Gamma(2^K)
        log_v = mpmath.log(2) + (n - 1) * mpmath.log(mpmath.pi) + (2 * n - 2) * mpmath.log(mpmath.mpf("0.1")) - lg
        log_s = mpmath.log(2) + n * mpmath.log(mpmath.pi) - lg
        direct = float(K ** 2 * mpmath.log10(2 * K * K) + (log_v - log_s) / mpmath.log(10))
        worst = max(worst, abs(volume_fraction(CountingParams(K=K)) - direct))
    k10 = volume_fraction(CountingParams(K=10))
    k_star = crossover(2, 2.0, 0.1)
    vals = [r.log10_fraction for r in census(range(k_star, 41))]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    ok = record("12", worst <= CENSUS_TOL and abs(k10 - K10_VALUE) <= K10_TOL and decreasing,
                f"max |closed form - log-gamma| = {worst:.1e} (K <= 20); K=10: {k10:.3f}; "
                f"decreasing for K >= {k_star}")
    assert ok


def test_c13_determinism(record, tmp_path):
    spec = tmp_path / "det.json"
    spec.write_text("""{"name": "det", "experiments": [
      {"name": "mc", "model": "telegraph_pair", "scheme": "mc_average", "sweep": {"var": "m", "values": [4, 64]},
       "seeds": [0, 1, 2, 3, 4], "params": {"dt": 0.1}},
      {"name": "rand", "model": "two_term_spin", "scheme": "randomized", "sweep": {"var": "epsilon", "values": [0.5]},
       "seeds": [7, 8, 9], "params": {"m": 4}},
      {"name": "gen", "model": {"generator": "random_2local", "n": 3, "L": 3}, "scheme": "hd_recursive",
       "sweep": {"var": "dt", "values": [0.1]}, "seeds": [1, 2]}]}""")
    outs = []
    for run in ("a", "b"):
        proc = subprocess.run([sys.executable, "-m", "tdsim", "run", str(spec), "--out", str(tmp_path / run)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / run).glob("*.csv"))})
    ok = record("13", outs[0] == outs[1] and len(outs[0]) == 3,
                f"{len(outs[0])} CSVs byte-identical across two invocations")
    assert ok
