import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tdsim import operators as ops
from tdsim.hamiltonian import HamiltonianModel, TimeDependentTerm
from tdsim.propagator import exact_evolve
from tdsim.randomized import (GatePlan, McConfig, average_step, mc_average_step, randomized_product_formula,
                              replay_gate_plan, sample_times, verify_avg_bound)
from tdsim.scenarios import random_2local, telegraph_pair, two_term_spin
from tdsim.signals import Constant, Sinusoid
from tdsim.smoothing import ac_stark_scenario

X, Z = ops.pauli("X"), ops.pauli("Z")


def single(signal, label="X"):
    return HamiltonianModel(1, (TimeDependentTerm.from_pauli("h", (0,), label, signal),), 1, 1.0)


def test_average_step_constant_equals_exact():
    m = single(Constant(0.8))
    assert np.allclose(average_step(m, 0.2, 0.3), exact_evolve(m, 0.2, 0.5), atol=1e-14)


def test_average_over_full_period_is_identity():
    m = single(Sinusoid(1.0, 2 * math.pi, 0.4))
    assert np.allclose(average_step(m, 0.0, 1.0), np.eye(2), atol=1e-14)


def test_average_step_single_term_uses_own_qubits():
    term = TimeDependentTerm.from_pauli("h", (3,), "Z", Constant(1.0))
    assert average_step(term, 0.0, 0.5).shape == (2, 2)


def test_ac_stark_average_misses_the_shift():
    sc = ac_stark_scenario(0.1, 20.0, 64)
    avg = average_step(sc.model, 0.0, sc.horizon)
    exact = exact_evolve(sc.model, 0.0, sc.horizon)
    assert np.allclose(avg, np.eye(2), atol=1e-12)
    expected = ops.spectral_norm(sc.reference - np.eye(2))
    assert ops.spectral_norm(exact - avg) == pytest.approx(expected, rel=0.05)


def test_avg_bound_trivial_for_single_term():
    rep = verify_avg_bound(single(Sinusoid(1.0, 9.0)), 0.0, 0.4)
    assert rep.measured < 1e-9 and rep.ok


def test_avg_bound_two_term_fast_sinusoid():
    m = HamiltonianModel(1, (TimeDependentTerm.from_pauli("x", (0,), "X", Sinusoid(0.5, 40.0)),
                             TimeDependentTerm.from_pauli("z", (0,), "Z", Sinusoid(0.5, 31.0, 1.0))), 1, 1.0)
    rep = verify_avg_bound(m, 0.0, 0.1)
    assert rep.norm == 1.0 and rep.bound == pytest.approx(0.2)
    assert rep.measured <= 0.2


def test_avg_error_is_below_the_tight_quadratic_form():
    # ||Texp - exp|| <= (2/3) ||H||^2 dt^2 is the dimensionally consistent bound
    for seed in range(5):
        m = random_2local(3, 3, seed)
        for dt in (0.05, 0.2):
            rep = verify_avg_bound(m, 0.1, dt)
            assert rep.measured <= (2 / 3) * rep.norm**2 * dt**2 + rep.oracle_tol


def test_mc_constant_equals_average():
    m = single(Constant(0.6))
    for seed in (0, 1, 99):
        for k in (1, 7, 64):
            cfg = McConfig(k, seed, 0.25)
            assert ops.spectral_norm(mc_average_step(m, 0.5, 0.25, cfg) - average_step(m, 0.5, 0.25)) < 1e-14


def test_mc_single_sample_is_snapshot():
    m = single(Sinusoid(1.0, 5.0, 0.2))
    cfg = McConfig(1, 42, 0.3)
    tau = sample_times(cfg, 0, 0, 0.1, 0.3)[0]
    assert 0.1 <= tau < 0.4
    ref = scipy.linalg.expm(-1j * 0.3 * m.terms[0].signal(tau) * X)
    assert np.allclose(mc_average_step(m, 0.1, 0.3, cfg), ref)


def test_mc_large_m_quantile():
    m = single(Sinusoid(1.0, 13.0, 0.3))
    dt, k = 0.5, 4096
    avg = average_step(m, 0.0, dt)
    within = [ops.spectral_norm(mc_average_step(m, 0.0, dt, McConfig(k, s, dt)) - avg) <= 2 * dt / math.sqrt(k)
              for s in range(200)]
    assert np.mean(within) >= 0.95


def test_sample_times_sorted_in_bin():
    cfg = McConfig(50, 3, 0.1)
    taus = sample_times(cfg, 4, 1, 0.4, 0.1)
    assert np.all(np.diff(taus) >= 0) and taus[0] >= 0.4 and taus[-1] < 0.5


def test_shared_times_flag():
    m = two_term_spin()
    a = McConfig(8, 5, 0.1, shared_times=True)
    assert np.array_equal(sample_times(a, 0, 0, 0.0, 0.1), sample_times(a, 0, 1, 0.0, 0.1))
    b = McConfig(8, 5, 0.1)
    assert not np.array_equal(sample_times(b, 0, 0, 0.0, 0.1), sample_times(b, 0, 1, 0.0, 0.1))
    _, plan = randomized_product_formula(m, a)
    assert plan.gates[0][1] == plan.gates[1][1]


def test_randomized_single_constant_term_is_exact():
    m = single(Constant(0.9))
    u, plan = randomized_product_formula(m, McConfig(5, 17, 0.3))
    assert np.allclose(u, scipy.linalg.expm(-0.9j * X), atol=1e-13)
    assert len(plan) == 4 * 5


def test_randomized_gate_count_and_order():
    m = two_term_spin()
    u, plan = randomized_product_formula(m, McConfig(16, 1, 0.025))
    assert len(plan) == 40 * 16 * 2
    ids = [g[0] for g in plan.gates]
    assert ids[:4] == ["x", "z", "x", "z"]
    times = np.array([g[1] for g in plan.gates]).reshape(40, 16, 2)
    assert np.all(np.diff(times, axis=1) >= 0)
    assert np.all(times[1:].min(axis=(1, 2)) >= times[:-1].max(axis=(1, 2)))


def test_randomized_determinism_and_replay():
    m = telegraph_pair()
    cfg = McConfig(4, 2024, 0.05)
    u1, p1 = randomized_product_formula(m, cfg)
    u2, p2 = randomized_product_formula(m, cfg)
    assert p1 == p2 and np.array_equal(u1, u2)
    text = p1.dumps()
    again = GatePlan.loads(text)
    assert again == p1 and again.dumps() == text
    assert np.max(np.abs(replay_gate_plan(m, again) - u1)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(1, 6), st.floats(0.05, 0.5))
def test_gate_plan_text_round_trip_is_bit_exact(seed, k, dt):
    m = two_term_spin()
    _, plan = randomized_product_formula(m, McConfig(k, seed, dt))
    again = GatePlan.loads(plan.dumps())
    assert again == plan


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, 1, 0.1)
    with pytest.raises(ValueError):
        McConfig(1, 1, 0.0)
