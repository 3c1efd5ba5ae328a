import math

import numpy as np
import pytest
import scipy.linalg

from conftest import ode_propagator
from tdsim import operators as ops
from tdsim.hamiltonian import HamiltonianModel, TimeDependentTerm
from tdsim.propagator import ConvergenceError, exact_evolve, exact_evolve_term
from tdsim.scenarios import two_term_spin
from tdsim.signals import Constant, PiecewiseConstant, Sinusoid, Telegraph
from tdsim.smoothing import ac_stark_scenario

X, Y, Z = (ops.pauli(c) for c in "XYZ")


def test_constant_hamiltonian_is_plain_exponential():
    t = TimeDependentTerm.from_pauli("x", (0,), "X", Constant(0.7))
    m = HamiltonianModel(1, (t,), 1, 2.0)
    assert np.allclose(exact_evolve(m, 0.0, 2.0), scipy.linalg.expm(-1.4j * X), atol=1e-13)


def test_single_term_matches_integrated_exponential():
    sig = Sinusoid(1.3, 5.0, 0.2, (0.0, 1.0))
    term = TimeDependentTerm.from_pauli("z", (0,), "Z", sig)
    ref = scipy.linalg.expm(-1j * sig.integral(0.1, 0.9) * Z)
    assert np.allclose(exact_evolve_term(term, 0.1, 0.9), ref, atol=1e-14)
    assert np.allclose(exact_evolve_term(term, 0.1, 0.9, method="stepping"), ref, atol=1e-10)


def test_two_term_spin_matches_ode_oracle():
    m = two_term_spin()
    u, info = exact_evolve(m, 0.0, 1.0, full_output=True)
    assert info.difference <= info.tol
    assert ops.spectral_norm(u - ode_propagator(m, 0.0, 1.0)) < 1e-9
    assert ops.is_unitary(u, 1e-12)


def test_ac_stark_matches_rotating_frame_solution():
    sc = ac_stark_scenario(0.1, 20.0, 8)
    u = exact_evolve(sc.model, 0.0, sc.horizon)
    assert ops.spectral_norm(u - sc.exact_reference()) < 1e-9


def test_piecewise_constant_signals_step_exactly():
    sx = PiecewiseConstant((0.0, 0.3, 1.0), (1.0, -0.5))
    sz = PiecewiseConstant((0.0, 0.6, 1.0), (0.2, 0.9))
    m = HamiltonianModel(1, (TimeDependentTerm.from_pauli("x", (0,), "X", sx),
                             TimeDependentTerm.from_pauli("z", (0,), "Z", sz)), 1, 1.0)
    ref = np.eye(2)
    for a, b, cx, cz in [(0, 0.3, 1.0, 0.2), (0.3, 0.6, -0.5, 0.2), (0.6, 1.0, -0.5, 0.9)]:
        ref = scipy.linalg.expm(-1j * (b - a) * (cx * X + cz * Z)) @ ref
    u, info = exact_evolve(m, 0.0, 1.0, full_output=True)
    assert info.n_steps == 3
    assert np.allclose(u, ref, atol=1e-13)


def test_telegraph_pair_is_exact_product():
    sx = Telegraph(1, 30.0, window=(0.0, 1.0))
    sz = Telegraph(2, 30.0, window=(0.0, 1.0))
    m = HamiltonianModel(1, (TimeDependentTerm.from_pauli("x", (0,), "X", sx),
                             TimeDependentTerm.from_pauli("z", (0,), "Z", sz)), 1, 1.0)
    cuts = np.unique(np.concatenate([[0.0, 1.0], sx.switch_times, sz.switch_times]))
    ref = np.eye(2)
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        ref = scipy.linalg.expm(-1j * (b - a) * (sx(mid) * X + sz(mid) * Z)) @ ref
    assert np.allclose(exact_evolve(m, 0.0, 1.0), ref, atol=1e-12)


def test_multi_qubit_against_ode():
    terms = (TimeDependentTerm.from_pauli("a", (0, 1), "XX", Sinusoid(1.0, 4.0, 0.1, (0, 1))),
             TimeDependentTerm.from_pauli("b", (1, 2), "ZY", Sinusoid(0.6, 7.0, 1.0, (0, 1))),
             TimeDependentTerm.from_pauli("c", (2,), "X", Constant(0.3, (0, 1))))
    m = HamiltonianModel(3, terms, 2, 1.0)
    assert ops.spectral_norm(exact_evolve(m, 0.2, 0.8) - ode_propagator(m, 0.2, 0.8)) < 1e-9


def test_composition_property():
    m = two_term_spin()
    whole = exact_evolve(m, 0.0, 1.0)
    split = exact_evolve(m, 0.4, 1.0) @ exact_evolve(m, 0.0, 0.4)
    assert ops.spectral_norm(whole - split) < 1e-9


def test_step_cap_raises():
    with pytest.raises(ConvergenceError):
        exact_evolve(two_term_spin(), 0.0, 1.0, tol=1e-14, max_steps=1000)


def test_empty_interval_and_bad_order():
    m = two_term_spin()
    assert np.array_equal(exact_evolve(m, 0.5, 0.5), np.eye(2))
    with pytest.raises(ValueError):
        exact_evolve(m, 1.0, 0.0)
