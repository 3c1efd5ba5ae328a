import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tdsim.hamiltonian import evaluate


def ode_propagator(model, a, b, rtol=1e-12, atol=1e-12, max_step=np.inf):
    """Independent oracle: integrate i dU/dt = H(t) U with an adaptive Runge-Kutta solver."""
    dim = model.dim

    def rhs(t, y):
        u = y.reshape(dim, dim)
        return (-1j * evaluate(model, t) @ u).ravel()

    sol = solve_ivp(rhs, (a, b), np.eye(dim, dtype=complex).ravel(), method="DOP853",
                    rtol=rtol, atol=atol, max_step=max_step)
    return sol.y[:, -1].reshape(dim, dim)


@pytest.fixture
def ode():
    return ode_propagator


# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(cid, passed, detail):
        ACCEPTANCE[cid] = (bool(passed), detail)
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid:<4} {detail}")
