"""Time-dependent product formulas on a rough drive.

Compares the sampled piecewise-constant product formula with the
time-ordered two-term split on a pair of telegraph signals that switch about
a thousand times over the horizon, and on a smooth two-term spin model.
"""

from tdsim import operators as ops
from tdsim.propagator import exact_evolve
from tdsim.scenarios import telegraph_pair, two_term_spin
from tdsim.trotter import hd_split_step, piecewise_constant_evolve


def main():
    for model in (two_term_spin(), telegraph_pair()):
        u = exact_evolve(model, 0.0, model.horizon)
        print(f"{model.name}: piecewise-constant error over [0, {model.horizon:g}]")
        for dt in (0.2, 0.1, 0.05, 0.02, 0.01):
            err = ops.spectral_norm(piecewise_constant_evolve(model, dt) - u)
            print(f"  dt={dt:<5g} error={err:.3e}")
        print(f"{model.name}: single split step at t=0")
        for dt in (0.2, 0.1, 0.05, 0.025):
            _, rep = hd_split_step(model.terms[0], [model.terms[1]], 0.0, dt, n_qubits=model.n_qubits)
            print(f"  dt={dt:<5g} error={rep.measured_error:.3e} bound c12*dt^2={rep.bound:.3e} c12={rep.c12:.3f}")


if __name__ == "__main__":
    main()
