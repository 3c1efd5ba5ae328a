"""Averaged Hamiltonians and the randomized product formula.

Over a bin ``[t, t + dt]`` the time-ordered exponential is replaced by the
ordinary exponential of ``int H``; the cost is at most ``2 ||H||^2 dt`` in
operator norm. The bin integral is then estimated from ``m`` uniformly random
sample times, and finally split into single-term exponentials, giving a
product formula whose only time dependence is through random samples.

Sample times come from :func:`tdsim.rng.counter_uniform` keyed by
``(seed, stream, bin, sample)``, where ``stream`` is the term's position in
the model (or ``-1`` when all terms share the same times).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import operators as ops
from .hamiltonian import HamiltonianModel, TimeDependentTerm, integrate_term, model_norm_bound
from .propagator import default_tol, exact_evolve
from .rng import counter_uniform
from .trotter import gate_product

SHARED_STREAM = -1


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings: ``m`` samples per bin over ``n_bins`` bins of width ``dt``."""

    m: int
    seed: int
    dt: float
    n_bins: Optional[int] = None
    shared_times: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def bins_for(self, horizon: float) -> int:
        if self.n_bins is not None:
            return self.n_bins
        return max(1, math.ceil(horizon / self.dt - 1e-9))


@dataclass(frozen=True)
class AvgBoundReport:
    dt: float
    measured: float   # ||T exp(-i int H) - exp(-i int H)||
    bound: float      # 2 ||H||^2 dt
    norm: float       # ||H|| used in the bound
    oracle_tol: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound + self.oracle_tol


@dataclass(frozen=True)
class GatePlan:
    """Executed product formula as ``(term_id, sample_time, duration)`` in application order."""

    seed: int
    m: int
    dt: float
    n_bins: int
    gates: Tuple[Tuple[str, float, float], ...]
    shared_times: bool = False

    def __len__(self):
        return len(self.gates)

    def dumps(self) -> str:
        lines = ["# tdsim gate plan v1",
                 f"# seed={self.seed} m={self.m} dt={self.dt:.17g} n_bins={self.n_bins} "
                 f"shared_times={int(self.shared_times)}"]
        lines += [f"{tid} {tau:.17g} {dur:.17g}" for tid, tau, dur in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GatePlan":
        lines = text.splitlines()
        if len(lines) < 2 or not lines[0].startswith("# tdsim gate plan"):
            raise ValueError("not a gate plan")
        header = dict(item.split("=", 1) for item in lines[1].lstrip("# ").split())
        gates = []
        for line in lines[2:]:
            if not line.strip():
                continue
            tid, tau, dur = line.split()
            gates.append((tid, float(tau), float(dur)))
        return cls(seed=int(header["seed"]), m=int(header["m"]), dt=float(header["dt"]),
                   n_bins=int(header["n_bins"]), gates=tuple(gates),
                   shared_times=bool(int(header.get("shared_times", "0"))))


def _terms_and_n(hamiltonian, n_qubits):
    if isinstance(hamiltonian, HamiltonianModel):
        return list(hamiltonian.terms), hamiltonian.n_qubits
    if isinstance(hamiltonian, TimeDependentTerm):
        hamiltonian = [hamiltonian]
    terms = list(hamiltonian)
    if n_qubits is None:
        # a lone term lives on its own qubits
        if len(terms) == 1:
            return [_localised(terms[0])], len(terms[0].support)
        raise ValueError("n_qubits is required when passing a list of terms")
    return terms, n_qubits


def _localised(term: TimeDependentTerm) -> TimeDependentTerm:
    import dataclasses
    return dataclasses.replace(term, support=tuple(range(len(term.support))))


def integrated_generator(terms, t: float, dt: float, n_qubits: int) -> np.ndarray:
    """``int_t^{t+dt} H(s) ds`` on the full register."""
    total = np.zeros((1 << n_qubits,) * 2, dtype=complex)
    for term in terms:
        total += ops.embed(integrate_term(term, t, t + dt), term.support, n_qubits)
    return total


def average_step(hamiltonian, t: float, dt: float, *, n_qubits: Optional[int] = None) -> np.ndarray:
    """``exp(-i dt H_av)`` with ``H_av = (1/dt) int_t^{t+dt} H``.

    A single term passed without ``n_qubits`` is evolved on its own qubits.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    terms, n = _terms_and_n(hamiltonian, n_qubits)
    return ops.expm(integrated_generator(terms, t, dt, n), 1.0)


def verify_avg_bound(hamiltonian, t: float, dt: float, tol: Optional[float] = None, *,
                     n_qubits: Optional[int] = None) -> AvgBoundReport:
    """Compare the time-ordered bin propagator with :func:`average_step`."""
    terms, n = _terms_and_n(hamiltonian, n_qubits)
    tol = default_tol(1 << n) if tol is None else tol
    exact = exact_evolve(terms, t, t + dt, tol, n_qubits=n)
    measured = ops.spectral_norm(exact - average_step(terms, t, dt, n_qubits=n))
    norm = float(sum(x.bound for x in terms))
    return AvgBoundReport(dt=dt, measured=measured, bound=2.0 * norm * norm * dt, norm=norm,
                          oracle_tol=tol)


def sample_times(cfg: McConfig, bin_index: int, stream: int, start: float, width: float) -> np.ndarray:
    """Sorted sample times for one (bin, stream) pair, uniform in ``[start, start + width)``."""
    if cfg.shared_times:
        stream = SHARED_STREAM
    u = counter_uniform(cfg.seed, stream, bin_index, np.arange(cfg.m))
    return np.sort(start + width * u)


def mc_average_step(hamiltonian, t: float, dt: float, cfg: McConfig, *, bin_index: int = 0,
                    n_qubits: Optional[int] = None) -> np.ndarray:
    """``exp(-i (dt/m) sum_k H(tau_k))`` with random ``tau_k`` in the bin.

    Each term draws its own sample times unless ``cfg.shared_times``.
    """
    terms, n = _terms_and_n(hamiltonian, n_qubits)
    gen = np.zeros((1 << n,) * 2, dtype=complex)
    for stream, term in enumerate(terms):
        taus = sample_times(cfg, bin_index, stream, t, dt)
        coeff = float(np.sum(term.signal(taus))) * (dt / cfg.m)
        gen += coeff * term.embedded_base(n)
    return ops.expm(gen, 1.0)


def randomized_product_formula(model: HamiltonianModel, cfg: McConfig) -> Tuple[np.ndarray, GatePlan]:
    """Product of ``exp(-i (w/m) H_X(tau))`` over bins, samples and terms.

    Bin ``j`` spans ``[j dt, (j+1) dt]`` (the last one is clipped at the
    horizon). Within a bin the gates run through the sample index in order of
    increasing time, and for each sample through the terms in declared order.
    Returns the operator and the executed :class:`GatePlan`.
    """
    T = model.horizon
    n_bins = cfg.bins_for(T)
    L, m = model.L, cfg.m
    idx = np.empty((n_bins, m, L), dtype=np.int64)
    times = np.empty((n_bins, m, L))
    widths = np.empty((n_bins, m, L))
    for j in range(n_bins):
        start = j * cfg.dt
        width = min(cfg.dt, T - start) if j == n_bins - 1 else cfg.dt
        for x in range(L):
            idx[j, :, x] = x
            times[j, :, x] = sample_times(cfg, j, x, start, width)
            widths[j, :, x] = width / m
    idx, times, widths = idx.ravel(), times.ravel(), widths.ravel()
    u = gate_product(model, idx, times, widths)
    ids = [t.id for t in model.terms]
    gates = tuple((ids[i], float(tau), float(w)) for i, tau, w in zip(idx, times, widths))
    plan = GatePlan(seed=cfg.seed, m=m, dt=cfg.dt, n_bins=n_bins, gates=gates,
                    shared_times=cfg.shared_times)
    return u, plan


def replay_gate_plan(model: HamiltonianModel, plan: GatePlan) -> np.ndarray:
    """Re-execute a (possibly deserialised) gate plan against ``model``."""
    index = {t.id: i for i, t in enumerate(model.terms)}
    idx = np.array([index[g[0]] for g in plan.gates], dtype=np.int64)
    times = np.array([g[1] for g in plan.gates], dtype=float)
    widths = np.array([g[2] for g in plan.gates], dtype=float)
    return gate_product(model, idx, times, widths)
