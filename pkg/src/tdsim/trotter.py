"""Time-dependent Trotter-Suzuki splitting.

The two-group step replaces the time-ordered exponential of ``H_1 + H_2``
over ``[t, t + dt]`` by ``T exp(-i int H_1) @ T exp(-i int H_2)``. Its
operator-norm error is at most ``c12 * dt**2`` with

    c12 = dt**-2 * int_t^{t+dt} dv int_t^v du ||[H_1(u), H_2(v)]||,

a bound that involves no time derivatives of the Hamiltonian. Splitting a
list of ``L`` terms by recursive bisection and composing the steps gives the
multi-term decomposition; :func:`plan_decomposition` picks the bin width that
keeps the accumulated bound at ``epsilon / 2`` over the whole horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import operators as ops
from .hamiltonian import HamiltonianModel, TimeDependentTerm
from .propagator import default_tol, exact_evolve, exact_evolve_term
from .signals import QuadratureError, adaptive_simpson

C12_TOL = 1e-8
C12_MAX_DEPTH = 30
C12_MAX_EVALS = 100_000
MAX_BINS = 2**32

Group = Union[TimeDependentTerm, Sequence[TimeDependentTerm]]


class PlanningError(ValueError):
    """Requested accuracy needs more bins than the planner allows."""


@dataclass(frozen=True)
class SplitStepReport:
    dt: float
    measured_error: Optional[float]
    c12: float
    bound: float          # c12 * dt**2
    c12_cap: float        # c_max**2 / 2 as quoted for the two-term split
    c12_group_cap: float  # ||H_1|| * ||H_2||, which always dominates c12
    oracle_tol: float
    fallback: bool = False


@dataclass(frozen=True)
class RecursiveReport:
    dt: float
    L: int
    measured_error: Optional[float]
    accumulated_bound: float         # 1/2 c_max^2 dt^2 sum_m 2^m (L/2^m)^2
    group_bound: float               # sum over splits of ||H_A|| ||H_B|| dt^2
    tight_bound: Optional[float]     # sum over splits of c12 dt^2, if computed
    oracle_tol: float
    n_fallbacks: int = 0


@dataclass(frozen=True)
class DecompositionPlan:
    scheme: str
    dt: float
    n_bins: int
    last_dt: float
    horizon: float
    term_order: Tuple[str, ...]
    epsilon_target: float
    gate_count: int

    def bins(self):
        """Yield ``(start, width)`` for each bin in time order."""
        for j in range(self.n_bins):
            width = self.last_dt if j == self.n_bins - 1 else self.dt
            yield j * self.dt, width


def _as_group(g: Group) -> List[TimeDependentTerm]:
    return [g] if isinstance(g, TimeDependentTerm) else list(g)


def _group_strength(group) -> float:
    return float(sum(t.bound for t in group))


def _group_unitary(group, t, dt, tol, n_qubits):
    if len(group) == 1:
        return exact_evolve_term(group[0], t, t + dt, n_total=n_qubits)
    return exact_evolve(group, t, t + dt, tol, n_qubits=n_qubits)


# ----------------------------------------------------------------- c12

def c12_coefficient(h1: Group, h2: Group, t: float, dt: float, n_qubits: int,
                    tol: float = C12_TOL) -> float:
    """Normalised commutator double integral for the split ``H_1 | H_2`` on ``[t, t+dt]``.

    Single scalar-signal terms factor as ``|s1(u)| |s2(v)| ||[B1, B2]||`` and
    reduce to a one-dimensional integral; groups use adaptive tensor Simpson
    on the unit square mapped onto the triangle ``u <= v``.

    Raises
    ------
    QuadratureError
        If the adaptive rule exhausts its depth or evaluation budget.
    """
    g1, g2 = _as_group(h1), _as_group(h2)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(g1) == 1 and len(g2) == 1:
        return _c12_factored(g1[0], g2[0], t, dt, n_qubits, tol)
    return _c12_square(g1, g2, t, dt, n_qubits, tol)


def _c12_factored(term1, term2, t, dt, n_qubits, tol):
    comm = ops.spectral_norm(ops.commutator(term1.embedded_base(n_qubits),
                                            term2.embedded_base(n_qubits)))
    if comm <= 1e-14:
        return 0.0
    s1, s2 = term1.signal, term2.signal
    cuts = np.unique(np.concatenate([[t, t + dt], s1.breakpoints(t, t + dt),
                                     s2.breakpoints(t, t + dt)]))

    def integrand(v):
        return abs(float(s2(v))) * s1.abs_integral(t, v)

    # |s2| and the inner integral are smooth between cuts; split the tolerance by length
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        # step one ulp inside so each piece sees its own one-sided signal values
        total += adaptive_simpson(integrand, np.nextafter(lo, hi), np.nextafter(hi, lo),
                                  tol=tol * dt * (hi - lo) / comm, max_depth=C12_MAX_DEPTH)
    return comm * total / (dt * dt)


def _c12_square(g1, g2, t, dt, n_qubits, tol):
    a_ops = [x.embedded_base(n_qubits) for x in g1]
    b_ops = [x.embedded_base(n_qubits) for x in g2]
    comms = np.array([[ops.commutator(a, b) for b in b_ops] for a in a_ops])
    if np.max(np.abs(comms), initial=0.0) <= 1e-14:
        return 0.0

    def norms(u, v):
        ca = np.stack([np.asarray(s.signal(u), dtype=float) for s in g1], axis=-1)
        cb = np.stack([np.asarray(s.signal(v), dtype=float) for s in g2], axis=-1)
        return ops.spectral_norm_batch(np.einsum("pa,pb,abij->pij", ca, cb, comms))

    # Between breakpoints every signal is smooth, so the triangle u <= v splits
    # into rectangles off the diagonal and small triangles on it.
    sigs = [x.signal for x in g1 + g2]
    cuts = np.unique(np.concatenate([[t, t + dt]] + [s.breakpoints(t, t + dt) for s in sigs]))
    pieces = [(np.nextafter(lo, hi), np.nextafter(hi, lo)) for lo, hi in zip(cuts[:-1], cuts[1:])]
    half_area = 0.5 * dt * dt
    budget = [C12_MAX_EVALS]

    if all(s.is_piecewise_constant for s in sigs):
        # integrand is constant on every cell: midpoint values are exact
        mids = np.array([0.5 * (lo + hi) for lo, hi in pieces])
        widths = np.diff(cuts)
        vals = norms(np.repeat(mids, len(mids)), np.tile(mids, len(mids))).reshape(len(mids), len(mids))
        area = np.outer(widths, widths)
        total = float(np.sum(np.triu(vals * area, 1)) + 0.5 * np.sum(np.diag(vals) * widths**2))
        return total / (dt * dt)

    total = 0.0
    for i, (lo_i, hi_i) in enumerate(pieces):
        w_i = hi_i - lo_i

        def tri(x, y, lo=lo_i, w=w_i):
            v = lo + w * x
            return w * w * x * norms(lo + w * x * y, v)

        total += _adaptive_simpson_2d(tri, tol * 0.5 * w_i * w_i / half_area * dt * dt,
                                      C12_MAX_DEPTH, budget)
        for lo_j, hi_j in pieces[i + 1:]:
            w_j = hi_j - lo_j

            def rect(x, y, lo_u=lo_i, wu=w_i, lo_v=lo_j, wv=w_j):
                return wu * wv * norms(lo_u + wu * x, lo_v + wv * y)

            total += _adaptive_simpson_2d(rect, tol * w_i * w_j / half_area * dt * dt,
                                          C12_MAX_DEPTH, budget)
    return total / (dt * dt)


_S1 = np.array([1.0, 4.0, 1.0])
_W1 = np.outer(_S1, _S1) / 36.0
_S2 = np.array([1.0, 4.0, 2.0, 4.0, 1.0])
_W2 = np.outer(_S2, _S2) / 144.0


def _adaptive_simpson_2d(f, tol, max_depth, budget) -> float:
    """Breadth-first adaptive tensor Simpson of ``f`` over the unit square.

    ``budget`` is a one-element list holding the evaluations still allowed;
    it is shared between calls and decremented in place.
    """
    cells = np.array([[0.0, 0.0, 1.0]])  # (x0, y0, size)
    total = 0.0
    grid = np.linspace(0.0, 1.0, 5)
    for _ in range(max_depth + 1):
        n = len(cells)
        xs = cells[:, 0, None, None] + cells[:, 2, None, None] * grid[None, :, None]
        ys = cells[:, 1, None, None] + cells[:, 2, None, None] * grid[None, None, :]
        xs, ys = np.broadcast_arrays(xs, ys)
        vals = f(xs.ravel(), ys.ravel()).reshape(n, 5, 5)
        budget[0] -= vals.size
        area = cells[:, 2] ** 2
        coarse = area * np.einsum("ij,nij->n", _W1, vals[:, ::2, ::2])
        fine = area * np.einsum("ij,nij->n", _W2, vals)
        err = np.abs(fine - coarse)
        ok = err <= 15.0 * tol * area
        total += float(np.sum(fine[ok] + (fine[ok] - coarse[ok]) / 15.0))
        if ok.all():
            return total
        if budget[0] < 0:
            break
        bad = cells[~ok]
        h = 0.5 * bad[:, 2]
        cells = np.concatenate([
            np.stack([bad[:, 0], bad[:, 1], h], axis=1),
            np.stack([bad[:, 0] + h, bad[:, 1], h], axis=1),
            np.stack([bad[:, 0], bad[:, 1] + h, h], axis=1),
            np.stack([bad[:, 0] + h, bad[:, 1] + h, h], axis=1),
        ])
    raise QuadratureError("2-D Simpson exceeded its depth or evaluation budget")


# ----------------------------------------------------------------- steps

def hd_split_step(h1: Group, h2: Group, t: float, dt: float, tol: Optional[float] = None, *,
                  n_qubits: int, measure: bool = True) -> Tuple[np.ndarray, SplitStepReport]:
    """Two-group time-dependent Trotter step on ``[t, t + dt]``.

    Returns ``U1 @ U2`` (each factor the exact time-ordered exponential of
    its group) and a report pairing the measured error with ``c12 * dt**2``.
    If the c12 quadrature fails, ``c12`` falls back to ``||H_1|| ||H_2||``,
    which always dominates it, and the report is flagged.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g1, g2 = _as_group(h1), _as_group(h2)
    tol = default_tol(1 << n_qubits) if tol is None else tol
    u = _group_unitary(g1, t, dt, tol, n_qubits) @ _group_unitary(g2, t, dt, tol, n_qubits)

    c1, c2 = _group_strength(g1), _group_strength(g2)
    fallback = False
    try:
        c12 = c12_coefficient(g1, g2, t, dt, n_qubits)
    except QuadratureError:
        c12, fallback = c1 * c2, True

    measured = None
    if measure:
        exact = exact_evolve(g1 + g2, t, t + dt, tol, n_qubits=n_qubits)
        measured = ops.spectral_norm(exact - u)
    c_max = max(c1, c2)
    report = SplitStepReport(dt=dt, measured_error=measured, c12=c12, bound=c12 * dt * dt,
                             c12_cap=0.5 * c_max * c_max, c12_group_cap=c1 * c2,
                             oracle_tol=tol, fallback=fallback)
    return u, report


def recursion_bound(c_max: float, L: int, dt: float) -> float:
    """``1/2 c_max^2 dt^2 sum_{m=1}^{ceil(log2 L)} 2^m (L/2^m)^2``; at most ``1/2 c_max^2 L^2 dt^2``."""
    levels = math.ceil(math.log2(L)) if L > 1 else 0
    s = sum(2.0**m * (L / 2.0**m) ** 2 for m in range(1, levels + 1))
    return 0.5 * c_max * c_max * dt * dt * s


def _terms_and_n(hamiltonian, n_qubits):
    if isinstance(hamiltonian, HamiltonianModel):
        return list(hamiltonian.terms), hamiltonian.n_qubits
    if n_qubits is None:
        raise ValueError("n_qubits is required when passing a list of terms")
    return _as_group(hamiltonian), n_qubits


def hd_recursive_decompose(hamiltonian, t: float, dt: float, tol: Optional[float] = None, *,
                           n_qubits: Optional[int] = None, measure: bool = True,
                           compute_c12: bool = False) -> Tuple[np.ndarray, RecursiveReport]:
    """Recursive bisection of the term list into time-ordered single-term factors.

    The term list (in declared order) is split at its midpoint, each half is
    decomposed recursively, and the halves are composed as
    ``U_first_half @ U_second_half``. Leaves are exact single-term propagators.
    """
    terms, n = _terms_and_n(hamiltonian, n_qubits)
    if not terms:
        raise ValueError("need at least one term")
    if dt <= 0:
        raise ValueError("dt must be positive")
    tol = default_tol(1 << n) if tol is None else tol
    c_max = max(x.bound for x in terms)
    stats = {"group": 0.0, "tight": 0.0, "fallbacks": 0}

    def rec(group):
        if len(group) == 1:
            return exact_evolve_term(group[0], t, t + dt, n_total=n)
        half = (len(group) + 1) // 2
        left, right = group[:half], group[half:]
        stats["group"] += _group_strength(left) * _group_strength(right) * dt * dt
        if compute_c12:
            try:
                stats["tight"] += c12_coefficient(left, right, t, dt, n) * dt * dt
            except QuadratureError:
                stats["fallbacks"] += 1
                stats["tight"] += _group_strength(left) * _group_strength(right) * dt * dt
        return rec(left) @ rec(right)

    u = rec(terms)
    measured = None
    if measure:
        measured = ops.spectral_norm(exact_evolve(terms, t, t + dt, tol, n_qubits=n) - u)
    report = RecursiveReport(dt=dt, L=len(terms), measured_error=measured,
                             accumulated_bound=recursion_bound(c_max, len(terms), dt),
                             group_bound=stats["group"],
                             tight_bound=stats["tight"] if compute_c12 else None,
                             oracle_tol=tol, n_fallbacks=stats["fallbacks"])
    return u, report


# ----------------------------------------------------------------- planning

def plan_decomposition(model: HamiltonianModel, epsilon: float,
                       scheme: str = "hd_recursive") -> DecompositionPlan:
    """Bin width ``dt = epsilon / (T c_max^2 L^2)`` and gate count ``G = L * n_bins``.

    With this width the accumulated recursion bound over the horizon is
    ``epsilon / 2``, leaving the other half of the budget for gate synthesis.
    """
    if scheme not in ("hd_recursive", "piecewise_constant"):
        raise ValueError(f"unknown scheme {scheme!r}")
    T, L, c = model.horizon, model.L, model.c_max
    if not (epsilon > 0 and T > 0 and L >= 1 and c > 0):
        raise ValueError("planning needs epsilon > 0, T > 0, L >= 1 and c_max > 0")
    dt = epsilon / (T * c * c * L * L)
    ratio = T / dt
    nearest = round(ratio)
    n_bins = nearest if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio) else math.ceil(ratio)
    n_bins = max(1, int(n_bins))
    if n_bins > MAX_BINS:
        raise PlanningError(f"epsilon={epsilon:g} needs {n_bins} bins (cap {MAX_BINS})")
    last_dt = T - (n_bins - 1) * dt
    return DecompositionPlan(scheme=scheme, dt=dt, n_bins=n_bins, last_dt=last_dt, horizon=T,
                             term_order=tuple(x.id for x in model.terms),
                             epsilon_target=epsilon, gate_count=L * n_bins)


def evolve_plan(model: HamiltonianModel, plan: DecompositionPlan, tol: Optional[float] = None) -> np.ndarray:
    """Compose the planned bins into an approximation of ``U(0, T)``."""
    order = [model.term(i) for i in plan.term_order]
    if plan.scheme == "piecewise_constant":
        return piecewise_constant_evolve(model.subset(order), plan.dt)
    u = np.eye(model.dim, dtype=complex)
    for start, width in plan.bins():
        step, _ = hd_recursive_decompose(order, start, width, tol, n_qubits=model.n_qubits,
                                         measure=False)
        u = step @ u
    return u


def piecewise_constant_evolve(model: HamiltonianModel, dt: float, tol: Optional[float] = None) -> np.ndarray:
    """Sample every term at the right end of each bin and exponentiate.

    Bin ``j`` covers ``[(j-1) dt, j dt]`` (the last one is clipped at the
    horizon) and contributes ``exp(-i w H_X(t_j))`` for each term in declared
    order, the first term applied first. ``tol`` is accepted for interface
    symmetry; the construction is exact arithmetic on the sampled values.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = model.horizon
    n_bins = max(1, math.ceil(T / dt - 1e-9))
    ends = np.minimum(np.arange(1, n_bins + 1) * dt, T)
    widths = np.diff(np.concatenate([[0.0], ends]))
    gates = []
    for end, w in zip(ends, widths):
        for term in model.terms:
            gates.append((term, end, w))
    return _apply_gates(model, gates)


def _apply_gates(model: HamiltonianModel, gates) -> np.ndarray:
    """Product of ``exp(-i w signal(t) B)`` over ``(term, t, w)`` in application order."""
    if not gates:
        return np.eye(model.dim, dtype=complex)
    index = {term.id: i for i, term in enumerate(model.terms)}
    ids = np.array([index[g[0].id] for g in gates])
    times = np.array([g[1] for g in gates], dtype=float)
    widths = np.array([g[2] for g in gates], dtype=float)
    return gate_product(model, ids, times, widths)


def gate_product(model: HamiltonianModel, term_index: np.ndarray, times: np.ndarray,
                 widths: np.ndarray) -> np.ndarray:
    """Ordered product of single-term exponentials, vectorised per term.

    Gate ``g`` is ``exp(-i widths[g] * signal_X(times[g]) * B_X)`` with
    ``X = model.terms[term_index[g]]``; gates are applied in array order.
    """
    n_gates = len(term_index)
    stack = np.empty((n_gates, model.dim, model.dim), dtype=complex)
    for i, term in enumerate(model.terms):
        sel = np.nonzero(term_index == i)[0]
        if sel.size == 0:
            continue
        w, v = np.linalg.eigh(term.base)
        angles = widths[sel] * np.asarray(term.signal(times[sel]), dtype=float)
        local = (v[None] * np.exp(-1j * angles[:, None] * w[None, :])[:, None, :]) @ ops.dagger(v)[None]
        stack[sel] = ops.embed(local, term.support, model.n_qubits)
    return ops.ordered_product(stack)
