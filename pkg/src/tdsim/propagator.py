"""Exact time-ordered evolution ``U(a, b) = T exp(-i int_a^b H(s) ds)``.

The integrator is the exponential midpoint rule: each substep multiplies by
``exp(-i h H(t + h/2))``, which is exactly unitary. Steps never straddle a
signal discontinuity: ``[a, b]`` is first cut at every breakpoint reported by
the signals, and each segment is subdivided uniformly. Convergence is
certified by comparing a run at step ``h`` against one at ``h/2``; the finer
result is returned once their spectral-norm distance is at most ``tol``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import operators as ops
from .hamiltonian import HamiltonianModel, TimeDependentTerm

MAX_SUBSTEPS = 2**26

# Roughly this many complex entries per chunk of stacked step unitaries.
_CHUNK_ENTRIES = 1 << 21


class ConvergenceError(RuntimeError):
    """The step-halving certificate was not reached within the substep cap."""


@dataclass(frozen=True)
class EvolveInfo:
    difference: float  # ||U(h) - U(h/2)||, the convergence certificate
    n_steps: int       # substeps used for the returned (finer) result
    tol: float


def default_tol(dim: int) -> float:
    return 1e-10 if dim <= 64 else 1e-8


def _resolve(hamiltonian, n_qubits):
    if isinstance(hamiltonian, HamiltonianModel):
        return list(hamiltonian.terms), hamiltonian.n_qubits, hamiltonian.embedded_bases
    if isinstance(hamiltonian, TimeDependentTerm):
        hamiltonian = [hamiltonian]
    terms = list(hamiltonian)
    if n_qubits is None:
        raise ValueError("n_qubits is required when passing a list of terms")
    dim = 1 << n_qubits
    if terms:
        bases = np.stack([t.embedded_base(n_qubits) for t in terms])
    else:
        bases = np.zeros((0, dim, dim), dtype=complex)
    return terms, n_qubits, bases


def exact_evolve(hamiltonian: Union[HamiltonianModel, Sequence[TimeDependentTerm], TimeDependentTerm],
                 a: float, b: float, tol: Optional[float] = None, *,
                 n_qubits: Optional[int] = None, full_output: bool = False,
                 max_steps: int = MAX_SUBSTEPS):
    """Time-ordered propagator from ``a`` to ``b`` on the full register.

    Parameters
    ----------
    hamiltonian
        A model, a single term, or a list of terms (then ``n_qubits`` is required).
    tol
        Target spectral-norm accuracy; defaults to 1e-10 (dim <= 64) or 1e-8.
    full_output
        Also return an :class:`EvolveInfo` with the convergence certificate.

    Raises
    ------
    ConvergenceError
        If certifying ``tol`` would need more than ``max_steps`` substeps.
    """
    if b < a:
        raise ValueError("exact_evolve requires a <= b")
    terms, n, bases = _resolve(hamiltonian, n_qubits)
    dim = 1 << n
    tol = default_tol(dim) if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")

    if not terms or a == b:
        out = np.eye(dim, dtype=complex)
        return (out, EvolveInfo(0.0, 0, tol)) if full_output else out

    cuts = [np.array([a, b])] + [t.signal.breakpoints(a, b) for t in terms]
    cuts = np.unique(np.concatenate(cuts))
    starts, lengths = cuts[:-1], np.diff(cuts)
    keep = lengths > 0
    starts, lengths = starts[keep], lengths[keep]

    if all(t.signal.is_piecewise_constant for t in terms):
        # H is constant on each segment, so one midpoint step per segment is exact.
        counts = np.ones(len(starts), dtype=np.int64)
        if counts.sum() > max_steps:
            raise ConvergenceError(f"{counts.sum()} segments exceed the substep cap")
        out = _stepped(terms, bases, starts, lengths, counts)
        return (out, EvolveInfo(0.0, int(counts.sum()), tol)) if full_output else out

    norm = sum(t.bound for t in terms)
    scale = min(t.signal.timescale() for t in terms)
    h = min((b - a) / 4.0, 0.25 / max(norm, 1e-300), 0.5 * scale)
    while True:
        counts = np.maximum(1, np.ceil(lengths / h)).astype(np.int64)
        if 3 * counts.sum() > max_steps:
            raise ConvergenceError(
                f"certifying tol={tol:g} on [{a}, {b}] needs more than {max_steps} substeps")
        coarse = _stepped(terms, bases, starts, lengths, counts)
        fine = _stepped(terms, bases, starts, lengths, 2 * counts)
        diff = ops.spectral_norm(coarse - fine)
        if diff <= tol:
            out = fine
            return (out, EvolveInfo(diff, int(2 * counts.sum()), tol)) if full_output else out
        # midpoint error scales as h**2
        h = min(0.5 * h, 0.9 * h * math.sqrt(tol / diff))


def _stepped(terms, bases, starts, lengths, counts) -> np.ndarray:
    """Midpoint-exponential product over all segments with the given substep counts."""
    dim = bases.shape[-1]
    total = int(counts.sum())
    ends = np.cumsum(counts)
    first = ends - counts
    widths = lengths / counts
    chunk = max(64, _CHUNK_ENTRIES // (dim * dim))
    u = np.eye(dim, dtype=complex)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total))
        seg = np.searchsorted(ends, idx, side="right")
        w = widths[seg]
        mid = starts[seg] + (idx - first[seg] + 0.5) * w
        coeffs = np.stack([np.asarray(t.signal(mid), dtype=float) for t in terms], axis=-1)
        hs = np.tensordot(coeffs, bases, axes=([-1], [0]))
        u = ops.ordered_product(ops.expm_hermitian_batch(hs, w)) @ u
    return u


def exact_evolve_term(term: TimeDependentTerm, a: float, b: float, tol: Optional[float] = None, *,
                      method: str = "analytic", n_total: Optional[int] = None) -> np.ndarray:
    """Propagator of a single term, on its own ``2**k`` space unless ``n_total`` is given.

    A scalar-signal term commutes with itself at all times, so the
    time-ordered exponential equals ``expm(base, int_a^b signal)``; this is the
    ``"analytic"`` method. ``"stepping"`` runs the general integrator instead.
    """
    if b < a:
        raise ValueError("exact_evolve_term requires a <= b")
    k = len(term.support)
    if method == "analytic":
        local = ops.expm(term.base, term.signal.integral(a, b))
    elif method == "stepping":
        moved = dataclasses.replace(term, support=tuple(range(k)))
        local = exact_evolve([moved], a, b, tol, n_qubits=k)
    else:
        raise ValueError(f"unknown method {method!r}")
    if n_total is None:
        return local
    return ops.embed(local, term.support, n_total)
