"""Gate counting and the census of states reachable by small circuits.

All large quantities are carried as base-10 logarithms. The logarithm in the
Solovay-Kitaev count ``G_tot = d_SK G log^c_SK(G / epsilon)`` is natural; a
different base only rescales ``d_SK``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

LOG10_PI = math.log10(math.pi)


@dataclass(frozen=True)
class CountingParams:
    """Inputs for the gate counts (``c_max, T, L, epsilon``) and the census (``K, alpha, M, eps``)."""

    K: int = 2
    alpha: float = 2.0
    M: int = 2
    eps: float = 0.1
    d_SK: float = 1.0
    c_SK: float = 2.0
    c_max: float = 1.0
    T: float = 1.0
    L: int = 2
    epsilon: float = 0.1

    def __post_init__(self):
        for name in ("K", "alpha", "M", "eps", "d_SK", "c_SK", "c_max", "T", "L", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.eps < 1:
            raise ValueError("eps must be < 1")


@dataclass(frozen=True)
class GateCounts:
    G: float
    eps_G: float
    G_tot: float          # inf if it overflows a double; the log10 field is always finite
    log10_G: float
    log10_eps_G: float
    log10_G_tot: float


def gate_counts(p: CountingParams) -> GateCounts:
    """``G = c_max^2 T^2 L^3 / epsilon``, ``eps_G = epsilon / 2G`` and the Solovay-Kitaev total."""
    log10_G = 2 * math.log10(p.c_max) + 2 * math.log10(p.T) + 3 * math.log10(p.L) - math.log10(p.epsilon)
    log10_eps_G = math.log10(p.epsilon) - math.log10(2.0) - log10_G
    ln_ratio = (log10_G - math.log10(p.epsilon)) * math.log(10.0)  # ln(G / epsilon)
    if ln_ratio <= 0:
        raise ValueError("G / epsilon must exceed 1 for the Solovay-Kitaev count")
    log10_G_tot = math.log10(p.d_SK) + log10_G + p.c_SK * math.log10(ln_ratio)
    try:
        G = p.c_max * p.c_max * p.T * p.T * p.L ** 3 / p.epsilon
    except OverflowError:
        G = math.inf
    eps_G = p.epsilon / (2.0 * G) if math.isfinite(G) else 10.0 ** log10_eps_G
    G_tot = p.d_SK * G * ln_ratio ** p.c_SK if math.isfinite(G) else math.inf
    return GateCounts(G=G, eps_G=eps_G, G_tot=G_tot, log10_G=log10_G,
                      log10_eps_G=log10_eps_G, log10_G_tot=log10_G_tot)


def log_sphere_area(K: int) -> float:
    """Natural log of ``S = 2 pi^(2^K) / Gamma(2^K)``."""
    n = 2.0 ** K
    return math.log(2.0) + n * math.log(math.pi) - math.lgamma(n)


def log_ball_volume(K: int, eps: float) -> float:
    """Natural log of ``V = 2 pi^(2^K - 1) eps^(2^(K+1) - 2) / Gamma(2^K)``."""
    n = 2.0 ** K
    return math.log(2.0) + (n - 1) * math.log(math.pi) + (2 * n - 2) * math.log(eps) - math.lgamma(n)


def log10_circuits(K: int, M: int, alpha: float) -> float:
    """``log10 N_circuits = K^alpha log10(M K^2)``."""
    return K ** alpha * math.log10(M * K * K)


def volume_fraction(p: CountingParams) -> float:
    """``log10(N_circuits V / S)``; the Gamma and most pi factors cancel in ``V / S``."""
    return log10_circuits(p.K, p.M, p.alpha) + (2.0 ** (p.K + 1) - 2) * math.log10(p.eps) - LOG10_PI


def crossover(M: int, alpha: float, eps: float, k_max: int = 200) -> int:
    """Smallest ``K*`` such that the log fraction strictly decreases at every ``K >= K*`` up to ``k_max``."""
    vals = [volume_fraction(CountingParams(K=k, alpha=alpha, M=M, eps=eps)) for k in range(1, k_max + 1)]
    k_star = k_max
    for k in range(k_max - 1, 0, -1):
        if vals[k] < vals[k - 1]:
            k_star = k
        else:
            break
    return k_star


@dataclass(frozen=True)
class CensusRow:
    K: int
    log10_circuits: float
    log10_ball_over_sphere: float
    log10_fraction: float


def census(Ks: Iterable[int], M: int = 2, alpha: float = 2.0, eps: float = 0.1) -> List[CensusRow]:
    rows = []
    for K in Ks:
        p = CountingParams(K=K, alpha=alpha, M=M, eps=eps)
        frac = volume_fraction(p)
        circ = log10_circuits(K, M, alpha)
        rows.append(CensusRow(K=K, log10_circuits=circ, log10_ball_over_sphere=frac - circ,
                              log10_fraction=frac))
    return rows
