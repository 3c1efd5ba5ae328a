"""Gaussian low-pass smoothing of a model and the decoupling bound.

Every term's signal (windowed to ``[0, T]``) is convolved with a normal
kernel of width ``sigma``, truncated at ``+-6 sigma`` and renormalised to
unit mass. The smoothed signal is stored as a table of exact cell averages on
a uniform grid over ``[-6 sigma, T + 6 sigma]``, so integrals of the smoothed
Hamiltonian over grid cells carry only rounding error. Between grid points
the table is piecewise constant; with cells of width ``sigma / 32`` this
changes the smoothed evolution by far less than the decoupling bound.

Cell averages are computed in closed form for piecewise-constant signals and
with composite Gauss-Legendre quadrature over the kernel for sinusoids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import operators as ops
from .hamiltonian import HamiltonianModel, TimeDependentTerm, model_norm_bound
from .propagator import default_tol, exact_evolve
from .signals import Sinusoid, Tabulated, TimeSignal

KERNEL_CUT = 6.0
# mass of the standard normal inside +-KERNEL_CUT
KERNEL_MASS = math.erf(KERNEL_CUT / math.sqrt(2.0))
MIN_CELLS = 4096
CELLS_PER_SIGMA = 32
TABULATION_TOL = 1e-8
AC_STARK_MIN_RATIO = 20.0
# C in ||U - exp(i T lam^2 Z / omega)|| <= C (lam/omega + lam^2 T / omega).
# Largest ratio over omega/lam in [20, 100], k up to 1024 was 0.0821; frozen with margin.
AC_STARK_C = 0.1

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_CHUNK = 1 << 22


class SmoothingError(ValueError):
    """Invalid smoothing request or a table that misses its accuracy target."""


def _psi(z):
    """``E[max(z - Y, 0)]`` for ``Y`` standard normal truncated to ``+-6`` and renormalised."""
    z = np.asarray(z, dtype=float)
    c = KERNEL_CUT
    lo_tail = special.ndtr(-c)
    zc = np.clip(z, -c, c)
    inside = (zc * special.ndtr(zc) + np.exp(-0.5 * zc * zc) / math.sqrt(2 * math.pi)
              - math.exp(-0.5 * c * c) / math.sqrt(2 * math.pi) - zc * lo_tail) / KERNEL_MASS
    return np.where(z >= c, z, np.where(z <= -c, 0.0, inside))


def _piecewise_profile(signal: TimeSignal):
    """Edges and values of a windowed piecewise-constant signal; zero outside the edges."""
    w0, w1 = signal.window
    edges = np.unique(np.concatenate([[w0, w1], signal.breakpoints(w0, w1)]))
    values = np.asarray(signal(0.5 * (edges[:-1] + edges[1:])), dtype=float).reshape(-1)
    return edges, values


def _cell_averages_piecewise(signal: TimeSignal, sigma: float, grid: np.ndarray) -> np.ndarray:
    edges, values = _piecewise_profile(signal)
    jumps = np.diff(np.concatenate([[0.0], values, [0.0]]))
    cum = np.concatenate([[0.0], np.cumsum(jumps)])
    a, b = grid[:-1], grid[1:]
    h = b - a
    reach = KERNEL_CUT * sigma
    lo = np.searchsorted(edges, a - reach, side="left")
    hi = np.searchsorted(edges, b + reach, side="right")
    # jumps left of the kernel reach contribute their full height
    out = cum[lo].copy()
    width = int(np.max(hi - lo, initial=0))
    if width == 0:
        return out
    step = max(1, _CHUNK // width)
    offs = np.arange(width)
    for s in range(0, len(a), step):
        sl = slice(s, s + step)
        idx = lo[sl, None] + offs
        mask = idx < hi[sl, None]
        idx = np.where(mask, idx, 0)
        e = edges[idx]
        d = sigma * (_psi((b[sl, None] - e) / sigma) - _psi((a[sl, None] - e) / sigma))
        out[sl] += np.sum(np.where(mask, jumps[idx] * d, 0.0), axis=1) / h[sl]
    return out


def _sinusoid_antiderivative(signal: Sinusoid, u):
    w0, w1 = signal.window
    c = np.clip(u, w0, w1)
    A, w, p = signal.amplitude, signal.omega, signal.phase
    if w == 0.0:
        return A * math.cos(p) * (c - w0)
    # 2 cos(mid) sin(half) form of sin(w c + p) - sin(w w0 + p)
    half = 0.5 * w * (c - w0)
    return A * 2.0 * np.cos(0.5 * w * (c + w0) + p) * np.sin(half) / w


def _kernel_average(func, kinks: Sequence[float], sigma: float, t: np.ndarray, omega: float) -> np.ndarray:
    """``E[func(t - sigma Y)]`` by Gauss-Legendre, splitting at the kinks of ``func``."""
    c = KERNEL_CUT
    cuts = [np.full(t.shape, -c), np.full(t.shape, c)]
    cuts += [np.clip((t - k) / sigma, -c, c) for k in kinks]
    cuts = np.sort(np.stack(cuts, axis=-1), axis=-1)
    # panels of at most pi radians of oscillation, and at most 1.5 kernel widths
    panels = max(8, math.ceil(2.0 * c * abs(omega) * sigma / math.pi))
    x = (_GL_NODES + 1.0) / 2.0
    frac = ((np.arange(panels)[:, None] + x[None, :]) / panels).ravel()
    wts = np.tile(_GL_WEIGHTS / (2.0 * panels), panels)
    out = np.zeros(t.shape)
    step = max(1, _CHUNK // frac.size)
    for s in range(0, t.size, step):
        sl = slice(s, s + step)
        for j in range(cuts.shape[-1] - 1):
            lo, hi = cuts[sl, j, None], cuts[sl, j + 1, None]
            y = lo + (hi - lo) * frac
            dens = np.exp(-0.5 * y * y) / (math.sqrt(2 * math.pi) * KERNEL_MASS)
            out[sl] += np.sum(func(t[sl, None] - sigma * y) * dens * wts, axis=1) * (hi - lo)[:, 0]
    return out


def kernel_char(x: float) -> float:
    """``E[cos(x Y)]`` for the truncated, renormalised standard normal ``Y``.

    Written through the Faddeeva function so large ``x`` cannot overflow.
    """
    c = KERNEL_CUT
    z = complex(-x, c) / math.sqrt(2.0)
    val = math.exp(-0.5 * x * x) - (math.exp(-0.5 * c * c) * np.exp(-1j * c * x) * special.wofz(z)).real
    return float(val) / KERNEL_MASS


def _cell_averages_sinusoid(signal: Sinusoid, sigma: float, grid: np.ndarray) -> np.ndarray:
    w0, w1 = signal.window
    reach = KERNEL_CUT * sigma
    A, w, p = signal.amplitude, signal.omega, signal.phase
    G = lambda u: _sinusoid_antiderivative(signal, u)  # noqa: E731
    F = np.empty(grid.shape)
    inner = (grid - reach >= w0) & (grid + reach <= w1)
    if w != 0.0:
        # away from the window edges the kernel only rescales the oscillation
        phi = kernel_char(w * sigma)
        F[inner] = phi * G(grid[inner]) - (1.0 - phi) * A * math.sin(w * w0 + p) / w
    else:
        F[inner] = G(grid[inner])
    F[grid + reach <= w0] = 0.0
    F[grid - reach >= w1] = G(w1)
    edge = (grid + reach > w0) & (grid - reach < w1) & ~inner
    F[edge] = _kernel_average(G, signal.window, sigma, grid[edge], w)
    return np.diff(F) / np.diff(grid)


def smoothed_cell_averages(signal: TimeSignal, sigma: float, grid: np.ndarray) -> np.ndarray:
    """Averages of the kernel-smoothed ``signal`` over the cells of ``grid``."""
    if signal.window is None:
        raise SmoothingError("signals must be windowed before smoothing")
    if signal.is_piecewise_constant:
        return _cell_averages_piecewise(signal, sigma, grid)
    if isinstance(signal, Sinusoid):
        return _cell_averages_sinusoid(signal, sigma, grid)
    raise SmoothingError(f"cannot smooth signals of kind {signal.kind!r}")


def direct_cell_average(signal: TimeSignal, sigma: float, a: float, b: float) -> float:
    """Independent check of one cell average via adaptive quadrature over the kernel.

    Uses only the signal's own ``integral``; slow, meant for spot checks.
    """
    c = KERNEL_CUT
    w0, w1 = signal.window
    kinks = np.concatenate([[w0, w1], signal.breakpoints(w0 - 1.0, w1 + 1.0)])
    pts = np.concatenate([(a - kinks) / sigma, (b - kinks) / sigma])
    pts = np.unique(pts[(pts > -c) & (pts < c)])

    def f(y):
        dens = math.exp(-0.5 * y * y) / (math.sqrt(2 * math.pi) * KERNEL_MASS)
        return signal.integral(a - sigma * y, b - sigma * y) * dens

    total = 0.0
    for lo, hi in zip(np.concatenate([[-c], pts]), np.concatenate([pts, [c]])):
        total += integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return total / (b - a)


@dataclass(frozen=True, eq=False)
class SmoothedModel:
    """A model whose signals are replaced by tabulated Gaussian-smoothed versions."""

    base: HamiltonianModel
    sigma: float
    grid: np.ndarray       # cell edges over [-6 sigma, T + 6 sigma]
    model: HamiltonianModel

    @property
    def start(self) -> float:
        return float(self.grid[0])

    @property
    def stop(self) -> float:
        return float(self.grid[-1])

    def evolve(self, tol: Optional[float] = None) -> np.ndarray:
        """``U~`` over the whole support of the smoothed Hamiltonian."""
        return exact_evolve(self.model, self.start, self.stop, tol)

    def tabulation_error(self, n_spots: int = 4) -> float:
        """Largest gap between stored and directly computed cell averages at spread-out cells."""
        n = len(self.grid) - 1
        cells = np.unique(np.linspace(0, n - 1, n_spots + 2).astype(int)[1:-1])
        worst = 0.0
        for orig, term in zip(self.base.terms, self.model.terms):
            sig = orig.signal.with_window((0.0, self.base.horizon))
            for i in cells:
                ref = direct_cell_average(sig, self.sigma, self.grid[i], self.grid[i + 1])
                worst = max(worst, abs(float(term.signal.values[i]) - ref))
        return worst


def default_grid_cells(horizon: float, sigma: float) -> int:
    span = horizon + 2.0 * KERNEL_CUT * sigma
    return max(MIN_CELLS, math.ceil(CELLS_PER_SIGMA * span / sigma))


def smooth(model: HamiltonianModel, sigma: float, grid: Optional[int] = None, *,
           check: bool = True) -> SmoothedModel:
    """Convolve every term's signal with a width-``sigma`` normal kernel.

    Parameters
    ----------
    grid
        Number of table cells; defaults to ``max(4096, 32 * span / sigma)``.
        Cells wider than ``sigma / 4`` are rejected.
    check
        Spot-check a few cell averages against :func:`direct_cell_average`
        and raise :class:`SmoothingError` if any misses ``TABULATION_TOL``.
    """
    if not sigma > 0:
        raise SmoothingError("sigma must be positive")
    T = model.horizon
    n_cells = default_grid_cells(T, sigma) if grid is None else int(grid)
    span = T + 2.0 * KERNEL_CUT * sigma
    if n_cells < 1 or span / n_cells > 0.25 * sigma:
        raise SmoothingError(f"grid of {n_cells} cells is too coarse for sigma={sigma:g}")
    edges = np.linspace(-KERNEL_CUT * sigma, T + KERNEL_CUT * sigma, n_cells + 1)
    terms = []
    for term in model.terms:
        sig = term.signal.with_window((0.0, T))
        avg = smoothed_cell_averages(sig, sigma, edges)
        table = Tabulated(edges, np.concatenate([avg, [0.0]]))
        terms.append(TimeDependentTerm(term.id, term.support, term.base, table, label=term.label))
    smoothed = HamiltonianModel(model.n_qubits, tuple(terms), model.k, T,
                                name=f"{model.name}~" if model.name else "", strict=False)
    out = SmoothedModel(base=model, sigma=float(sigma), grid=edges, model=smoothed)
    if check and model.terms:
        err = out.tabulation_error()
        if err > TABULATION_TOL:
            raise SmoothingError(f"tabulation error {err:.3g} exceeds {TABULATION_TOL:g}")
    return out


@dataclass(frozen=True)
class DecouplingReport:
    sigma: float
    measured: float  # ||U(0, T) - U~||
    bound: float     # 2 ||H||^2 T sqrt(2/pi) sigma
    norm: float
    oracle_tol: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound + self.oracle_tol


def decoupling_bound(norm: float, horizon: float, sigma: float) -> float:
    return 2.0 * norm * norm * horizon * math.sqrt(2.0 / math.pi) * sigma


def verify_decoupling(model: HamiltonianModel, sigma: float, tol: Optional[float] = None, *,
                      grid: Optional[int] = None) -> DecouplingReport:
    """Measure ``||U - U~||`` against the decoupling bound.

    ``U`` runs over ``[0, T]`` with signals windowed there; since ``H`` vanishes
    outside, it equals the propagator over the smoothed model's whole support.
    ``||H||`` is :func:`~tdsim.hamiltonian.model_norm_bound`.
    """
    tol = default_tol(model.dim) if tol is None else tol
    windowed = model.subset([_windowed(t, model.horizon) for t in model.terms])
    u = exact_evolve(windowed, 0.0, model.horizon, tol)
    u_s = smooth(model, sigma, grid).evolve(tol)
    norm = model_norm_bound(model)
    return DecouplingReport(sigma=float(sigma), measured=ops.spectral_norm(u - u_s),
                            bound=decoupling_bound(norm, model.horizon, sigma), norm=norm,
                            oracle_tol=2.0 * tol)


def _windowed(term: TimeDependentTerm, horizon: float) -> TimeDependentTerm:
    import dataclasses
    return dataclasses.replace(term, signal=term.signal.with_window((0.0, horizon)))


# ------------------------------------------------------------------ AC Stark

@dataclass(frozen=True, eq=False)
class AcStarkScenario:
    """Driven qubit ``lam (cos(omega t) X + sin(omega t) Y)`` over ``k`` drive periods."""

    lam: float
    omega: float
    k_periods: int
    model: HamiltonianModel

    @property
    def horizon(self) -> float:
        return self.model.horizon

    @property
    def phase(self) -> float:
        """``T lam^2 / omega``."""
        return self.horizon * self.lam ** 2 / self.omega

    @property
    def reference(self) -> np.ndarray:
        """``exp(i T lam^2 Z / omega)``."""
        return ops.expm(ops.pauli("Z"), -self.phase)

    @property
    def tolerance(self) -> float:
        """Calibrated perturbative accuracy ``C (lam/omega + lam^2 T/omega)``."""
        return AC_STARK_C * (self.lam / self.omega + self.phase)

    def exact_reference(self) -> np.ndarray:
        """Closed-form ``U(0, T)`` from the rotating frame, for cross-checks."""
        T, lam, w = self.horizon, self.lam, self.omega
        z = ops.pauli("Z")
        frame = ops.expm(z, 0.5 * w * T)
        return frame @ ops.expm(lam * ops.pauli("X") - 0.5 * w * z, T)


def ac_stark_scenario(lam: float, omega: float, k_periods: int) -> AcStarkScenario:
    """Build the AC Stark model with ``T = 2 pi k / omega``; requires ``omega >= 20 lam``."""
    if lam < 0 or omega <= 0 or k_periods < 1:
        raise ValueError("need lam >= 0, omega > 0 and k_periods >= 1")
    if omega < AC_STARK_MIN_RATIO * lam:
        raise ValueError(f"omega={omega:g} is not >= {AC_STARK_MIN_RATIO:g} * lam={lam:g}")
    T = 2.0 * math.pi * k_periods / omega
    window = (0.0, T)
    terms = (
        TimeDependentTerm.from_pauli("x", (0,), "X", Sinusoid(lam, omega, 0.0, window)),
        TimeDependentTerm.from_pauli("y", (0,), "Y", Sinusoid(lam, omega, -0.5 * math.pi, window)),
    )
    model = HamiltonianModel(1, terms, 1, T, name="ac_stark")
    return AcStarkScenario(lam=float(lam), omega=float(omega), k_periods=int(k_periods), model=model)


def ac_stark_for_sigma(lam: float, horizon: float, sigma: float, omega_sigma: float = 3.0) -> AcStarkScenario:
    """AC Stark instance whose drive is washed out by smoothing of width ``sigma``.

    Picks the whole number of periods in roughly ``horizon`` that puts
    ``omega * sigma`` closest to ``omega_sigma``.
    """
    k = max(1, round(omega_sigma * horizon / (2.0 * math.pi * sigma)))
    return ac_stark_scenario(lam, 2.0 * math.pi * k / horizon, k)
