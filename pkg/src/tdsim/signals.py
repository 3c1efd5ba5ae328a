"""Scalar time signals multiplying the fixed operator of each Hamiltonian term.

Every signal evaluates for all real ``t`` (vectorised over arrays) and can be
restricted to a support window, outside of which it is zero. Piecewise
constant kinds (``piecewise_constant``, ``telegraph``, ``tabulated``) expose
their jump times through :meth:`TimeSignal.breakpoints` so integrators can
split steps there.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, ClassVar, Optional, Tuple

import numpy as np

from .rng import SplitMix64

Window = Optional[Tuple[float, float]]

# Telegraph switching times live on this grid.
TELEGRAPH_TICK = 1e-9


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance within the depth cap."""


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 40) -> float:
    """Composite Simpson with interval halving until the absolute tolerance holds."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_step(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        raise QuadratureError(f"no convergence on [{a}, {b}]")
    return (_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


@dataclass(frozen=True)
class TimeSignal:
    """Base class; subclasses implement the unwindowed ``_raw*`` hooks."""

    kind: ClassVar[str] = ""
    is_piecewise_constant: ClassVar[bool] = False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self._raw(t)
        w = self.window
        if w is not None:
            out = np.where((t >= w[0]) & (t <= w[1]), out, 0.0)
        return out if out.ndim else float(out)

    def _clip(self, a: float, b: float):
        w = self.window
        if w is None:
            return a, b
        return min(max(a, w[0]), w[1]), min(max(b, w[0]), w[1])

    def integral(self, a: float, b: float) -> float:
        """Integral of the signal over [a, b] (a <= b)."""
        if b < a:
            raise ValueError("integral requires a <= b")
        a, b = self._clip(a, b)
        return 0.0 if a == b else self._raw_integral(a, b)

    def abs_integral(self, a: float, b: float) -> float:
        """Integral of |signal| over [a, b]."""
        if b < a:
            raise ValueError("abs_integral requires a <= b")
        a, b = self._clip(a, b)
        return 0.0 if a == b else self._raw_abs_integral(a, b)

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        """Sorted discontinuity times strictly inside (a, b)."""
        pts = list(self._raw_breakpoints(a, b))
        if self.window is not None:
            pts.extend(self.window)
        pts = np.unique(np.asarray(pts, dtype=float))
        return pts[(pts > a) & (pts < b)]

    def sup(self) -> float:
        """Upper bound on |signal(t)| over all t."""
        raise NotImplementedError

    def timescale(self) -> float:
        """Shortest time over which the signal varies smoothly (inf if piecewise)."""
        return math.inf

    def _raw_breakpoints(self, a, b):
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _window_dict(self) -> dict:
        return {} if self.window is None else {"window": [self.window[0], self.window[1]]}

    def with_window(self, window) -> "TimeSignal":
        """Copy of the signal restricted to ``window`` intersected with the current one."""
        lo, hi = float(window[0]), float(window[1])
        if self.window is not None:
            lo, hi = max(lo, self.window[0]), min(hi, self.window[1])
        return dataclasses.replace(self, window=(lo, hi))


def _check_window(window):
    if window is None:
        return None
    lo, hi = float(window[0]), float(window[1])
    if not lo <= hi:
        raise ValueError(f"window must satisfy start <= stop, got {window}")
    return (lo, hi)


@dataclass(frozen=True)
class Constant(TimeSignal):
    value: float
    window: Window = None

    kind: ClassVar[str] = "constant"
    is_piecewise_constant: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "window", _check_window(self.window))

    def _raw(self, t):
        return np.full(t.shape, self.value)

    def _raw_integral(self, a, b):
        return self.value * (b - a)

    def _raw_abs_integral(self, a, b):
        return abs(self.value) * (b - a)

    def sup(self):
        return abs(self.value)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, **self._window_dict()}


@dataclass(frozen=True)
class Sinusoid(TimeSignal):
    """``amplitude * cos(omega * t + phase)``."""

    amplitude: float
    omega: float
    phase: float = 0.0
    window: Window = None

    kind: ClassVar[str] = "sinusoid"

    def __post_init__(self):
        for name in ("amplitude", "omega", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "window", _check_window(self.window))

    def _raw(self, t):
        return self.amplitude * np.cos(self.omega * t + self.phase)

    def _raw_integral(self, a, b):
        w, p = self.omega, self.phase
        if w == 0.0:
            return self.amplitude * math.cos(p) * (b - a)
        # sin(x) - sin(y) = 2 cos((x+y)/2) sin((x-y)/2) avoids cancellation for short spans
        half = 0.5 * w * (b - a)
        return self.amplitude * 2.0 * math.cos(0.5 * w * (a + b) + p) * math.sin(half) / w

    def _raw_abs_integral(self, a, b):
        w, p = self.omega, self.phase
        if w == 0.0:
            return abs(self.amplitude * math.cos(p)) * (b - a)
        ta, tb = w * a + p, w * b + p
        if w < 0:
            ta, tb = tb, ta
        if tb - ta < 1.0:
            # short phase span: the closed form would cancel, so sum |integral| between zeros
            n0, n1 = math.ceil((ta - 0.5 * math.pi) / math.pi), math.floor((tb - 0.5 * math.pi) / math.pi)
            zeros = [((n + 0.5) * math.pi - p) / w for n in range(n0, n1 + 1)]
            cuts = sorted([a, b] + [z for z in zeros if a < z < b])
            return sum(abs(self._raw_integral(x, y)) for x, y in zip(cuts, cuts[1:]))
        return abs(self.amplitude) / abs(w) * (_abs_cos_antiderivative(tb) - _abs_cos_antiderivative(ta))

    def sup(self):
        return abs(self.amplitude)

    def timescale(self):
        return math.inf if self.omega == 0 else 1.0 / abs(self.omega)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "omega": self.omega,
                "phase": self.phase, **self._window_dict()}


def _abs_cos_antiderivative(theta: float) -> float:
    n = math.floor((theta + 0.5 * math.pi) / math.pi)
    return 2.0 * n + (-1.0) ** n * math.sin(theta)


class _Piecewise(TimeSignal):
    """Shared machinery: value ``values[i]`` on ``[edges[i], edges[i+1])``."""

    is_piecewise_constant: ClassVar[bool] = True
    # take the last value at the final edge itself, like a closed window
    _closed_end: ClassVar[bool] = False

    # subclasses provide _edges (n+1,) and _values (n,); _tail_value() holds after the last edge

    def _raw(self, t):
        e, v = self._edges, self._values
        idx = np.searchsorted(e, t, side="right") - 1
        vals = np.concatenate([v, [self._tail_value()]])
        out = np.where(idx < 0, 0.0, vals[np.clip(idx, 0, len(v))])
        if self._closed_end:
            out = np.where(t == e[-1], v[-1], out)
        return out

    def _tail_value(self):
        return 0.0

    @cached_property
    def _cum(self):
        widths = np.diff(self._edges)
        return np.concatenate([[0.0], np.cumsum(self._values * widths)])

    @cached_property
    def _abs_cum(self):
        widths = np.diff(self._edges)
        return np.concatenate([[0.0], np.cumsum(np.abs(self._values) * widths)])

    def _antiderivative(self, t, cum, vals, tail):
        e = self._edges
        if t <= e[0]:
            return 0.0
        if t >= e[-1]:
            return cum[-1] + tail * (t - e[-1])
        i = int(np.searchsorted(e, t, side="right")) - 1
        return cum[i] + vals[i] * (t - e[i])

    def antiderivative(self, t):
        """Integral of the unwindowed signal from -inf to ``t`` (vectorised)."""
        t = np.asarray(t, dtype=float)
        e = self._edges
        idx = np.clip(np.searchsorted(e, t, side="right") - 1, 0, len(self._values) - 1)
        inside = self._cum[idx] + self._values[idx] * (t - e[idx])
        out = np.where(t <= e[0], 0.0, inside)
        return np.where(t >= e[-1], self._cum[-1] + self._tail_value() * (t - e[-1]), out)

    def _raw_integral(self, a, b):
        tail = self._tail_value()
        return (self._antiderivative(b, self._cum, self._values, tail)
                - self._antiderivative(a, self._cum, self._values, tail))

    def _raw_abs_integral(self, a, b):
        tail = abs(self._tail_value())
        av = np.abs(self._values)
        return (self._antiderivative(b, self._abs_cum, av, tail)
                - self._antiderivative(a, self._abs_cum, av, tail))

    def _raw_breakpoints(self, a, b):
        e = self._edges
        return e[(e > a) & (e < b)]

    def sup(self):
        return float(max(np.max(np.abs(self._values), initial=0.0), abs(self._tail_value())))


@dataclass(frozen=True)
class PiecewiseConstant(_Piecewise):
    """``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``, zero elsewhere."""

    edges: Tuple[float, ...]
    values: Tuple[float, ...]
    window: Window = None

    kind: ClassVar[str] = "piecewise_constant"
    _closed_end: ClassVar[bool] = True

    def __post_init__(self):
        bp = tuple(float(x) for x in self.edges)
        vals = tuple(float(x) for x in self.values)
        if len(bp) != len(vals) + 1 or not vals:
            raise ValueError("piecewise_constant needs len(breakpoints) == len(values) + 1 >= 2")
        if any(y <= x for x, y in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "edges", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "window", _check_window(self.window))

    @cached_property
    def _edges(self):
        return np.asarray(self.edges)

    @cached_property
    def _values(self):
        return np.asarray(self.values)

    def to_dict(self):
        return {"kind": self.kind, "breakpoints": list(self.edges),
                "values": list(self.values), **self._window_dict()}


@dataclass(frozen=True)
class Tabulated(_Piecewise):
    """Hold-left table: ``values[i]`` from ``times[i]`` until the next sample.

    Zero before ``times[0]``; the last value is held afterwards (use a
    window, or a trailing zero sample, to cut it).
    """

    times: Tuple[float, ...]
    values: Tuple[float, ...]
    window: Window = None

    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != vals.shape or times.size < 1:
            raise ValueError("tabulated needs equally long, non-empty times and values")
        if np.any(np.diff(times) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        # keep arrays internally; tuples would be slow for long tables
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "window", _check_window(self.window))

    def __eq__(self, other):
        return (type(other) is Tabulated and self.window == other.window
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @cached_property
    def _edges(self):
        return self.times

    @cached_property
    def _values(self):
        return self.values[:-1]

    def _tail_value(self):
        return float(self.values[-1])

    def to_dict(self):
        return {"kind": self.kind, "times": self.times.tolist(),
                "values": self.values.tolist(), **self._window_dict()}


@dataclass(frozen=True)
class Telegraph(_Piecewise):
    """Random telegraph signal on ``window``.

    Starts at a random level and jumps after exponential waiting times with
    mean ``1/switch_rate``; with more than two levels the next level is
    drawn uniformly among the others. Jump times are integer multiples of
    ``TELEGRAPH_TICK`` after ``window[0]`` and come from a SplitMix64 stream
    seeded by ``seed``, so the schedule is reproducible bit for bit.
    """

    seed: int
    switch_rate: float
    levels: Tuple[float, ...] = (-1.0, 1.0)
    window: Window = (0.0, 1.0)

    kind: ClassVar[str] = "telegraph"
    _closed_end: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "switch_rate", float(self.switch_rate))
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        if self.window is None:
            raise ValueError("telegraph signals need a finite window")
        object.__setattr__(self, "window", _check_window(self.window))
        if self.switch_rate <= 0 or len(self.levels) < 1:
            raise ValueError("telegraph needs switch_rate > 0 and at least one level")

    @cached_property
    def _schedule(self):
        rng = SplitMix64(self.seed)
        start, stop = self.window
        n_levels = len(self.levels)
        level = rng.next_u64() % n_levels
        span_ticks = round((stop - start) / TELEGRAPH_TICK)
        ticks, idx = [0], [level]
        pos = 0
        while True:
            u = rng.next_double()
            wait = -math.log1p(-u) / self.switch_rate
            pos += max(1, round(wait / TELEGRAPH_TICK))
            if pos >= span_ticks:
                break
            if n_levels > 1:
                level = (level + 1 + rng.next_u64() % (n_levels - 1)) % n_levels
            ticks.append(pos)
            idx.append(level)
        edges = np.array([start + k * TELEGRAPH_TICK for k in ticks] + [stop])
        values = np.array([self.levels[i] for i in idx])
        return edges, values

    @property
    def _edges(self):
        return self._schedule[0]

    @property
    def _values(self):
        return self._schedule[1]

    @property
    def switch_times(self) -> np.ndarray:
        return self._schedule[0][1:-1]

    def sup(self):
        return max(abs(x) for x in self.levels)

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, "switch_rate": self.switch_rate,
                "levels": list(self.levels), **self._window_dict()}


@dataclass(frozen=True)
class FunctionSignal(TimeSignal):
    """Arbitrary callable signal; integrals use adaptive Simpson.

    ``bound`` must dominate ``|func|``. Not serialisable.
    """

    func: Callable = field(compare=False)
    bound: float = 1.0
    window: Window = None
    scale: float = math.inf

    kind: ClassVar[str] = "function"

    def _raw(self, t):
        return np.vectorize(self.func, otypes=[float])(t) if t.ndim else np.asarray(self.func(float(t)))

    def _raw_integral(self, a, b):
        return adaptive_simpson(lambda s: float(self.func(s)), a, b)

    def _raw_abs_integral(self, a, b):
        return adaptive_simpson(lambda s: abs(float(self.func(s))), a, b)

    def sup(self):
        return float(self.bound)

    def timescale(self):
        return self.scale

    def to_dict(self):
        raise TypeError("function signals cannot be serialised")


SIGNAL_KINDS = {cls.kind: cls for cls in (Constant, Sinusoid, PiecewiseConstant, Tabulated, Telegraph)}


def signal_from_dict(d: dict) -> TimeSignal:
    """Inverse of ``TimeSignal.to_dict``."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in SIGNAL_KINDS:
        raise ValueError(f"unknown signal kind {kind!r}")
    window = d.pop("window", None)
    window = tuple(window) if window is not None else None
    if kind == "piecewise_constant":
        return PiecewiseConstant(tuple(d.pop("breakpoints")), tuple(d.pop("values")), window=window, **d)
    if kind == "telegraph":
        if "levels" in d:
            d["levels"] = tuple(d["levels"])
        return Telegraph(window=window if window is not None else (0.0, 1.0), **d)
    if kind == "tabulated":
        return Tabulated(tuple(d.pop("times")), tuple(d.pop("values")), window=window, **d)
    return SIGNAL_KINDS[kind](window=window, **d)
