"""k-local time-dependent Hamiltonians ``H(t) = sum_X signal_X(t) * B_X``.

Each term couples a fixed Hermitian operator ``B_X`` on a qubit subset ``X``
to a scalar :class:`~tdsim.signals.TimeSignal`. Models serialise to a JSON
tree::

    {"n_qubits": 2, "k": 2, "horizon": 1.0,
     "terms": [{"id": "a", "support": [0, 1], "base": "XX",
                "signal": {"kind": "sinusoid", "amplitude": 1.0,
                           "omega": 3.0, "phase": 0.0}}]}

``base`` is either a Pauli string (one letter per support qubit) or an
explicit matrix ``{"real": [[...]], "imag": [[...]]}``. An optional
``bound`` on a term declares its norm bound; it must dominate
``sup|signal| * ||base||``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import operators as ops
from .signals import TimeSignal, signal_from_dict


class ModelError(ValueError):
    """Invalid model description."""


@dataclass(frozen=True, eq=False)
class TimeDependentTerm:
    """One term ``signal(t) * base`` acting on ``support``."""

    id: str
    support: Tuple[int, ...]
    base: np.ndarray
    signal: TimeSignal
    label: Optional[str] = None  # Pauli string the base was built from, if any
    declared_bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(q) for q in self.support))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=complex))
        if self.base.shape != (1 << len(self.support),) * 2:
            raise ModelError(f"term {self.id!r}: base shape {self.base.shape} "
                             f"does not match support {self.support}")

    @classmethod
    def from_pauli(cls, id: str, support: Sequence[int], label: str,
                   signal: TimeSignal) -> "TimeDependentTerm":
        if len(label) != len(support):
            raise ModelError(f"term {id!r}: Pauli label {label!r} does not match support {support}")
        return cls(id, tuple(support), ops.pauli(label), signal, label=label.upper())

    @cached_property
    def base_norm(self) -> float:
        return ops.spectral_norm(self.base)

    @property
    def bound(self) -> float:
        """Declared bound E on ``||H_X(t)||``."""
        if self.declared_bound is not None:
            return float(self.declared_bound)
        return self.signal.sup() * self.base_norm

    def local(self, t) -> np.ndarray:
        """``H_X(t)`` on the term's own qubits; vectorised over ``t``."""
        s = np.asarray(self.signal(t))
        return s[..., None, None] * self.base

    def embedded_base(self, n_qubits: int) -> np.ndarray:
        return ops.embed(self.base, self.support, n_qubits)

    def to_dict(self) -> dict:
        d = {"id": self.id, "support": list(self.support)}
        if self.label is not None:
            d["base"] = self.label
        else:
            d["base"] = {"real": self.base.real.tolist(), "imag": self.base.imag.tolist()}
        d["signal"] = self.signal.to_dict()
        if self.declared_bound is not None:
            d["bound"] = self.declared_bound
        return d


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """Sum of k-local terms on ``n_qubits`` qubits, evolved over ``[0, horizon]``."""

    n_qubits: int
    terms: Tuple[TimeDependentTerm, ...]
    k: int
    horizon: float
    name: str = field(default="")
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "horizon", float(self.horizon))
        problems = check_model(self) if self.strict else []
        if problems:
            raise ModelError("; ".join(problems))

    @property
    def L(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def c_max(self) -> float:
        """Largest per-term norm bound."""
        return max((t.bound for t in self.terms), default=0.0)

    @cached_property
    def embedded_bases(self) -> np.ndarray:
        """Stack ``(L, dim, dim)`` of the terms' operators on the full register."""
        if not self.terms:
            return np.zeros((0, self.dim, self.dim), dtype=complex)
        return np.stack([t.embedded_base(self.n_qubits) for t in self.terms])

    def term(self, term_id: str) -> TimeDependentTerm:
        for t in self.terms:
            if t.id == term_id:
                return t
        raise KeyError(term_id)

    def subset(self, terms: Sequence[TimeDependentTerm]) -> "HamiltonianModel":
        return HamiltonianModel(self.n_qubits, tuple(terms), self.k, self.horizon, self.name)

    def to_dict(self) -> dict:
        d = {"n_qubits": self.n_qubits, "k": self.k, "horizon": self.horizon,
             "terms": [t.to_dict() for t in self.terms]}
        if self.name:
            d["name"] = self.name
        return d


def check_model(model: HamiltonianModel, herm_tol: float = ops.DEFAULT_TOL) -> list:
    """Return a list of human-readable problems (empty if the model is valid)."""
    problems = []
    if model.n_qubits < 1:
        problems.append(f"n_qubits must be >= 1, got {model.n_qubits}")
    if model.k < 1:
        problems.append(f"k must be >= 1, got {model.k}")
    if not model.horizon > 0:
        problems.append(f"horizon must be > 0, got {model.horizon}")
    seen = set()
    for t in model.terms:
        if t.id in seen:
            problems.append(f"term {t.id!r}: duplicate id")
        seen.add(t.id)
        if not t.id or any(c.isspace() for c in t.id):
            problems.append(f"term {t.id!r}: id must be non-empty without whitespace")
        if len(t.support) > model.k:
            problems.append(f"term {t.id!r}: support size {len(t.support)} exceeds k={model.k}")
        if any(q < 0 or q >= model.n_qubits for q in t.support):
            problems.append(f"term {t.id!r}: support {list(t.support)} out of range")
        if any(b <= a for a, b in zip(t.support, t.support[1:])):
            problems.append(f"term {t.id!r}: support must be strictly increasing")
        if not ops.is_hermitian(t.base, herm_tol):
            problems.append(f"term {t.id!r}: base operator is not Hermitian")
        if t.declared_bound is not None:
            natural = t.signal.sup() * t.base_norm
            if t.declared_bound < natural - 1e-12:
                problems.append(f"term {t.id!r}: declared bound {t.declared_bound} "
                                f"below sup|signal|*||base|| = {natural}")
        if not math.isfinite(t.bound):
            problems.append(f"term {t.id!r}: norm bound is not finite")
    return problems


def evaluate(model: HamiltonianModel, t) -> np.ndarray:
    """``H(t)`` on the full register; vectorised over ``t`` (leading axis)."""
    t_arr = np.asarray(t, dtype=float)
    if not model.terms:
        return np.zeros(t_arr.shape + (model.dim, model.dim), dtype=complex)
    coeffs = np.stack([np.asarray(term.signal(t_arr), dtype=float) for term in model.terms], axis=-1)
    return np.tensordot(coeffs, model.embedded_bases, axes=([-1], [0]))


def integrate_term(term: TimeDependentTerm, a: float, b: float) -> np.ndarray:
    """``int_a^b H_X(s) ds`` as an operator on the term's own qubits."""
    if b < a:
        raise ValueError("integrate_term requires a <= b")
    return term.signal.integral(a, b) * term.base


def model_norm_bound(model: HamiltonianModel) -> float:
    """Triangle-inequality bound ``sum_X E_X`` on ``sup_t ||H(t)||``."""
    return float(sum(t.bound for t in model.terms))


# ---------------------------------------------------------------- file format

def _base_from_json(spec, support, term_id):
    if isinstance(spec, str):
        if len(spec) != len(support):
            raise ModelError(f"term {term_id!r}: Pauli label {spec!r} does not match support {support}")
        return ops.pauli(spec), spec.upper()
    if isinstance(spec, dict) and "real" in spec:
        re = np.asarray(spec["real"], dtype=float)
        im = np.asarray(spec.get("imag", np.zeros_like(re)), dtype=float)
        return re + 1j * im, None
    raise ModelError(f"term {term_id!r}: base must be a Pauli string or {{real, imag}} matrix")


def model_from_dict(d: dict, strict: bool = True) -> HamiltonianModel:
    """Build a model from its JSON tree; ``strict=False`` skips :func:`check_model`."""
    try:
        terms = []
        for i, td in enumerate(d["terms"]):
            term_id = str(td.get("id", f"t{i}"))
            support = tuple(int(q) for q in td["support"])
            base, label = _base_from_json(td["base"], support, term_id)
            signal = signal_from_dict(td["signal"])
            bound = td.get("bound")
            terms.append(TimeDependentTerm(term_id, support, base, signal, label=label,
                                           declared_bound=None if bound is None else float(bound)))
        return HamiltonianModel(int(d["n_qubits"]), tuple(terms), int(d["k"]),
                                float(d["horizon"]), str(d.get("name", "")), strict=strict)
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed model description: {exc!r}") from exc


def load_model(path: Union[str, Path], strict: bool = True) -> HamiltonianModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh), strict=strict)


def save_model(model: HamiltonianModel, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")
