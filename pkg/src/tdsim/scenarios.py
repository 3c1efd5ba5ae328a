"""Builtin models and the random 2-local generator.

Fixed scenarios ship as JSON model files in ``tdsim/data``; experiment
specs for the batch driver live in ``tdsim/data/specs``.
"""

from __future__ import annotations

import itertools
import json
import math
from importlib import resources
from typing import Dict, List

import numpy as np

from .hamiltonian import HamiltonianModel, TimeDependentTerm, model_from_dict
from .signals import Sinusoid, Telegraph

BUILTIN_MODELS = ("two_term_spin", "telegraph_pair", "ac_stark")
BUILTIN_SPECS = ("two_term_spin", "telegraph_pair", "ac_stark", "random_2local", "census")


def _data(*parts: str):
    path = resources.files("tdsim").joinpath("data")
    for part in parts:
        path = path.joinpath(part)
    return path


def builtin_model(name: str) -> HamiltonianModel:
    """Load one of :data:`BUILTIN_MODELS`."""
    if name not in BUILTIN_MODELS:
        raise KeyError(f"unknown builtin model {name!r}; choose from {BUILTIN_MODELS}")
    return model_from_dict(json.loads(_data(f"{name}.json").read_text()))


def builtin_spec(name: str) -> Dict:
    """The experiment spec shipped for builtin scenario ``name``."""
    if name not in BUILTIN_SPECS:
        raise KeyError(f"unknown builtin spec {name!r}; choose from {BUILTIN_SPECS}")
    return json.loads(_data("specs", f"{name}.json").read_text())


def random_2local(n: int, L: int, seed: int, *, horizon: float = 1.0,
                  telegraph_fraction: float = 0.5, max_rate: float = 100.0) -> HamiltonianModel:
    """Random model of ``L`` two-qubit Pauli terms on ``n`` qubits.

    Each term picks a qubit pair and a two-letter Pauli string uniformly, and
    either a sinusoid (amplitude in [0.2, 1], frequency in [1, 10]) or a
    two-level telegraph signal with levels +-amplitude and a switch rate up
    to ``max_rate / horizon``. Signals are windowed to ``[0, horizon]``.
    """
    if n < 2 or L < 1:
        raise ValueError("random_2local needs n >= 2 and L >= 1")
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(n), 2))
    window = (0.0, float(horizon))
    terms: List[TimeDependentTerm] = []
    for i in range(L):
        pair = pairs[rng.integers(len(pairs))]
        label = "".join(rng.choice(list("XYZ"), size=2))
        amp = float(rng.uniform(0.2, 1.0))
        if rng.uniform() < telegraph_fraction:
            rate = float(rng.uniform(1.0, max_rate)) / horizon
            sig = Telegraph(int(rng.integers(2**63)), rate, (-amp, amp), window)
        else:
            sig = Sinusoid(amp, float(rng.uniform(1.0, 10.0)) / horizon,
                           float(rng.uniform(0.0, 2 * math.pi)), window)
        terms.append(TimeDependentTerm.from_pauli(f"h{i}", pair, label, sig))
    return HamiltonianModel(n, tuple(terms), 2, horizon, name=f"random_2local({n},{L},{seed})")


def two_term_spin() -> HamiltonianModel:
    return builtin_model("two_term_spin")


def telegraph_pair() -> HamiltonianModel:
    return builtin_model("telegraph_pair")


def ac_stark() -> HamiltonianModel:
    return builtin_model("ac_stark")
