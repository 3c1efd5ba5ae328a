"""Experiment specs, sweep execution, CSV output and certification.

An experiment file is JSON holding one experiment object or
``{"name": ..., "experiments": [...]}``. Each experiment is::

    {"name": "hd_dt", "model": "two_term_spin", "scheme": "hd_split",
     "sweep": {"var": "dt", "values": [0.025, 0.05, 0.1]},
     "seeds": [0], "tolerances": {"oracle": 1e-10}, "params": {}, "output": "hd_dt.csv"}

``model`` is a builtin name, a model file path (relative to the spec file),
or ``{"generator": "random_2local", "n": 4, "L": 4}``; a generator without a
``seed`` is instantiated once per entry of ``seeds``.

``hd_split`` takes ``params.bound`` of ``"c12"`` (default, the quadrature
constant), ``"group"`` (``||H_1|| ||H_2||``) or ``"cap"`` (``c_max^2 / 2``,
which does not hold for every pair of terms).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import counting
from . import operators as ops
from .hamiltonian import HamiltonianModel, ModelError, load_model, model_norm_bound
from .propagator import ConvergenceError, default_tol, exact_evolve
from .randomized import McConfig, average_step, mc_average_step, randomized_product_formula, verify_avg_bound
from .scenarios import BUILTIN_MODELS, builtin_model, builtin_spec, random_2local
from .smoothing import SmoothingError, verify_decoupling
from .trotter import (PlanningError, evolve_plan, hd_recursive_decompose, hd_split_step,
                      piecewise_constant_evolve, plan_decomposition)

CSV_COLUMNS = ("scenario", "scheme", "sweep_var", "sweep_value", "seed", "measured_error",
               "analytic_bound", "oracle_tol", "gate_count", "wall_ms", "bound_ok")

# scheme -> allowed sweep variables
SCHEMES = {
    "hd_split": ("dt",),
    "hd_recursive": ("dt",),
    "piecewise_constant": ("dt",),
    "planned": ("epsilon",),
    "average": ("dt",),
    "mc_average": ("m",),
    "randomized": ("epsilon", "m"),
    "decoupling": ("sigma",),
    "census": ("K",),
}
STOCHASTIC = {"mc_average": 0.95, "randomized": 0.9}  # default pass quantiles

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_RESOURCE = 0, 1, 2, 3


class SpecError(ValueError):
    """Malformed experiment spec or model reference."""


class ResourceCapError(RuntimeError):
    """A computation hit a step, bin or memory cap."""


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    model: object            # builtin name, path, generator dict, or None for census
    scheme: str
    sweep_var: str
    values: Tuple[float, ...]
    seeds: Tuple[int, ...] = ()
    tolerances: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)
    output: Optional[str] = None
    base_dir: Path = Path(".")

    @property
    def stochastic(self) -> bool:
        return self.scheme in STOCHASTIC


@dataclass(frozen=True)
class Row:
    scenario: str
    scheme: str
    sweep_var: str
    sweep_value: float
    seed: Optional[int]
    measured_error: float
    analytic_bound: Optional[float]
    oracle_tol: Optional[float]
    gate_count: Optional[int]
    wall_ms: Optional[float] = None

    @property
    def bound_ok(self) -> Optional[bool]:
        if self.analytic_bound is None:
            return None
        return self.measured_error <= self.analytic_bound + (self.oracle_tol or 0.0)

    def cells(self) -> List[str]:
        return [self.scenario, self.scheme, self.sweep_var, _fmt(self.sweep_value), _fmt(self.seed),
                _fmt(self.measured_error), _fmt(self.analytic_bound), _fmt(self.oracle_tol),
                _fmt(self.gate_count), _fmt(self.wall_ms), _fmt(self.bound_ok)]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


# ------------------------------------------------------------------ parsing

def _positive_sorted(values, var) -> Tuple[float, ...]:
    if not isinstance(values, list) or not values:
        raise SpecError(f"sweep over {var!r} needs a non-empty list of values")
    try:
        vals = tuple(int(v) if var in ("m", "K") else float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"sweep values must be numbers: {exc}") from exc
    if var in ("m", "K") and any(float(v) != int(v) for v in values):
        raise SpecError(f"sweep over {var!r} needs integer values")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise SpecError("sweep values must be positive and finite")
    if list(vals) != sorted(vals):
        raise SpecError("sweep values must be sorted ascending")
    return vals


def _tolerances(d: dict) -> Dict[str, float]:
    try:
        out = {k: float(v) for k, v in d.items()}
    except (TypeError, ValueError) as exc:
        raise SpecError(f"tolerances must be numbers: {exc}") from exc
    if any(not (math.isfinite(v) and v >= 0) for v in out.values()):
        raise SpecError("tolerances must be finite and non-negative")
    return out


def parse_experiment(d: dict, base_dir: Path = Path("."), default_name: str = "experiment") -> ExperimentSpec:
    if not isinstance(d, dict):
        raise SpecError("experiment must be a JSON object")
    scheme = d.get("scheme")
    if scheme not in SCHEMES:
        raise SpecError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    sweep = d.get("sweep")
    if not isinstance(sweep, dict):
        raise SpecError("experiment needs a 'sweep' object with 'var' and 'values'")
    var = sweep.get("var")
    if var not in SCHEMES[scheme]:
        raise SpecError(f"scheme {scheme!r} sweeps over {SCHEMES[scheme]}, not {var!r}")
    values = _positive_sorted(sweep.get("values"), var)
    seeds = d.get("seeds", [])
    if not isinstance(seeds, list) or any(not isinstance(s, int) or isinstance(s, bool) for s in seeds):
        raise SpecError("'seeds' must be a list of integers")
    model = d.get("model")
    needs_seed = scheme in STOCHASTIC or (isinstance(model, dict) and "seed" not in model)
    if needs_seed and not seeds:
        raise SpecError(f"experiment {d.get('name', default_name)!r} needs at least one seed")
    if scheme != "census" and model is None:
        raise SpecError("experiment needs a 'model'")
    tolerances = d.get("tolerances", {})
    params = d.get("params", {})
    if not isinstance(tolerances, dict) or not isinstance(params, dict):
        raise SpecError("'tolerances' and 'params' must be objects")
    return ExperimentSpec(name=str(d.get("name", default_name)), model=model, scheme=scheme,
                          sweep_var=var, values=values, seeds=tuple(seeds),
                          tolerances=_tolerances(tolerances),
                          params=dict(params), output=d.get("output"), base_dir=base_dir)


def parse_spec(d: dict, base_dir: Path = Path(".")) -> Tuple[str, List[ExperimentSpec]]:
    """Return ``(suite name, experiments)`` from a spec JSON tree."""
    if not isinstance(d, dict):
        raise SpecError("spec must be a JSON object")
    if "experiments" in d:
        name = str(d.get("name", "suite"))
        exps = d["experiments"]
        if not isinstance(exps, list) or not exps:
            raise SpecError("'experiments' must be a non-empty list")
        return name, [parse_experiment(e, base_dir, f"{name}_{i}") for i, e in enumerate(exps)]
    exp = parse_experiment(d, base_dir)
    return exp.name, [exp]


def load_spec(ref: str) -> Tuple[str, List[ExperimentSpec]]:
    """Parse a spec file, or a builtin spec when ``ref`` names one and is not a file."""
    path = Path(ref)
    try:
        if path.is_file():
            with open(path) as fh:
                tree = json.load(fh)
            return parse_spec(tree, path.parent)
        return parse_spec(builtin_spec(ref))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{ref}: invalid JSON: {exc}") from exc
    except KeyError as exc:
        raise SpecError(f"{ref!r} is neither a spec file nor a builtin spec") from exc


def resolve_model(exp: ExperimentSpec, seed: Optional[int]) -> Tuple[str, HamiltonianModel]:
    ref = exp.model
    try:
        if isinstance(ref, dict):
            if ref.get("generator") != "random_2local":
                raise SpecError(f"unknown model generator {ref.get('generator')!r}")
            n, L = int(ref["n"]), int(ref["L"])
            s = int(ref.get("seed", seed))
            kwargs = {k: ref[k] for k in ("horizon", "telegraph_fraction", "max_rate") if k in ref}
            return f"random_2local({n},{L})", random_2local(n, L, s, **kwargs)
        if isinstance(ref, str):
            if ref in BUILTIN_MODELS:
                return ref, builtin_model(ref)
            path = exp.base_dir / ref
            return (Path(ref).stem, load_model(path))
    except (ModelError, OSError, KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"cannot load model {ref!r}: {exc}") from exc
    raise SpecError(f"bad model reference {ref!r}")


# ------------------------------------------------------------------ runners

def _oracle_tol(exp, model) -> float:
    return float(exp.tolerances.get("oracle", default_tol(model.dim)))


# which constant multiplies dt**2 in the certified split bound
_SPLIT_BOUNDS = {"c12": "bound", "cap": "c12_cap", "group": "c12_group_cap"}


def _run_hd_split(exp, model, dt, seed):
    if model.L < 2:
        raise SpecError("hd_split needs at least two terms")
    tol = _oracle_tol(exp, model)
    t0 = float(exp.params.get("t", 0.0))
    which = exp.params.get("bound", "c12")
    if which not in _SPLIT_BOUNDS:
        raise SpecError(f"hd_split bound must be one of {sorted(_SPLIT_BOUNDS)}, not {which!r}")
    _, rep = hd_split_step(model.terms[0], list(model.terms[1:]), t0, dt, tol, n_qubits=model.n_qubits)
    bound = getattr(rep, _SPLIT_BOUNDS[which]) * (1.0 if which == "c12" else dt * dt)
    return rep.measured_error, bound, float(exp.tolerances.get("slack", 1e-9)), 2


def _run_hd_recursive(exp, model, dt, seed):
    tol = _oracle_tol(exp, model)
    t0 = float(exp.params.get("t", 0.0))
    _, rep = hd_recursive_decompose(model, t0, dt, tol)
    return rep.measured_error, rep.accumulated_bound, tol, model.L


def _exact_full(model, tol):
    return exact_evolve(model, 0.0, model.horizon, tol)


def _run_piecewise(exp, model, dt, seed):
    tol = _oracle_tol(exp, model)
    u = piecewise_constant_evolve(model, dt)
    n_bins = max(1, math.ceil(model.horizon / dt - 1e-9))
    return ops.spectral_norm(u - _exact_full(model, tol)), None, tol, n_bins * model.L


def _run_planned(exp, model, eps, seed):
    tol = _oracle_tol(exp, model)
    plan = plan_decomposition(model, eps, str(exp.params.get("plan_scheme", "hd_recursive")))
    u = evolve_plan(model, plan, tol)
    return ops.spectral_norm(u - _exact_full(model, tol)), 0.5 * eps, tol, plan.gate_count


def _run_average(exp, model, dt, seed):
    tol = _oracle_tol(exp, model)
    rep = verify_avg_bound(model, float(exp.params.get("t", 0.0)), dt, tol)
    return rep.measured, rep.bound, tol, model.L


def _run_mc_average(exp, model, m, seed):
    dt = float(exp.params.get("dt", 0.1))
    t0 = float(exp.params.get("t", 0.0))
    cfg = McConfig(m=int(m), seed=seed, dt=dt, shared_times=bool(exp.params.get("shared_times", False)))
    diff = ops.spectral_norm(mc_average_step(model, t0, dt, cfg) - average_step(model, t0, dt))
    bound = 2.0 * dt * model_norm_bound(model) / math.sqrt(m)
    return diff, bound, 1e-12, int(m) * model.L


def _run_randomized(exp, model, value, seed):
    tol = _oracle_tol(exp, model)
    if exp.sweep_var == "epsilon":
        eps, m = value, int(exp.params.get("m", 16))
    else:
        eps, m = float(exp.params.get("epsilon", 0.1)), int(value)
    plan = plan_decomposition(model, eps)
    cfg = McConfig(m=m, seed=seed, dt=plan.dt, n_bins=plan.n_bins,
                   shared_times=bool(exp.params.get("shared_times", False)))
    u, gates = randomized_product_formula(model, cfg)
    return ops.spectral_norm(u - _exact_full(model, tol)), eps, tol, len(gates)


def _run_decoupling(exp, model, sigma, seed):
    tol = _oracle_tol(exp, model)
    if exp.params.get("relative", False):
        sigma = sigma * model.horizon
    rep = verify_decoupling(model, sigma, tol)
    return rep.measured, rep.bound, rep.oracle_tol, None


RUNNERS: Dict[str, Callable] = {
    "hd_split": _run_hd_split,
    "hd_recursive": _run_hd_recursive,
    "piecewise_constant": _run_piecewise,
    "planned": _run_planned,
    "average": _run_average,
    "mc_average": _run_mc_average,
    "randomized": _run_randomized,
    "decoupling": _run_decoupling,
}


def _census_row(exp, K) -> Row:
    M = int(exp.params.get("M", 2))
    alpha = float(exp.params.get("alpha", 2.0))
    eps = float(exp.params.get("eps", 0.1))
    closed = counting.volume_fraction(counting.CountingParams(K=K, alpha=alpha, M=M, eps=eps))
    direct = (counting.log10_circuits(K, M, alpha)
              + (counting.log_ball_volume(K, eps) - counting.log_sphere_area(K)) / math.log(10.0))
    return Row("census", "census", "K", K, None, closed, direct,
               float(exp.tolerances.get("oracle", 1e-9)), None)


def _tasks(exp: ExperimentSpec):
    fixed_model = not (isinstance(exp.model, dict) and "seed" not in exp.model)
    seeds = exp.seeds if (exp.stochastic or not fixed_model) else (None,)
    return [(v, s) for v in exp.values for s in seeds]


def run_experiment(exp: ExperimentSpec, threads: int = 1, timing: bool = False) -> List[Row]:
    """Evaluate every (sweep value, seed) pair; rows come back in that order."""
    if exp.scheme == "census":
        return [_census_row(exp, int(K)) for K in exp.values]
    runner = RUNNERS[exp.scheme]
    models: Dict[Optional[int], Tuple[str, HamiltonianModel]] = {}
    for _, s in _tasks(exp):
        if s not in models:
            models[s] = resolve_model(exp, s)

    def work(task):
        value, seed = task
        name, model = models[seed]
        t0 = time.perf_counter()
        try:
            measured, bound, tol, gates = runner(exp, model, value, seed)
        except (ConvergenceError, PlanningError, MemoryError) as exc:
            raise ResourceCapError(f"{exp.name}: {exp.sweep_var}={value}: {exc}") from exc
        except SmoothingError as exc:
            raise SpecError(f"{exp.name}: {exc}") from exc
        wall = 1e3 * (time.perf_counter() - t0) if timing else None
        return Row(name, exp.scheme, exp.sweep_var, value, seed, float(measured),
                   None if bound is None else float(bound), tol, gates, wall)

    tasks = _tasks(exp)
    if threads <= 1:
        return [work(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, tasks))


def rows_to_csv(rows: List[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


# ------------------------------------------------------------ certification

@dataclass(frozen=True)
class Check:
    passed: bool
    line: str


def certify(exp: ExperimentSpec, rows: List[Row]) -> List[Check]:
    """One check per deterministic row with a bound, or per sweep value for stochastic schemes."""
    checks = []
    if exp.scheme == "census":
        for r in rows:
            ok = abs(r.measured_error - r.analytic_bound) <= r.oracle_tol
            checks.append(Check(ok, f"census K={r.sweep_value} log10_fraction={r.measured_error:.6f} "
                                    f"log_gamma={r.analytic_bound:.6f}"))
        return checks
    if exp.stochastic:
        quantile = float(exp.tolerances.get("quantile", STOCHASTIC[exp.scheme]))
        for v in exp.values:
            group = [r for r in rows if r.sweep_value == v]
            rate = float(np.mean([bool(r.bound_ok) for r in group]))
            med = float(np.median([r.measured_error for r in group]))
            checks.append(Check(rate >= quantile,
                                f"{group[0].scenario} {exp.scheme} {exp.sweep_var}={_short(v)} "
                                f"pass_rate={rate:.3f} (need {quantile:g}) median={med:.3e} "
                                f"bound={group[0].analytic_bound:.3e}"))
        return checks
    for r in rows:
        seed = "" if r.seed is None else f" seed={r.seed}"
        if r.bound_ok is None:
            continue
        checks.append(Check(bool(r.bound_ok), f"{r.scenario} {exp.scheme} {exp.sweep_var}={_short(r.sweep_value)}"
                                              f"{seed} measured={r.measured_error:.3e} bound={r.analytic_bound:.3e}"))
    return checks


def _short(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TDSIM_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(ref: str, out_dir: Path, threads: Optional[int] = None, timing: bool = False,
              echo: Callable[[str], None] = print) -> int:
    """Run every experiment in a spec; write CSVs and a summary; return the exit status."""
    try:
        name, exps = load_spec(ref)
    except SpecError as exc:
        echo(f"error: {exc}")
        return EXIT_PARSE
    threads = default_threads() if threads is None else threads
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines, all_ok = [], True
    for exp in exps:
        try:
            rows = run_experiment(exp, threads, timing)
        except SpecError as exc:
            echo(f"error: {exc}")
            return EXIT_PARSE
        except ResourceCapError as exc:
            echo(f"resource cap: {exc}")
            return EXIT_RESOURCE
        csv_path = out_dir / (exp.output or f"{exp.name}.csv")
        csv_path.write_text(rows_to_csv(rows))
        for chk in certify(exp, rows):
            all_ok &= chk.passed
            lines.append(f"{'PASS' if chk.passed else 'FAIL'}  {chk.line}")
        lines.append(f"wrote {csv_path}")
    verdict = "ALL PASS" if all_ok else "CERTIFICATION FAILED"
    lines.append(verdict)
    (out_dir / f"{name}_summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        echo(line)
    return EXIT_OK if all_ok else EXIT_FAIL
