"""Command-line entry point: ``tdsim run|validate|census|plan``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__, counting
from .experiments import EXIT_FAIL, EXIT_OK, EXIT_PARSE, EXIT_RESOURCE, run_suite
from .hamiltonian import ModelError, check_model, load_model, model_norm_bound
from .scenarios import BUILTIN_MODELS, builtin_model
from .trotter import PlanningError, plan_decomposition


def _parse_k_range(text: str) -> List[int]:
    """``"2..12"`` or ``"2,4,8"``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(k) for k in text.split(",") if k]


def _load(ref: str, strict: bool = True):
    if ref in BUILTIN_MODELS and not Path(ref).exists():
        return builtin_model(ref)
    return load_model(ref, strict=strict)


def cmd_run(args) -> int:
    return run_suite(args.spec, Path(args.out), threads=args.threads, timing=args.timing)


def cmd_validate(args) -> int:
    try:
        model = _load(args.model, strict=False)
    except (ModelError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}")
        return EXIT_PARSE
    problems = check_model(model)
    for p in problems:
        print(f"invalid: {p}")
    if problems:
        return EXIT_PARSE
    print(f"L={model.L}, k={model.k}, n_qubits={model.n_qubits}, T={model.horizon:g}, "
          f"c_max={model.c_max:.17g}, norm_bound={model_norm_bound(model):.17g}")
    return EXIT_OK


def cmd_census(args) -> int:
    try:
        Ks = _parse_k_range(args.K)
        rows = counting.census(Ks, M=args.M, alpha=args.alpha, eps=args.eps)
        k_star = counting.crossover(args.M, args.alpha, args.eps)
    except ValueError as exc:
        print(f"error: {exc}")
        return EXIT_PARSE
    lines = ["K,log10_circuits,log10_ball_over_sphere,log10_fraction"]
    lines += [f"{r.K},{r.log10_circuits:.17g},{r.log10_ball_over_sphere:.17g},{r.log10_fraction:.17g}"
              for r in rows]
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)
    print(f"# decreasing in K for K >= {k_star} (M={args.M}, alpha={args.alpha:g}, eps={args.eps:g})")
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        model = _load(args.model)
        plan = plan_decomposition(model, args.epsilon, args.scheme)
    except (ModelError, OSError, json.JSONDecodeError, ValueError) as exc:
        code = EXIT_RESOURCE if isinstance(exc, PlanningError) else EXIT_PARSE
        print(f"error: {exc}")
        return code
    counts = counting.gate_counts(counting.CountingParams(c_max=model.c_max, T=model.horizon, L=model.L,
                                                          epsilon=args.epsilon, d_SK=args.d_sk,
                                                          c_SK=args.c_sk))
    print(f"scheme={plan.scheme} dt={plan.dt:.17g} n_bins={plan.n_bins} last_dt={plan.last_dt:.17g}")
    print(f"term_order={','.join(plan.term_order)} epsilon={plan.epsilon_target:g} G={plan.gate_count}")
    print(f"eps_G={counts.eps_G:.17g} G_tot={counts.G_tot:.17g} log10_G_tot={counts.log10_G_tot:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdsim", description=__doc__)
    p.add_argument("--version", action="version", version=f"tdsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment spec file or builtin spec")
    r.add_argument("spec")
    r.add_argument("--out", default="results", help="output directory (default: results)")
    r.add_argument("--threads", type=int, default=None, help="worker threads (default: $TDSIM_THREADS or 1)")
    r.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("census", help="log10 reachable-volume fractions")
    c.add_argument("--K", default="2..12", help="range 'a..b' or list 'a,b,c'")
    c.add_argument("--M", type=int, default=2)
    c.add_argument("--alpha", type=float, default=2.0)
    c.add_argument("--eps", type=float, default=0.1)
    c.add_argument("--csv", default=None)
    c.set_defaults(func=cmd_census)

    pl = sub.add_parser("plan", help="bin width and gate counts for a target accuracy")
    pl.add_argument("model")
    pl.add_argument("--epsilon", type=float, required=True)
    pl.add_argument("--scheme", default="hd_recursive", choices=("hd_recursive", "piecewise_constant"))
    pl.add_argument("--d-sk", type=float, default=1.0)
    pl.add_argument("--c-sk", type=float, default=2.0)
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
