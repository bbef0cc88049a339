"""Command-line front end.

Subcommands: validate-method, integrate, converge, work-precision,
stability, optimize-explicit.  Exit codes: 0 success, 1 validation
failure, 2 runtime failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (StudySpec, build_problem, emit_stability,
                      run_convergence, run_workprecision, starter_config,
                      write_study_csv, _fmt)
from .integrator import IntegrationError, ark_integrate, integrate
from .methods import bundled_ark_path, resolve_method, ImexRkMethod
from .problems import ReferenceFailureError, l2_error, reference_solution
from .stability import StabilityQuery, constrained_region_area, optimize_explicit_component
from .tableau import ImexGlmMethod, save_method, validate_method

USAGE_EXIT = 64
_ARK_ALIASES = {"ark4": 4, "ark5": 5}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


def _resolve(name: str):
    if name in _ARK_ALIASES:
        return resolve_method(str(bundled_ark_path(_ARK_ALIASES[name])))
    return resolve_method(name)


def _build_parser() -> _Parser:
    p = _Parser(prog="imexglm",
                description="IMEX general linear method toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, problem=False, steps=False):
        sp.add_argument("--method", default="dimsim4",
                        help="dimsim4 | dimsim5 | imex-euler | ark4 | ark5 "
                             "| path to a method file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output file or directory")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if problem:
            sp.add_argument("--problem", default="allen-cahn",
                            choices=("allen-cahn", "burgers", "dahlquist"))
            sp.add_argument("--grid-n", type=int, default=None,
                            help="interior grid resolution for PDE problems")
            sp.add_argument("--alpha", type=float, default=None,
                            help="Allen-Cahn diffusion coefficient")
            sp.add_argument("--n-ref", type=int, default=None,
                            help="reference RK4 step count")
            sp.add_argument("--tau-ratio", type=float, default=0.5,
                            help="starting micro-step as a fraction of h")
            sp.add_argument("--starter", default="auto",
                            help="auto | imex-euler | path to an ARK file")
        if steps:
            sp.add_argument("--steps", default="25,50,100,200",
                            help="comma-separated step counts")

    common(sub.add_parser("validate-method", help="run tableau checks"))
    common(sub.add_parser("integrate", help="single integration run"),
           problem=True, steps=True)
    common(sub.add_parser("converge", help="convergence study"),
           problem=True, steps=True)
    common(sub.add_parser("work-precision", help="timed accuracy study"),
           problem=True, steps=True)
    sp = sub.add_parser("stability", help="export stability-region files")
    common(sp)
    sp.add_argument("--workers", type=int, default=None)
    sp = sub.add_parser("optimize-explicit",
                        help="search explicit coefficients for pair area")
    common(sp)
    sp.add_argument("--budget", type=int, default=2000,
                    help="stability-area evaluation budget")
    return p


def _parse_steps(text) -> tuple:
    try:
        steps = tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        sys.stderr.write(f"error: bad --steps value {text!r}\n")
        raise SystemExit(USAGE_EXIT)
    return steps


def _study_spec(args, require_orders=True) -> StudySpec:
    params = {}
    if getattr(args, "grid_n", None) is not None:
        params["n"] = args.grid_n
    if getattr(args, "alpha", None) is not None and args.problem == "allen-cahn":
        params["alpha"] = args.alpha
    return StudySpec(problem=args.problem, methods=(args.method,),
                     steps=_parse_steps(args.steps), problem_params=params,
                     n_ref=args.n_ref, tau_ratio=args.tau_ratio,
                     starter=args.starter, out=args.out, seed=args.seed,
                     require_orders=require_orders)


def _cmd_validate(args) -> int:
    try:
        m = _resolve(args.method)
    except (ValueError, OSError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 1
    if isinstance(m, ImexRkMethod):
        # loader already enforced shape/abscissa consistency
        print(f"{m.name}: additive RK pair, {m.sigma} stages, "
              f"row sums match abscissae")
        return 0
    report = validate_method(m)
    print(report.summary())
    return 0 if report.passed else 1


def _cmd_integrate(args) -> int:
    spec = _study_spec(args, require_orders=False)
    prob = build_problem(spec)
    m = _resolve(args.method)
    N = spec.steps[0]
    if isinstance(m, ImexRkMethod):
        res = ark_integrate(m, prob, N)
    else:
        res = integrate(m, prob, N, start=starter_config(spec, m))
    row = {"method": args.method, "problem": args.problem, "N": N,
           "h": res.h, "t": res.t}
    if args.n_ref is not None:
        ref = reference_solution(prob, args.n_ref)
        row["error_vs_reference"] = l2_error(res.y, ref)
    elif prob.exact is not None:
        t_score = res.t_readout if res.t_readout is not None else res.t
        row["error_vs_exact"] = l2_error(res.y, prob.exact(t_score))
    print(json.dumps(row, indent=2, default=float))
    if args.out:
        np.savetxt(args.out, res.y, header=f"{args.method} {args.problem} N={N}")
    return 0


def _print_convergence(studies, fmt, out):
    payload = []
    for st in studies:
        print(f"# {st.method} on {st.problem}  "
              f"(least-squares slope: "
              f"{'n/a' if st.slope is None else f'{st.slope:.3f}'})")
        for line in st.csv_lines():
            print(line)
        payload.append({
            "method": st.method, "problem": st.problem, "slope": st.slope,
            "rows": [{"N": r.N, "h": r.h, "error": r.error,
                      "pairwise_order": r.pairwise_order,
                      "failure": r.failure} for r in st.rows]})
    if out and fmt == "json":
        Path(out).write_text(json.dumps(payload, indent=2, default=float) + "\n")
    elif out:
        write_study_csv(studies, out, "convergence")


def _cmd_converge(args) -> int:
    spec = _study_spec(args)
    studies = run_convergence(spec)
    _print_convergence(studies, args.format, args.out)
    return 0


def _cmd_workprecision(args) -> int:
    spec = _study_spec(args)
    studies = run_workprecision(spec)
    payload = []
    for st in studies:
        print(f"# {st.method} on {st.problem}")
        for line in st.csv_lines():
            print(line)
        for r in st.rows:
            if r.start_seconds is not None:
                print(f"# starter N={r.N}: {r.start_seconds:.6f}s")
        payload.append({
            "method": st.method, "problem": st.problem,
            "rows": [{"N": r.N, "h": r.h, "seconds": r.seconds,
                      "error": r.error, "start_seconds": r.start_seconds,
                      "failure": r.failure} for r in st.rows]})
    if args.out and args.format == "json":
        Path(args.out).write_text(json.dumps(payload, indent=2, default=float) + "\n")
    elif args.out:
        write_study_csv(studies, args.out, "work-precision")
    return 0


def _cmd_stability(args) -> int:
    m = _resolve(args.method)
    if isinstance(m, ImexRkMethod):
        raise IntegrationError("stability export needs a GLM method")
    out_dir = Path(args.out) if args.out else Path(f"stability_{m.name}")
    report = emit_stability(m, StabilityQuery(), out_dir, workers=args.workers)
    print(json.dumps(report, indent=2, default=float))
    print(f"# files written to {out_dir}", file=sys.stderr)
    return 0


def _cmd_optimize(args) -> int:
    m = _resolve(args.method)
    if not isinstance(m, ImexGlmMethod):
        raise IntegrationError("optimizer needs a GLM method")
    # coarse query keeps a 2000-evaluation budget within minutes
    q = StabilityQuery(stiff_magnitudes=(0.0, 1e-2, 1.0, 100.0),
                       n_angles=9, tol=5e-3, y_top=8.0, n_lines=12)
    result = optimize_explicit_component(
        m.implicit, np.asarray(m.c), np.asarray(m.v), q,
        budget=args.budget, seed_matrix=np.asarray(m.A), rng_seed=args.seed)
    print(json.dumps({
        "method": m.name, "seed_area": result.seed_area, "area": result.area,
        "n_evaluations": result.n_evaluations, "failed": result.failed},
        indent=2, default=float))
    if args.out and result.method is not None:
        save_method(result.method, args.out)
        print(f"# optimized method written to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "validate-method": _cmd_validate,
    "integrate": _cmd_integrate,
    "converge": _cmd_converge,
    "work-precision": _cmd_workprecision,
    "stability": _cmd_stability,
    "optimize-explicit": _cmd_optimize,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, IntegrationError, ReferenceFailureError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
