"""``sclopt`` command line.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 solver did
not converge, 4 verification found violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_VIOLATION = 0, 1, 2, 3, 4
SOLVER_NAMES = ("prox-grad", "prox-newton", "prox-bfgs")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_problem_args(p, allow_many=False):
    src = p.add_mutually_exclusive_group(required=True)
    nargs = "+" if allow_many else None
    src.add_argument("--dataset", nargs=nargs, metavar="PATH",
                     help="LIBSVM file(s)")
    src.add_argument("--synthetic", nargs=nargs, metavar="KIND[:AxB]",
                     help="synthetic instance: logistic:NxP, multinomial:NxPxK or gp:NxM")
    p.add_argument("--problem", choices=("logistic", "multinomial"), default=None,
                   help="loss for --dataset (default: logistic for binary labels, "
                        "multinomial otherwise)")
    p.add_argument("--g", choices=("l1", "none"), default="l1", help="nonsmooth term")
    p.add_argument("--rho", type=float, default=None,
                   help="l1 weight (default 0.1 for logistic, 0.01 for multinomial, "
                        "1 for gp); logistic applies rho/sqrt(N)")
    p.add_argument("--no-bias", action="store_true", help="omit the logistic intercept")
    p.add_argument("--sound-mf", action="store_true",
                   help="multinomial: use sqrt(6) max||w|| as M_f (no 1/N factor)")
    p.add_argument("--seed", type=int, default=0, help="random seed")


def _add_solver_args(p):
    from .solvers import SolverOptions

    d = SolverOptions()
    p.add_argument("--eps", type=float, default=d.epsilon, help="termination tolerance")
    p.add_argument("--max-iter", type=int, default=d.max_iterations, help="iteration cap")
    p.add_argument("--sigma", type=float, default=None,
                   help="prox-newton phase threshold (default: log(4/3) times a "
                        f"{d.lanczos_iterations}-step Lanczos estimate of sigma_min)")
    p.add_argument("--shrink", type=float, default=d.metric_shrink_factor,
                   help="metric shrink factor in (0, 1)")
    p.add_argument("--max-shrinks", type=int, default=d.max_shrinks_per_iteration,
                   help="shrinks allowed per iteration")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="sclopt", description="Composite optimisation with "
                     "self-concordant-like smooth terms.", formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem", formatter_class=fmt)
    _add_problem_args(s)
    _add_solver_args(s)
    s.add_argument("--solver", choices=SOLVER_NAMES, default="prox-newton")
    s.add_argument("--out-dir", default=".", help="where run.jsonl, trace.csv and "
                   "convergence.svg are written")
    s.add_argument("--no-plot", action="store_true", help="skip the convergence figure")

    v = sub.add_parser("verify", help="certify the SCL inequality on samples",
                       formatter_class=fmt)
    _add_problem_args(v)
    v.add_argument("--oracle", choices=("logistic", "multinomial", "expsum"), default=None,
                   help="oracle to check (must match the problem source)")
    v.add_argument("--samples", type=int, default=500, help="samples per check")
    v.add_argument("--radius", type=float, default=2.0, help="sampling ball radius")
    v.add_argument("--out-dir", default=".", help="where verify.json is written")

    b = sub.add_parser("bench", help="run the solver x problem matrix", formatter_class=fmt)
    _add_problem_args(b, allow_many=True)
    _add_solver_args(b)
    b.add_argument("--solvers", nargs="+", choices=SOLVER_NAMES, default=list(SOLVER_NAMES))
    b.add_argument("--instances", type=int, default=1,
                   help="seeds per synthetic spec (seed, seed+1, ...)")
    b.add_argument("--workers", type=int, default=None,
                   help="worker threads (capped by SCLOPT_THREADS)")
    b.add_argument("--out", default="runs.jsonl", help="run record file")

    pr = sub.add_parser("profile", help="performance profile from run records",
                        formatter_class=fmt)
    pr.add_argument("--in", dest="inp", required=True, help="run record JSONL")
    pr.add_argument("--out", required=True, help="profile CSV (SVG written alongside)")
    pr.add_argument("--metric", choices=("seconds", "prox_calls", "iters"), default="seconds")
    pr.add_argument("--tau-max", type=float, default=None,
                    help="also evaluate the profile at this tau")
    return parser


# ---------------------------------------------------------------------------


def _load_problem(args, path=None, synthetic=None, seed=None):
    from .bench import load_libsvm, parse_synthetic
    from .core import ProblemInstance
    from .oracles import LogisticData, MultinomialData, logistic_problem, multinomial_problem
    from .prox import ZeroTerm

    seed = args.seed if seed is None else seed
    try:
        if synthetic is not None:
            p = parse_synthetic(synthetic, seed=seed, rho=args.rho,
                                sound_constant=args.sound_mf)
        else:
            ds = load_libsvm(path)
            if ds.n_samples == 0:
                raise DataError(f"{path}: no samples")
            X = ds.to_csr()
            kind = args.problem or ("logistic" if ds.is_binary() else "multinomial")
            name = os.path.splitext(os.path.basename(path))[0]
            if kind == "logistic":
                if not ds.is_binary():
                    raise DataError(f"{path}: logistic loss needs labels in {{-1, +1}}")
                data = LogisticData(X, ds.labels, not args.no_bias)
                p = logistic_problem(data, 0.1 if args.rho is None else args.rho, name)
            else:
                labels = ds.labels
                if not np.all(labels == np.round(labels)):
                    raise DataError(f"{path}: multinomial loss needs integer labels")
                _, cls = np.unique(labels, return_inverse=True)
                if cls.max() < 1:
                    raise DataError(f"{path}: need at least two classes")
                p = multinomial_problem(MultinomialData.from_classes(X, cls),
                                        0.01 if args.rho is None else args.rho, name,
                                        sound_constant=args.sound_mf)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    if args.g == "none":
        p = ProblemInstance(p.oracle, ZeroTerm(p.dimension), p.name)
    return p


def _options(args):
    from .solvers import SolverOptions

    try:
        return SolverOptions(epsilon=args.eps, max_iterations=args.max_iter,
                             sigma_override=args.sigma, metric_shrink_factor=args.shrink,
                             max_shrinks_per_iteration=args.max_shrinks, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise DataError(f"output directory {path} is not writable")


def cmd_solve(args, out):
    from .bench import run_one, write_records, write_trace_csv
    from .plotting import convergence_figure

    p = _load_problem(args, args.dataset, args.synthetic)
    opts = _options(args)
    _ensure_dir(args.out_dir)
    x, trace, rec = run_one(p, args.solver, opts)
    write_records(os.path.join(args.out_dir, "run.jsonl"), [rec])
    if trace is not None:
        write_trace_csv(os.path.join(args.out_dir, "trace.csv"), trace)
        if not args.no_plot and trace.records:
            convergence_figure(trace, os.path.join(args.out_dir, "convergence.svg"),
                               title=f"{args.solver} on {p.name}")
    print(f"problem     {p.name}", file=out)
    print(f"solver      {args.solver}", file=out)
    print(f"status      {rec.status}", file=out)
    print(f"F           {rec.final_F!r}", file=out)
    print(f"residual    {rec.residual!r}", file=out)
    print(f"iterations  {rec.iters}", file=out)
    print(f"prox_calls  {rec.prox_calls}", file=out)
    return EXIT_OK if rec.converged else EXIT_SOLVER


def cmd_verify(args, out):
    from .oracles import ExpSumOracle, LogisticOracle, MultinomialOracle
    from .verify import verify_oracle

    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    p = _load_problem(args, args.dataset, args.synthetic)
    expected = {"logistic": LogisticOracle, "multinomial": MultinomialOracle,
                "expsum": ExpSumOracle}
    if args.oracle and not isinstance(p.oracle, expected[args.oracle]):
        raise UsageError(f"--oracle {args.oracle} does not match the problem "
                         f"({type(p.oracle).__name__})")
    _ensure_dir(args.out_dir)
    res = verify_oracle(p.oracle, samples=args.samples, radius=args.radius, seed=args.seed)
    report = {"problem": p.name, "oracle": type(p.oracle).__name__, "M_f": p.oracle.M_f,
              "samples": args.samples, "radius": args.radius, "seed": args.seed,
              **res.as_dict()}
    from .bench.records import atomic_write_text
    atomic_write_text(os.path.join(args.out_dir, "verify.json"),
                      json.dumps(report, sort_keys=True, indent=1) + "\n")
    for part in ("definition", "pair_bounds"):
        r = getattr(res, part)
        print(f"{part:<11} samples={r.samples} violations={r.violations} "
              f"skipped={r.skipped} worst_margin={r.worst_margin:.3e}", file=out)
    return EXIT_OK if res.ok else EXIT_VIOLATION


def cmd_bench(args, out):
    from .bench import run_matrix

    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    problems = []
    if args.dataset:
        problems = [_load_problem(args, path=pth) for pth in args.dataset]
    else:
        for spec in args.synthetic:
            for i in range(args.instances):
                problems.append(_load_problem(args, synthetic=spec, seed=args.seed + i))
    opts = _options(args)
    folder = os.path.dirname(os.path.abspath(args.out))
    _ensure_dir(folder)
    try:
        recs = run_matrix(problems, tuple(args.solvers), opts, out_path=args.out,
                          workers=args.workers)
    except ValueError as exc:  # bad SCLOPT_THREADS
        raise UsageError(str(exc)) from exc
    failed = [r for r in recs if not r.converged]
    for r in recs:
        print(f"{r.problem:<28} {r.solver:<12} iters={r.iters:<6} "
              f"prox={r.prox_calls:<7} converged={r.converged}", file=out)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_profile(args, out):
    from .bench import ProfileTable, performance_profile, read_records
    from .bench.profile import default_tau_grid
    from .bench.records import atomic_write_text
    from .plotting import profile_figure

    try:
        recs = read_records(args.inp)
        if not recs:
            raise DataError(f"{args.inp}: no run records")
        table = ProfileTable.from_records(recs, metric=args.metric)
        tau = default_tau_grid(table)
        if args.tau_max is not None and args.tau_max > tau[-1]:
            tau = np.append(tau, args.tau_max)
        res = performance_profile(table, tau)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    folder = os.path.dirname(os.path.abspath(args.out))
    _ensure_dir(folder)
    atomic_write_text(args.out, res.to_csv())
    svg = os.path.splitext(args.out)[0] + ".svg"
    profile_figure(res, svg, title=f"performance profile ({args.metric})")
    for name in res.rho:
        print(f"{name:<12} rho(0)={res.rho[name][0]:.3f} "
              f"rho(max)={res.rho[name][-1]:.3f}", file=out)
    if res.dropped:
        print("dropped (all solvers failed): " + ", ".join(res.dropped), file=out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench,
            "profile": cmd_profile}


def run_command(argv=None, out=None) -> int:
    """Parse ``argv`` and run the command; returns the exit code."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sclopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"sclopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sclopt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, RuntimeError) as exc:
        print(f"sclopt: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
