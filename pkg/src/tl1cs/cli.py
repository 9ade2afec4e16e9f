"""Command-line interface: ``tl1cs <command> ...`` (or ``python -m tl1cs``).

Failures print one JSON line ``{"error": <kind>, "message": <text>}`` on
stderr. Exit status is 0 on success, 2 for usage or configuration errors
and 1 for anything else.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .analysis import check_condition2, estimate_rip
from .formats import FormatError, read_matrix, read_problem, read_vector, write_problem, write_problem_csv, write_vector
from .sensing import EnsembleSpec, SignalSpec, make_problem
from .solver import MODELS, SolveOptions, solve

log = logging.getLogger("tl1cs")

TABLE1_DEFAULT_F = harness.TABLE1_DEFAULT_F

_SOLVER_FLAGS = (
    # flag, config key, type
    ("--a", "a", float),
    ("--lambda", "lambda", float),
    ("--c", "c", float),
    ("--delta", "delta", float),
    ("--eps-outer", "eps_outer", float),
    ("--eps-inner", "eps_inner", float),
    ("--max-outer", "max_outer", int),
    ("--max-inner", "max_inner", int),
    ("--time-limit", "time_limit", float),
)


class UsageError(Exception):
    pass


def _add_solver_flags(p, with_model=True):
    g = p.add_argument_group("solver options")
    if with_model:
        g.add_argument("--model", choices=MODELS, help="objective (default unconstrained)")
    for flag, key, typ in _SOLVER_FLAGS:
        g.add_argument(flag, dest="opt_" + key, type=typ, metavar=key.upper())


def _solver_overrides(args):
    out = {}
    for _, key, _ in _SOLVER_FLAGS:
        v = getattr(args, "opt_" + key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "model", None):
        out["model"] = args.model
    return out


def _options(args, base=None):
    kw = {}
    for key, v in _solver_overrides(args).items():
        kw["lam" if key == "lambda" else key] = v
    base = SolveOptions() if base is None else base
    return base.replace(**kw)


def _int_list(text):
    return list(harness._parse_list(text, int))


def _float_list(text):
    return list(harness._parse_list(text, float))


def cmd_solve(args):
    prob = read_problem(args.problem)
    opts = _options(args)
    res = solve(prob, opts, method=args.method)
    sys.stdout.write(res.summary(prob))
    if args.out:
        write_vector(args.out, res.x)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace_csv())
    return 0


def cmd_experiment(args):
    overrides = list(args.set or [])
    overrides += [f"solver.{k}={v}" for k, v in _solver_overrides(args).items()]
    if args.trials is not None:
        overrides.append(f"experiment.trials={args.trials}")
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if args.solver is not None:
        overrides.append(f"experiment.solver={args.solver}")
    spec = harness.load_config(args.config, overrides)
    res = harness.run_experiment(spec, args.workers)
    harness.write_trials_csv(args.out, res.records, harness.spec_to_config(spec), args.timing)
    for row in res.aggregates():
        print(f"{spec.grid_name}={row['param']:g} k={row['k']}: "
              f"{100 * row['rate']:.1f}% of {row['n']}")
    return 0


def _emit_sweep(sweep, args):
    if args.out:
        harness.write_trials_csv(args.out, sweep.records, sweep.config, args.timing)
    if args.table:
        harness.write_table_csv(args.table, sweep)
    sys.stdout.write(harness.format_table(sweep))


def cmd_a_sweep(args):
    sweep = harness.a_sweep(trials=args.trials, seed=args.seed, a_values=_float_list(args.a_values),
                            sparsity=_int_list(args.sparsity), M=args.M, N=args.N,
                            options=_options(args), workers=args.workers)
    _emit_sweep(sweep, args)
    return 0


def cmd_table1(args):
    sweep = harness.table1_replication(args.F, trials=args.trials, seed=args.seed,
                                       sparsity=_int_list(args.sparsity),
                                       separations=_int_list(args.separations),
                                       options=_options(args), workers=args.workers)
    _emit_sweep(sweep, args)
    return 0


def cmd_rip(args):
    A = read_matrix(args.matrix)
    est = estimate_rip(A, args.s, samples=args.samples, seed=args.seed)
    if args.csv:
        print(est.CSV_HEADER)
        print(est.csv_row())
    else:
        sys.stdout.write(est.to_text())
    return 0


def cmd_check(args):
    beta = read_vector(args.solution)
    prob = read_problem(args.problem)
    opts = _options(args).replace(model="unconstrained")
    rep = check_condition2(beta, prob, opts)
    if args.csv:
        print(rep.CSV_HEADER)
        print(rep.csv_row())
    else:
        sys.stdout.write(rep.to_text())
    return 0


def cmd_generate(args):
    if args.kind in ("dct", "oversampled-dct"):
        gap = int(np.ceil(args.rl * args.F)) if args.rl else args.separation
    else:
        if args.rl:
            raise UsageError("--rl separation applies to DCT ensembles only")
        gap = args.separation
    seq = np.random.SeedSequence(args.seed)
    ens_seed, sig_seed = (int(s) for s in seq.generate_state(2, dtype=np.uint64))
    ens = EnsembleSpec(args.kind, args.M, args.N, r=args.r, F=args.F, seed=ens_seed)
    sig = SignalSpec(args.N, args.k, gap, args.values, sig_seed)
    prob = make_problem(ens, sig, args.noise)
    write_problem(args.out, prob)
    if args.csv:
        write_problem_csv(args.csv, prob)
    print(f"wrote {args.out}: {args.M}x{args.N}, k={args.k}, gap={gap}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tl1cs", description="Transformed-l1 sparse recovery toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="recover a sparse vector from a problem file")
    s.add_argument("problem")
    s.add_argument("--method", choices=("tl1", "l1"), default="tl1")
    s.add_argument("--out", help="write the solution as a vector file")
    s.add_argument("--trace", help="write the objective trace as CSV")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="run a configured success-rate experiment")
    e.add_argument("config")
    e.add_argument("--out", required=True, help="trial CSV")
    e.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a configuration key (repeatable)")
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--solver", choices=harness.SOLVERS)
    e.add_argument("--workers", type=int)
    e.add_argument("--timing", action="store_true", help="add a wall_time column")
    _add_solver_flags(e)
    e.set_defaults(func=cmd_experiment)

    a = sub.add_parser("a-sweep", help="success rate over penalty parameters on Gaussian 64x256")
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--a-values", default="0.1,0.3,1,2,10")
    a.add_argument("--sparsity", default="8:32:2")
    a.add_argument("--M", type=int, default=64)
    a.add_argument("--N", type=int, default=256)
    a.add_argument("--out", help="trial CSV")
    a.add_argument("--table", help="rate table CSV (rows a, columns k)")
    a.add_argument("--workers", type=int)
    a.add_argument("--timing", action="store_true")
    _add_solver_flags(a, with_model=False)
    a.set_defaults(func=cmd_a_sweep)

    t = sub.add_parser("table1", help="DCT success rates over sparsity and separation")
    t.add_argument("--F", type=float, default=TABLE1_DEFAULT_F,
                   help=f"oversampling factor, also the Rayleigh length (default {TABLE1_DEFAULT_F:g})")
    t.add_argument("--trials", type=int, default=50)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--sparsity", default="5,8,11,14,17,20")
    t.add_argument("--separations", default="1,2,3,4,5", help="multiples of the Rayleigh length")
    t.add_argument("--out", help="trial CSV")
    t.add_argument("--table", help="rate table CSV (rows separation, columns sparsity)")
    t.add_argument("--workers", type=int)
    t.add_argument("--timing", action="store_true")
    _add_solver_flags(t, with_model=False)
    t.set_defaults(func=cmd_table1)

    r = sub.add_parser("rip", help="Monte-Carlo lower bound on the restricted isometry constant")
    r.add_argument("matrix", help="matrix or problem file")
    r.add_argument("--s", type=int, required=True, help="support size")
    r.add_argument("--samples", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--csv", action="store_true")
    r.set_defaults(func=cmd_rip)

    c = sub.add_parser("check", help="test the local-minimizer sufficient conditions")
    c.add_argument("solution", help="vector file")
    c.add_argument("problem", help="problem file")
    c.add_argument("--csv", action="store_true")
    _add_solver_flags(c, with_model=False)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("generate", help="draw a random problem file")
    g.add_argument("--kind", choices=("gaussian", "dct"), default="gaussian")
    g.add_argument("--M", type=int, required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--r", type=float, default=0.0)
    g.add_argument("--F", type=float, default=1.0)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--separation", type=int, default=0, help="minimum index gap")
    g.add_argument("--rl", type=float, default=0.0, help="gap in Rayleigh lengths (DCT)")
    g.add_argument("--values", choices=("standard-normal", "unit-signs"), default="standard-normal")
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--csv", help="also write a text dump")
    g.set_defaults(func=cmd_generate)
    return p


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        return _fail(type(exc).__name__, exc, 2)
    except (FormatError, OSError, ValueError, RuntimeError) as exc:
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
