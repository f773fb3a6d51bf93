"""Command-line interface: generate, solve, compare, validate-schedule, scenario-size.

Configuration can come from a plain ``key = value`` text file (``--config``)
with command-line flags taking precedence.  Exit codes: 0 success, 2 usage or
configuration error, 3 divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import bench, problems, solver
from .errors import CapacityError, ConfigError, DivergenceError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _parse_seeds(text):
    try:
        return tuple(int(s) for s in str(text).split(",") if s != "")
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; keys use underscores."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _add_instance_args(p):
    p.add_argument("--family", choices=("qcqp", "scenario_lp"), default="qcqp")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=int, default=15)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--second-stage-dim", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="instance generation seed")
    p.add_argument("--instance", default=None, help="read the instance from this file")


def _add_run_args(p):
    p.add_argument("--schedule", choices=solver.SCHEDULE_KINDS, default="fixed_horizon")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=None, help="override certified modulus")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--cadence", type=float, default=1.0, help="epochs between measurements")
    p.add_argument("--seeds", default="0", help="comma-separated run seeds")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--csv", default="runs.csv", help="CSV file name")
    p.add_argument("--force", action="store_true", help="run despite schedule validation failure")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ref-tol", type=float, default=1e-9)
    p.add_argument("--zmax", type=float, default=None, help="mirror-prox dual box level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdsg",
        description="Constrained stochastic optimization benchmark harness.",
    )
    parser.add_argument("--config", default=None, help="key = value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate an instance file and print constants")
    _add_instance_args(g)
    g.add_argument("--out", required=True, help="instance file to write")

    s = sub.add_parser("solve", help="run one method and write a CSV record")
    _add_instance_args(s)
    s.add_argument("--method", choices=bench.METHODS, default="pdsg")
    _add_run_args(s)

    c = sub.add_parser("compare", help="run several methods on shared seeds")
    _add_instance_args(c)
    c.add_argument("--methods", default="pdsg,mirror_prox", help="comma-separated methods")
    _add_run_args(c)

    v = sub.add_parser("validate-schedule", help="check step-size conditions")
    v.add_argument("--schedule", choices=solver.SCHEDULE_KINDS, required=True)
    v.add_argument("--alpha", type=float, required=True)
    v.add_argument("--rho", type=float, required=True)
    v.add_argument("--m", type=int, required=True)
    v.add_argument("--G", type=float, required=True)
    v.add_argument("--mu", type=float, default=0.0)
    v.add_argument("--K", type=int, default=100_000)

    z = sub.add_parser("scenario-size", help="sample counts for scenario approximation")
    z.add_argument("--n", type=int, required=True)
    z.add_argument("--tau", type=float, required=True)
    z.add_argument("--eps", type=float, required=True)
    z.add_argument("--p", type=int, default=0)

    return parser


def _experiment_config(args, methods) -> bench.ExperimentConfig:
    return bench.ExperimentConfig(
        family=args.family,
        n=args.n,
        p=args.p,
        N=args.N,
        m=args.m,
        second_stage_dim=args.second_stage_dim,
        instance_seed=args.seed,
        instance_file=args.instance,
        methods=methods,
        schedule=args.schedule,
        alpha=args.alpha,
        rho=args.rho,
        mu=args.mu,
        mp_zmax=args.zmax,
        epochs=args.epochs,
        cadence=args.cadence,
        seeds=_parse_seeds(args.seeds),
        out_dir=args.out,
        csv_name=args.csv,
        force=args.force,
        workers=args.workers,
        ref_tol=args.ref_tol,
    )


def cmd_generate(args) -> int:
    inst = bench.build_instance(
        bench.ExperimentConfig(
            family=args.family,
            n=args.n,
            p=args.p,
            N=args.N,
            m=args.m,
            second_stage_dim=args.second_stage_dim,
            instance_seed=args.seed,
            instance_file=args.instance,
        )
    )
    problems.save_instance(inst, args.out)
    consts = problems.certify_constants(inst)
    print(f"wrote {args.out}")
    print(f"n={inst.n} p={inst.p} N={inst.N} m={inst.m}")
    print(
        f"F={consts.F:.6g} G={consts.G:.6g} "
        f"sigma={consts.sigma:.6g} (empirical) mu={consts.mu:.6g}"
        f"{' (exact)' if consts.mu_exact else ' (not computed)'}"
    )
    return EXIT_OK


def _run_and_write(args, methods) -> int:
    cfg = _experiment_config(args, methods)
    records, ref, report = bench.run_experiment(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, cfg.csv_name)
    bench.write_csv(records, path)
    print(f"wrote {path}")
    if not ref.converged:
        print("warning: reference solve did not reach tolerance", file=sys.stderr)
    if len(methods) > 1:
        print(bench.summary_text(bench.summarize(records)))
    if any(rec.meta.get("diverged") for rec in records):
        print("divergence detected; CSV holds partial data", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_solve(args) -> int:
    return _run_and_write(args, (args.method,))


def cmd_compare(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if len(set(methods)) < 2:
        raise ConfigError("compare needs at least two distinct methods")
    return _run_and_write(args, methods)


def cmd_validate_schedule(args) -> int:
    if args.schedule == "fixed_horizon":
        sched = solver.fixed_horizon(args.alpha, args.rho, args.K)
    elif args.schedule == "anytime":
        sched = solver.anytime(args.alpha, args.rho)
    else:
        if args.mu <= 0:
            raise ConfigError("strongly_convex validation requires --mu > 0")
        sched = solver.strongly_convex(args.alpha, args.rho, args.K, args.mu)
    report = solver.validate_schedule(sched, args.m, args.G, args.K, mu=args.mu)
    print(f"schedule {args.schedule}: {'VALID' if report.ok else 'INVALID'}")
    print(report)
    return EXIT_OK


def cmd_scenario_size(args) -> int:
    discarding = problems.scenario_count_discarding(args.n, args.tau, args.eps, args.p)
    robust = problems.scenario_count_robust(args.n, args.tau, args.eps)
    print(f"discarding (p={args.p}): N >= {discarding}")
    print(f"robust sampling:        m >= {robust}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "validate-schedule": cmd_validate_schedule,
    "scenario-size": cmd_scenario_size,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)

    # config-file values become subparser defaults; explicit flags still win
    if "--config" in argv:
        idx = argv.index("--config")
        if idx + 1 >= len(argv):
            print("error: --config needs a file argument", file=sys.stderr)
            return EXIT_USAGE
        try:
            values = read_config_file(argv[idx + 1])
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for sub_action in parser._subparsers._group_actions:
            for sub_parser in sub_action.choices.values():
                typed = {}
                for action in sub_parser._actions:
                    if action.dest in values:
                        raw = values[action.dest]
                        typed[action.dest] = action.type(raw) if action.type else raw
                sub_parser.set_defaults(**typed)

    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
