"""Command-line front end.

Every subcommand takes a scenario file.  Tabular output is CSV and
reports are JSON, written to stdout or ``--out``.  Exit status is 0 on
success, 1 on validation or domain errors and 2 on numerical failure;
each error prints one ``<CODE>...: message`` line to stderr.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .analysis import PinConfig, rank_nodes, sync_speed, threshold_T0, DEFAULT_T_MAX
from .errors import NumericalError, PinsyncError, ValidationError
from .experiments import default_grid, find_bifurcation, sweep_periods, threshold_vs_bifurcation
from .scenario import dump_scenario, load_scenario, random_scenario
from .simulate import propagate_error, propagate_full


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"E_USAGE: {message}", file=sys.stderr)
        sys.exit(1)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2) + "\n"


def _scenario(args):
    sc = load_scenario(args.scenario)
    if getattr(args, "period", None) is not None:
        if not args.period > 0:
            raise ValidationError(f"--period must be positive, got {args.period!r}", code="E_PERIOD")
        sc = sc.with_period(args.period)
    return sc


def _check_node(sc, node):
    if not 1 <= node <= sc.node_count:
        raise ValidationError(f"node {node} outside [1, {sc.node_count}]", code="E_NODE_INDEX", path="--node")


def cmd_validate(args):
    sc = _scenario(args)
    for w in sc.warnings():
        print(w, file=sys.stderr)
    phases = len(sc.schedule.phases)
    _emit(args, f"OK {sc.name}: N={sc.node_count} n={sc.spec.n} phases={phases} "
                f"period={sc.schedule.period!r} gain={sc.gain!r}\n")
    return 0


def cmd_rank(args):
    sc = _scenario(args)
    reports = rank_nodes(sc.spec, sc.schedule, sc.gain, candidates=sc.candidates, workers=args.workers)
    lines = ["rank,node,rho,speed,stable"]
    for k, rep in enumerate(reports, 1):
        lines.append(f"{k},{rep.node},{rep.rho!r},{rep.speed!r},{str(rep.stable).lower()}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_analyze(args):
    sc = _scenario(args)
    _check_node(sc, args.node)
    rep = sync_speed(sc.spec, sc.schedule, args.node, sc.gain)
    _emit(args, _json({
        "node": rep.node,
        "period": sc.schedule.period,
        "gain": sc.gain,
        "rho": rep.rho,
        "speed": rep.speed,
        "stable": rep.stable,
    }))
    return 0


def cmd_simulate(args):
    sc = _scenario(args)
    _check_node(sc, args.node)
    pins = PinConfig.single(args.node, sc.gain)
    if args.full:
        tr = propagate_full(sc.spec, sc.schedule, pins, sc.init, args.t_end, args.dt)
    else:
        tr = propagate_error(sc.spec, sc.schedule, pins, sc.init, args.t_end, args.dt)
    N, n = sc.node_count, sc.spec.n
    header = ["t", "error_norm"]
    if args.full:
        header += [f"x{i}_{k}" for i in range(1, N + 1) for k in range(1, n + 1)]
        header += [f"c_{k}" for k in range(1, n + 1)]
    elif args.states:
        header += [f"e{i}_{k}" for i in range(1, N + 1) for k in range(1, n + 1)]
    lines = [",".join(header)]
    for idx, (t, e) in enumerate(zip(tr.times, tr.error_norms)):
        row = [repr(float(t)), repr(float(e))]
        if args.full:
            row += [repr(float(v)) for v in tr.node_states[idx].reshape(-1)]
            row += [repr(float(v)) for v in tr.reference[idx]]
        elif args.states:
            row += [repr(float(v)) for v in tr.errors[idx].reshape(-1)]
        lines.append(",".join(row))
    _emit(args, "\n".join(lines) + "\n")
    if tr.overflowed:
        last = float(tr.times[-1]) if len(tr.times) else 0.0
        print(f"W_OVERFLOW: trace diverged and was truncated after t={last!r}", file=sys.stderr)
    return 0


def _grid(args):
    return default_grid(args.t_min, args.t_max, args.points)


def cmd_sweep(args):
    sc = _scenario(args)
    table = sweep_periods(sc.spec, sc.schedule, sc.gain, _grid(args), candidates=sc.candidates,
                          workers=args.workers)
    _emit(args, table.to_csv())
    bif = find_bifurcation(table) if table.periods.size >= 2 else None
    print(f"bifurcation={'none' if bif is None else repr(bif)}", file=sys.stderr)
    return 0


def cmd_threshold(args):
    sc = _scenario(args)
    if args.compare:
        grid = _grid(args)
        rep = threshold_vs_bifurcation(sc.spec, sc.schedule, sc.gain, grid, candidates=sc.candidates,
                                       workers=args.workers)
        _emit(args, _json(rep.as_dict()))
    else:
        rep = threshold_T0(sc.spec, sc.schedule, sc.gain, candidates=sc.candidates, t_max=args.t_max,
                           workers=args.workers)
        _emit(args, _json(rep.as_dict()))
    return 0


def cmd_random(args):
    rng = np.random.default_rng(args.seed)
    sc = random_scenario(rng, N=args.nodes, n=args.dim, phases=args.phases, period=args.period,
                         identity_coupling=args.identity_coupling)
    _emit(args, dump_scenario(sc))
    return 0


def build_parser():
    p = _Parser(prog="pinsync", description="Driver-node analysis for pinning control under periodic switching.")
    p.add_argument("--version", action="version", version=f"pinsync {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, fn, help, scenario=True):
        c = sub.add_parser(name, help=help)
        if scenario:
            c.add_argument("scenario", help="scenario YAML file")
        c.add_argument("--out", help="write output to this path instead of stdout")
        c.set_defaults(func=fn)
        return c

    def period_opt(c):
        c.add_argument("--period", type=float, help="override the scenario's switching period")

    def workers_opt(c):
        c.add_argument("--workers", type=int, default=None, help="threads for independent evaluations")

    def grid_opts(c):
        c.add_argument("--t-min", type=float, default=1e-3)
        c.add_argument("--t-max", type=float, default=10.0)
        c.add_argument("--points", type=int, default=200)

    c = command("validate", cmd_validate, "check a scenario file and the spanning-tree assumption")
    period_opt(c)

    c = command("rank", cmd_rank, "rank candidate driver nodes, most influential first")
    period_opt(c)
    workers_opt(c)

    c = command("analyze", cmd_analyze, "monodromy spectral radius, speed and stability for one pinned node")
    c.add_argument("--node", type=int, required=True)
    period_opt(c)

    c = command("simulate", cmd_simulate, "time-domain error trace as CSV")
    c.add_argument("--node", type=int, required=True)
    c.add_argument("--t-end", type=float, required=True)
    c.add_argument("--dt", type=float, required=True)
    c.add_argument("--states", action="store_true", help="add per-node error state columns")
    c.add_argument("--full", action="store_true", help="simulate node states and reference; add their columns")
    period_opt(c)

    c = command("sweep", cmd_sweep, "speed table over switching periods as CSV; bifurcation on stderr")
    grid_opts(c)
    workers_opt(c)

    c = command("threshold", cmd_threshold, "switching-period threshold report as JSON")
    c.add_argument("--t-max-search", dest="t_max", type=float, default=DEFAULT_T_MAX,
                   help="upper end of the threshold search")
    c.add_argument("--compare", action="store_true", help="also sweep and compare with the first bifurcation")
    grid_opts(c)
    period_opt(c)
    workers_opt(c)

    c = command("random", cmd_random, "write a random test scenario as YAML", scenario=False)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--nodes", type=int, default=None)
    c.add_argument("--dim", type=int, default=None)
    c.add_argument("--phases", type=int, default=None)
    c.add_argument("--period", type=float, default=None)
    c.add_argument("--identity-coupling", action="store_true")
    return p


def run_command(argv=None):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return 2
    except PinsyncError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
