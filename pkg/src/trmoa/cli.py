"""Command line entry point: ``trmoa {gen,ingest,run,oracle,sweep,summarize}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._validation import InvalidInstanceError
from .allocators import ALGORITHMS, SCORE_CONTEXTS, SCORE_DENOMINATORS, SolverConfig, solve
from .bench import SUMMARY_FIELDS, SweepSpec, format_csv, read_csv, run_sweep, summarize, trace_csv, write_sweep
from .generate import PRESETS, generate_instance, preset
from .instance_io import MalformedRowError, ingest_csv, read_instance, serialize_allocation, write_instance
from .oracle import OracleTooLarge

log = logging.getLogger("trmoa")

# CLI flag -> GeneratorParams field
_GEN_FLAGS = {
    "alpha": "alpha", "beta": "beta", "users": "n_users", "boards": "n_boards", "tags": "n_tags",
    "t1": "t1", "t2": "t2", "slot_duration": "slot_duration", "gamma": "gamma", "seed": "seed",
}


def _solver_flags(p: argparse.ArgumentParser, algo: bool = True) -> None:
    if algo:
        p.add_argument("--algo", choices=[a for a in ALGORITHMS if a != "oracle"], default="bg")
        p.add_argument("--epsilon", type=float, default=0.01)
        p.add_argument("--rls-iters", type=int, default=20)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--score-context", choices=SCORE_CONTEXTS, default="full")
        p.add_argument("--score-denominator", choices=SCORE_DENOMINATORS, default="cost")
        p.add_argument("--early-stop", action="store_true")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--omega", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=100.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trmoa", description="Regret-minimising billboard slot allocation")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--preset", choices=sorted(PRESETS), default="nyc-micro")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--users", type=int)
    g.add_argument("--boards", type=int)
    g.add_argument("--tags", type=int)
    g.add_argument("--t1", type=int)
    g.add_argument("--t2", type=int)
    g.add_argument("--slot-duration", type=int)
    g.add_argument("--gamma", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, type=Path)

    i = sub.add_parser("ingest", help="build an instance from raw CSV tables")
    i.add_argument("--trajectories", required=True, type=Path)
    i.add_argument("--affinities", required=True, type=Path)
    i.add_argument("--billboards", required=True, type=Path)
    i.add_argument("--advertisers", required=True, type=Path)
    i.add_argument("--slot-duration", type=int, default=1_800)
    i.add_argument("--t1", type=int)
    i.add_argument("--t2", type=int)
    i.add_argument("--gamma", type=float, default=100.0)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True, type=Path)

    r = sub.add_parser("run", help="solve one instance")
    r.add_argument("--instance", required=True, type=Path)
    _solver_flags(r)
    r.add_argument("--out", type=Path, help="allocation file (default: stdout)")
    r.add_argument("--trace", type=Path, help="write the selection trace as CSV")

    o = sub.add_parser("oracle", help="exact solve of a tiny instance (<= 12 slots, <= 3 advertisers)")
    o.add_argument("--instance", required=True, type=Path)
    _solver_flags(o, algo=False)
    o.add_argument("--out", type=Path)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--grid", required=True, type=Path, help="JSON file: parameter -> list of values")
    s.add_argument("--algos", default="bg,rg,rls,random")
    s.add_argument("--seeds", type=int)
    s.add_argument("--master-seed", type=int)
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--strict", action="store_true", help="exit nonzero if any cell failed")
    s.add_argument("--out", required=True, type=Path)

    m = sub.add_parser("summarize", help="aggregate a results.csv")
    m.add_argument("--results", required=True, type=Path)
    m.add_argument("--timings", type=Path)
    m.add_argument("--out", type=Path, help="summary CSV (default: stdout)")
    return parser


def _cmd_gen(args) -> int:
    overrides = {field: getattr(args, flag) for flag, field in _GEN_FLAGS.items() if getattr(args, flag) is not None}
    instance = generate_instance(preset(args.preset, **overrides))
    write_instance(instance, args.out)
    print(f"wrote {len(instance.slots)} slots, {len(instance.advertisers)} advertisers, "
          f"{len(instance.user_ids)} users to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    instance = ingest_csv(
        args.trajectories, args.affinities, args.billboards, args.advertisers,
        slot_duration=args.slot_duration, t1=args.t1, t2=args.t2, gamma=args.gamma, seed=args.seed,
    )
    report = instance.validate()
    for v in report.violations:
        log.warning("validation: %s", v)
    write_instance(instance, args.out)
    print(f"wrote {len(instance.slots)} slots, {len(instance.advertisers)} advertisers, "
          f"{len(instance.user_ids)} users to {args.out}")
    return 0 if report.ok else 1


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _cmd_run(args, algorithm=None) -> int:
    instance = read_instance(args.instance)
    if algorithm == "oracle":
        config = SolverConfig(algorithm="oracle", delta=args.delta, omega=args.omega, gamma=args.gamma)
    else:
        config = SolverConfig(
            algorithm=args.algo, epsilon=args.epsilon, rls_iters=args.rls_iters, seed=args.seed,
            delta=args.delta, omega=args.omega, gamma=args.gamma, score_context=args.score_context,
            score_denominator=args.score_denominator, early_stop=args.early_stop,
        )
    res = solve(instance, config)
    summary = {"algorithm": config.algorithm, "seed": str(config.seed), "delta": repr(config.delta)}
    _emit(serialize_allocation(res.allocation, res.report, summary), args.out)
    if getattr(args, "trace", None):
        args.trace.write_text(trace_csv(res.trace))
    log.info("total regret %r in %.3f s", res.report.total, res.trace.wall_time)
    return 0


def _cmd_sweep(args) -> int:
    spec = SweepSpec.from_json(
        args.grid, algorithms=tuple(a.strip() for a in args.algos.split(",") if a.strip()),
        seeds=args.seeds, master_seed=args.master_seed, preset=args.preset,
    )
    result = run_sweep(spec, jobs=args.jobs)
    write_sweep(result, args.out, spec)
    print(f"{len(result.rows)} rows, {result.n_failed} failed -> {args.out}")
    return 1 if args.strict and result.n_failed else 0


def _cmd_summarize(args) -> int:
    rows = read_csv(args.results)
    if not rows:
        raise ValueError(f"{args.results}: no rows")
    timings = read_csv(args.timings) if args.timings else ()
    table = summarize(rows, timings)
    _emit(format_csv(SUMMARY_FIELDS, table), args.out)
    return 0


COMMANDS = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "run": _cmd_run,
    "oracle": lambda a: _cmd_run(a, "oracle"),
    "sweep": _cmd_sweep,
    "summarize": _cmd_summarize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InvalidInstanceError, MalformedRowError, OracleTooLarge, ValueError, FileNotFoundError) as e:
        print(f"trmoa {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
