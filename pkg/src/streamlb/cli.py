"""Command-line entry point.

    streamlb run -w wl4 --method doubling --max-rounds 1
    streamlb experiment1 --format csv
    streamlb experiment2 --rounds 4
    streamlb gen-workload --targets 40,20,20,20 --output keys.txt
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Any, Sequence

from . import __version__
from .experiments import FIELDS, ExperimentRow, experiment1, experiment2
from .ring import Strategy, new_ring
from .runtime import DeadlockError, Mode, RunConfig, run_pipeline
from .workloads import Builtin, SynthesisError, WorkloadSpec, builtin_workload, read_workload, synthesize

RUN_FIELDS = ["workload", "method", "skew", "redistributions", "forwards", "processed", "steps"]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=0.2)
    p.add_argument("--mappers", type=int, default=4)
    p.add_argument("--reducers", type=int, default=4)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SIM.value)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", "-o", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamlb", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one pipeline and print its result")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--workload", "-w", choices=[b.value for b in Builtin])
    src.add_argument("--workload-file", help="UTF-8 file, one key per line")
    run.add_argument("--method", choices=[s.value for s in Strategy], default=Strategy.HALVING.value)
    run.add_argument("--max-rounds", type=int, default=1)
    run.add_argument("--report-every", type=int, default=5)
    _common(run)

    for name, help_ in [
        ("experiment1", "LB off vs. one round, every workload and method"),
        ("experiment2", "skew as the per-reducer round budget grows"),
    ]:
        p = sub.add_parser(name, help=help_)
        if name == "experiment2":
            p.add_argument("--rounds", type=int, default=4, help="sweep budgets 1..ROUNDS")
        _common(p)
        p.set_defaults(format="csv")

    gen = sub.add_parser("gen-workload", help="write keys realizing per-reducer target counts")
    what = gen.add_mutually_exclusive_group(required=True)
    what.add_argument("--targets", help="comma-separated counts, one per reducer")
    what.add_argument("--workload", "-w", choices=[b.value for b in Builtin])
    gen.add_argument("--method", choices=[s.value for s in Strategy], default=Strategy.HALVING.value)
    gen.add_argument("--reducers", type=int, default=4)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--output", "-o")
    return parser


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv(fields: Sequence[str], rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), extrasaction="ignore", lineterminator="\r\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_run(args: argparse.Namespace) -> None:
    config = RunConfig(
        num_mappers=args.mappers,
        num_reducers=args.reducers,
        tau=args.tau,
        strategy=args.method,
        max_rounds=args.max_rounds,
        mode=args.mode,
        seed=args.seed,
        report_every=args.report_every,
    )
    if args.workload_file:
        keys = read_workload(args.workload_file)
        if not keys:
            raise ValueError(f"{args.workload_file} holds no keys")
        name = args.workload_file
    else:
        keys = builtin_workload(args.workload, args.method, args.reducers, args.seed)
        name = args.workload
    result = run_pipeline(keys, config).to_dict()
    result = {"workload": name, "method": args.method, **result}
    if args.format == "json":
        _emit(_json(result), args.output)
    else:
        row = dict(result, skew=f"{result['skew']:.2f}", processed=" ".join(map(str, result["processed"])))
        _emit(_csv(RUN_FIELDS, [row]), args.output)


def _emit_rows(rows: list[ExperimentRow], args: argparse.Namespace) -> None:
    dicts = [r.to_dict() for r in rows]
    if args.format == "json":
        _emit(_json(dicts), args.output)
        return
    for d in dicts:
        for f in ("no_lb_skew", "with_lb_skew", "delta"):
            d[f] = f"{d[f]:.2f}"
    _emit(_csv(FIELDS, dicts), args.output)


def _sweep_kwargs(args: argparse.Namespace) -> dict[str, Any]:
    return dict(seed=args.seed, tau=args.tau, num_mappers=args.mappers, num_reducers=args.reducers, mode=args.mode)


def cmd_experiment1(args: argparse.Namespace) -> None:
    _emit_rows(experiment1(**_sweep_kwargs(args)), args)


def cmd_experiment2(args: argparse.Namespace) -> None:
    _emit_rows(experiment2(args.rounds, **_sweep_kwargs(args)), args)


def cmd_gen_workload(args: argparse.Namespace) -> None:
    if args.workload:
        keys = builtin_workload(args.workload, args.method, args.reducers, args.seed)
    else:
        targets = [int(t) for t in args.targets.split(",")]
        spec = WorkloadSpec(target_counts=targets, total_items=sum(targets))
        keys = synthesize(spec, new_ring(len(targets), args.method), args.seed)
    _emit("".join(k + "\n" for k in keys), args.output)


COMMANDS = {
    "run": cmd_run,
    "experiment1": cmd_experiment1,
    "experiment2": cmd_experiment2,
    "gen-workload": cmd_gen_workload,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, SynthesisError, DeadlockError, OSError) as exc:
        print(f"streamlb: error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"streamlb: run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
