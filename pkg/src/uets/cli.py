"""Command line entry point: ``uets run|sweep|adversary|validate|plot``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

from uets.algorithms import SettingsMismatchError, make_strategy
from uets.core import ScheduleTrace, fmt_time
from uets.harness import ConfigError, CorpusSpec, Report, load_config, run_adversary, run_experiment, sweep_corpus
from uets.instance_io import load_instance, save_instance
from uets.validation import validate_trace


def _print_summary(report: Report) -> None:
    print(f"rows: {len(report.rows)}  failures: {len(report.failures())}")
    for (strategy, m), ratio in report.worst_ratios().items():
        print(f"  worst ratio {strategy:<22} m={m}: {fmt_time(ratio)} ({float(ratio):.4f})")
    for row in report.failures()[:20]:
        print(
            f"  FAIL {row.strategy} [{row.setting}] {row.source}: makespan {fmt_time(row.makespan)}, "
            f"{row.bound_kind} {row.opt_or_bound}, multiplier {row.guarantee_multiplier}, valid={row.valid}"
        )


def cmd_run(args: argparse.Namespace) -> int:
    path = Path(args.config)
    report = run_experiment(load_config(path), base_dir=path.parent)
    if args.out:
        for p in report.write(args.out):
            print(f"wrote {p}")
    if len(report.rows) == 1:
        print(json.dumps(report.rows[0].to_json(), indent=2, sort_keys=True))
    else:
        _print_summary(report)
    return 0 if report.ok else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    data = {} if args.corpus == "default" else load_config(args.corpus)
    if args.draws is not None:
        data["draws"] = args.draws
    if args.seed is not None:
        data["seed"] = args.seed
    report = sweep_corpus(CorpusSpec.from_json(data))
    for p in report.write(args.out):
        print(f"wrote {p}")
    _print_summary(report)
    return 0 if report.ok else 1


def cmd_adversary(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out else None
    row, con, trace = run_adversary(
        args.construction, args.m, make_strategy(args.strategy), args.n, None if out is None else out / "traces"
    )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_instance(con.realised_instance(), out / "realised_instance.json")
        (out / "witness_trace.jsonl").write_text(con.witness().to_jsonl())
        Report({"mode": "adversary", "construction": args.construction, "m": args.m}, [row]).write(out)
        print(f"wrote {out}")
    print(json.dumps(row.to_json(), indent=2, sort_keys=True))
    return 0 if not row.failed else 1


def cmd_validate(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    trace = ScheduleTrace.from_jsonl(Path(args.trace).read_text())
    report = validate_trace(instance, trace, trace.settings)
    if report.valid:
        print(f"valid: makespan {fmt_time(report.makespan)}")
        return 0
    for v in report.violations:
        print(v)
    return 1


def cmd_plot(args: argparse.Namespace) -> int:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting needs matplotlib (pip install uets[plot])", file=sys.stderr)
        return 2
    worst: dict[str, dict[int, float]] = defaultdict(dict)
    with open(args.csv, newline="") as fh:
        for rec in csv.DictReader(fh):
            if not rec.get("ratio_float"):
                continue
            s, m, r = rec["strategy"], int(rec["m"]), float(rec["ratio_float"])
            worst[s][m] = max(worst[s].get(m, 0.0), r)
    machines = sorted({m for per in worst.values() for m in per})
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(1, len(machines))
    names = sorted(worst)
    for k, m in enumerate(machines):
        xs = [i + k * width for i in range(len(names))]
        ax.bar(xs, [worst[s].get(m, 0.0) for s in names], width, label=f"m={m}")
    ax.set_xticks([i + width * (len(machines) - 1) / 2 for i in range(len(names))])
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("worst makespan ratio")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uets", description="Online batch scheduling with setup times.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the experiment described by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="directory for the JSONL and CSV report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep a seeded corpus with every applicable strategy")
    p.add_argument("--corpus", required=True, help="corpus JSON file, or 'default'")
    p.add_argument("--out", required=True)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("adversary", help="play a strategy against an adversarial construction")
    p.add_argument("--construction", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--n", type=int, help="job count, for constructions that accept one")
    p.add_argument("--out")
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("validate", help="check a trace file against an instance file")
    p.add_argument("--trace", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="bar chart of worst ratios from a report CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SettingsMismatchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
