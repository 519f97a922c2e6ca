"""Command line entry point: ``tsnpart <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (
    SCHEDULERS,
    RunConfig,
    compare_runs,
    dumps_rows,
    emit_report,
    read_rows,
    run_scenario,
    summarize,
)
from .netgraph import GeneratorParams, TopologyKind, gen_topology, read_topology, write_topology
from .sched_cgraph import DEFAULT_K_MAX
from .timing import TimingConfig, read_schedule_dump, validate_dump, write_schedule
from .workload import PROFILES, gen_scenario, read_scenario, write_scenario

log = logging.getLogger("tsnpart")


def _cmd_gen_topo(args) -> int:
    params = GeneratorParams()
    net = gen_topology(args.kind, args.bridges, params, seed=args.seed, name=args.name)
    write_topology(net, args.out)
    log.info("wrote %s (%d bridges, %d links)", args.out, len(net.bridges), len(net.links))
    return 0


def _cmd_gen_scenario(args) -> int:
    net = read_topology(args.topology)
    scn = gen_scenario(
        net, args.initial, args.add, args.delete, args.iterations,
        PROFILES[args.profile], seed=args.seed,
    )
    write_scenario(scn, args.out)
    return 0


def _timing(args) -> TimingConfig:
    return TimingConfig(
        link_rate_bits_per_us=args.link_rate,
        propagation_us=args.propagation,
        processing_us=args.processing,
        macrotick_us=args.macrotick,
        n_queues=args.queues,
    )


def _configs(args) -> list[RunConfig]:
    base = dict(
        scheduler=args.scheduler,
        timing=_timing(args),
        k_max=args.k_max,
        rounds=args.rounds,
        time_limit=args.time_limit,
        seed=args.seed,
        validate=args.validate,
    )
    out = []
    if args.no_partition:
        out.append(RunConfig(partition=False, threshold=0, **base))
    for t in args.threshold or ([] if args.no_partition else [4]):
        out.append(RunConfig(partition=True, threshold=t, **base))
    return out


def _cmd_run(args) -> int:
    net = read_topology(args.topology)
    scn = read_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in _configs(args):
        label = f"{cfg.scheduler}-{cfg.threshold_label}"
        last = {}

        def keep(st, last=last):
            last["schedule"] = st.schedule

        metrics = run_scenario(cfg, net, scn, on_iteration=keep)
        emit_report(metrics, "rows", out / f"rows-{label}.jsonl")
        emit_report(metrics, "summary", out / f"summary-{label}.json")
        if "schedule" in last:
            write_schedule(last["schedule"], out / f"schedule-{label}.json")
        s = summarize(metrics)
        print(f"{label}: rejected={s['cumulative_rejected']} "
              f"throughput={s['throughput_bits_per_us']:g} bits/us "
              f"max_runtime={s['max_runtime_us']} us")
    return 0


def _cmd_validate(args) -> int:
    net = read_topology(args.topology)
    rep = validate_dump(read_schedule_dump(args.schedule), net)
    print(rep.summary())
    for v in rep.violations[: args.limit]:
        print(f"  {v}")
    return 0 if rep.ok else 1


def _cmd_compare(args) -> int:
    deltas = compare_runs(read_rows(args.a), read_rows(args.b))
    text = dumps_rows(d.row() for d in deltas)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    metrics = read_rows(args.rows)
    if args.out:
        emit_report(metrics, args.format, args.out)
    elif args.format == "summary":
        print(json.dumps(summarize(metrics)))
    else:
        sys.stdout.write(dumps_rows(m.row() for m in metrics))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsnpart", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-topo", help="generate a topology file")
    g.add_argument("--kind", choices=[k.value for k in TopologyKind], default="erdos_renyi")
    g.add_argument("--bridges", type=int, default=49)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_topo)

    s = sub.add_parser("gen-scenario", help="generate an iteration scenario")
    s.add_argument("--topology", required=True)
    s.add_argument("--initial", type=int, default=250)
    s.add_argument("--add", type=int, default=40)
    s.add_argument("--delete", type=int, default=20)
    s.add_argument("--iterations", type=int, default=20)
    s.add_argument("--profile", choices=sorted(PROFILES), default="5-level")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_gen_scenario)

    r = sub.add_parser("run", help="run a scenario, one series per threshold")
    r.add_argument("--topology", required=True)
    r.add_argument("--scenario", required=True)
    r.add_argument("--scheduler", choices=SCHEDULERS, default="gfh")
    r.add_argument("--threshold", type=int, action="append",
                   help="partitioning threshold; repeat for a sweep")
    r.add_argument("--no-partition", action="store_true",
                   help="also (or only) run without partitioning")
    r.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    r.add_argument("--rounds", type=int, default=16)
    r.add_argument("--time-limit", type=float, default=60.0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--validate", action="store_true",
                   help="validate the schedule after every iteration")
    r.add_argument("--link-rate", type=int, default=1000, help="bits per us")
    r.add_argument("--propagation", type=int, default=1)
    r.add_argument("--processing", type=int, default=4)
    r.add_argument("--macrotick", type=int, default=1)
    r.add_argument("--queues", type=int, default=8)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a schedule dump; exit 1 on violations")
    v.add_argument("--topology", required=True)
    v.add_argument("--schedule", required=True)
    v.add_argument("--limit", type=int, default=20)
    v.set_defaults(func=_cmd_validate)

    c = sub.add_parser("compare", help="per-iteration deltas a - b of two row files")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_compare)

    rp = sub.add_parser("report", help="re-emit rows or a summary")
    rp.add_argument("rows")
    rp.add_argument("--format", choices=("rows", "summary"), default="summary")
    rp.add_argument("--out")
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"tsnpart {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
