"""Scenario engine: partition, build trees, schedule, measure, per iteration."""

from __future__ import annotations

import gc
import json
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import kernels
from .netgraph import Network
from .partition import partition_batch
from .sched_cgraph import DEFAULT_K_MAX, schedule_gfh
from .sched_exact import schedule_exact
from .sched_greedy import schedule_greedy
from .timing import Schedule, TimingConfig, hypercycle, make_groups, throughput
from .workload import IterationDelta, Scenario, ScenarioError, apply_iteration, check_scenario

log = logging.getLogger(__name__)

SCHEDULERS = ("greedy", "gfh", "exact")


class ScheduleInvalid(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scheduler: str = "gfh"
    partition: bool = True
    threshold: int = 4
    timing: TimingConfig = field(default_factory=TimingConfig)
    k_max: int = DEFAULT_K_MAX
    rounds: int = 16
    time_limit: float = 60.0
    seed: int = 0
    validate: bool = False

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    @property
    def threshold_label(self) -> str:
        return str(self.threshold) if self.partition else "none"


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    rejected_count: int
    cumulative_rejected: int
    admitted_count: int
    throughput_bits_per_us: Fraction
    runtime_us: int
    scheduler: str
    threshold: str

    def row(self) -> dict:
        return {
            "iteration": self.iteration,
            "rejected_count": self.rejected_count,
            "cumulative_rejected": self.cumulative_rejected,
            "admitted_count": self.admitted_count,
            "throughput_bits_per_us": float(self.throughput_bits_per_us),
            "runtime_us": self.runtime_us,
            "scheduler": self.scheduler,
            "threshold": self.threshold,
        }

    @classmethod
    def from_row(cls, r: dict) -> "IterationMetrics":
        return cls(
            iteration=int(r["iteration"]),
            rejected_count=int(r["rejected_count"]),
            cumulative_rejected=int(r["cumulative_rejected"]),
            admitted_count=int(r["admitted_count"]),
            throughput_bits_per_us=Fraction(str(r["throughput_bits_per_us"])),
            runtime_us=int(r["runtime_us"]),
            scheduler=r["scheduler"],
            threshold=str(r["threshold"]),
        )


@dataclass
class IterationState:
    """What the per-iteration hook gets to look at."""

    index: int
    delta: IterationDelta  # deletions already restricted to admitted streams
    rejected: list[int]
    admitted_before: dict
    admitted: dict
    schedule: Schedule


def _run_scheduler(cfg: RunConfig, sched: Schedule, groups):
    if cfg.scheduler == "greedy":
        schedule_greedy(sched, groups)
    elif cfg.scheduler == "gfh":
        schedule_gfh(sched, groups, k_max=cfg.k_max, max_rounds=cfg.rounds)
    else:
        schedule_exact(sched, groups, time_limit=cfg.time_limit)


def run_scenario(
    cfg: RunConfig,
    net: Network,
    scenario: Scenario,
    on_iteration: Callable[[IterationState], None] | None = None,
) -> list[IterationMetrics]:
    check_scenario(scenario, net)
    iterations = scenario.iterations()
    if not iterations:
        return []
    periods = {s.period_us for s in scenario.all_streams()} | {cfg.timing.macrotick_us}
    sched = Schedule(net, cfg.timing, hypercycle(periods))
    kernels.warmup()

    try:
        return _iterate(cfg, net, sched, iterations, on_iteration)
    finally:
        gc.unfreeze()


def _iterate(cfg, net, sched, iterations, on_iteration):
    dist = net.distances
    admitted: dict = {}
    cumulative = 0
    out = []
    for i, delta in enumerate(iterations):
        gone = tuple(d for d in delta.delete if d in admitted)
        eff = IterationDelta(add=delta.add, delete=gone)
        for sid in gone:
            sched.withdraw_parent(sid)
        subs = partition_batch(delta.add, dist, cfg.threshold, cfg.partition)
        groups = make_groups(subs, net, dist)

        # long-lived state stays out of collector passes during the timed call
        gc.freeze()
        t0 = time.perf_counter()
        _run_scheduler(cfg, sched, groups)
        runtime_us = int((time.perf_counter() - t0) * 1e6)

        scheduled = sched.parents()
        rejected = [s.id for s in delta.add if s.id not in scheduled]
        before = admitted
        admitted = apply_iteration(admitted, eff, rejected)
        if set(admitted) != scheduled:
            raise ScheduleInvalid(f"iteration {i}: admitted set drifted from the schedule")
        if cfg.validate:
            rep = sched.validate()
            if not rep.ok:
                raise ScheduleInvalid(f"iteration {i}: " + "; ".join(map(str, rep.violations[:5])))
        cumulative += len(rejected)
        m = IterationMetrics(
            iteration=i,
            rejected_count=len(rejected),
            cumulative_rejected=cumulative,
            admitted_count=len(admitted),
            throughput_bits_per_us=throughput(admitted.values()),
            runtime_us=runtime_us,
            scheduler=cfg.scheduler,
            threshold=cfg.threshold_label,
        )
        log.debug("iteration %d: %s", i, m)
        out.append(m)
        if on_iteration is not None:
            on_iteration(IterationState(i, eff, rejected, before, admitted, sched))
    return out


def run_sweep(cfg: RunConfig, net: Network, scenario: Scenario, thresholds) -> dict[str, list[IterationMetrics]]:
    """One series per threshold (``None`` meaning no partitioning)."""
    from dataclasses import replace

    out = {}
    for t in thresholds:
        c = replace(cfg, partition=False) if t is None else replace(cfg, partition=True, threshold=t)
        out[c.threshold_label] = run_scenario(c, net, scenario)
    return out


@dataclass(frozen=True)
class DeltaRow:
    iteration: int
    cumulative_rejected: int
    throughput_bits_per_us: Fraction

    def row(self) -> dict:
        return {
            "iteration": self.iteration,
            "delta_cumulative_rejected": self.cumulative_rejected,
            "delta_throughput_bits_per_us": float(self.throughput_bits_per_us),
        }


def compare_runs(a: list[IterationMetrics], b: list[IterationMetrics]) -> list[DeltaRow]:
    """Per-iteration ``a - b``; negative rejection deltas favour ``a``."""
    if len(a) != len(b):
        raise ValueError(f"runs differ in length: {len(a)} vs {len(b)}")
    return [
        DeltaRow(
            x.iteration,
            x.cumulative_rejected - y.cumulative_rejected,
            x.throughput_bits_per_us - y.throughput_bits_per_us,
        )
        for x, y in zip(a, b)
    ]


def summarize(metrics: list[IterationMetrics]) -> dict:
    last = metrics[-1] if metrics else None
    return {
        "iterations": len(metrics),
        "cumulative_rejected": last.cumulative_rejected if last else 0,
        "throughput_bits_per_us": float(last.throughput_bits_per_us) if last else 0.0,
        "total_runtime_us": sum(m.runtime_us for m in metrics),
        "max_runtime_us": max((m.runtime_us for m in metrics), default=0),
        "scheduler": last.scheduler if last else "",
        "threshold": last.threshold if last else "",
    }


def dumps_rows(records) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def emit_report(metrics: list[IterationMetrics], fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "rows":
        path.write_text(dumps_rows(m.row() for m in metrics))
    elif fmt == "summary":
        path.write_text(json.dumps(summarize(metrics)) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def read_rows(path) -> list[IterationMetrics]:
    lines = Path(path).read_text().splitlines()
    return [IterationMetrics.from_row(json.loads(x)) for x in lines if x.strip()]


__all__ = [
    "RunConfig", "IterationMetrics", "IterationState", "DeltaRow", "ScenarioError",
    "run_scenario", "run_sweep", "compare_runs", "summarize", "emit_report", "read_rows",
]
