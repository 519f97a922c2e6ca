"""Depth-first branch and bound over atomic groups for tiny no-wait instances."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .timing import Demand, Schedule, TimingConfig, no_wait_config, slot_geometry

DEFAULT_GUARD = 4096
DEFAULT_NODE_LIMIT = 5_000_000


class InstanceTooLarge(ValueError):
    pass


@dataclass
class ExactResult:
    # group index -> phase (us) per member, for admitted groups only
    best_admitted: dict[int, tuple[int, ...]] = field(default_factory=dict)
    optimal: bool = True
    nodes_explored: int = 0

    @property
    def n_admitted(self) -> int:
        return len(self.best_admitted)


def exact_max_admit(
    state: Schedule,
    groups: list[list[Demand]],
    timing: TimingConfig | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
    time_limit: float = 60.0,
    guard: int = DEFAULT_GUARD,
) -> ExactResult:
    """Maximise the number of admitted groups under no-wait forwarding.

    Groups are branched in order; admission (member phases ascending) is
    explored before rejection and only strict improvements replace the
    incumbent, so among optimal solutions the first in that order wins.
    """
    timing = timing or state.timing
    geoms = [[slot_geometry(d, state.net, timing) for d in g] for g in groups]
    size = sum(g.period for gg in geoms for g in gg)
    if size > guard:
        raise InstanceTooLarge(f"{size} phase choices exceed the guard of {guard}")

    occ = state.link_occ.copy()
    n = len(groups)
    best: dict = {"count": -1, "assign": {}}
    cur: dict[int, tuple[int, ...]] = {}
    nodes = 0
    deadline = time.monotonic() + time_limit
    stop = False

    def cells(g, phase):
        reps = occ.shape[1] // g.period
        base = (np.arange(reps) * g.period)[:, None] + np.arange(g.tx)[None, :]
        cols = (g.offsets[:, None, None] + phase + base[None]).reshape(g.links.size, -1)
        return np.repeat(g.links, cols.shape[1]), cols.ravel()

    def dfs_group(i, admitted):
        nonlocal nodes, stop
        nodes += 1
        if nodes >= node_limit or time.monotonic() > deadline:
            stop = True
            return
        if admitted + (n - i) <= best["count"]:
            return
        if i == n:
            best["count"] = admitted
            best["assign"] = dict(cur)
            return
        dfs_member(i, 0, [], admitted)
        if stop:
            return
        dfs_group(i + 1, admitted)

    def dfs_member(i, j, phases, admitted):
        nonlocal stop
        members = geoms[i]
        if j == len(members):
            cur[i] = tuple(p * timing.macrotick_us for p in phases)
            dfs_group(i + 1, admitted + 1)
            del cur[i]
            return
        g = members[j]
        for phase in kernels.feasible_phases(
            occ, g.links, g.offsets, g.tx, g.period, g.latency, g.period
        ):
            rows, cols = cells(g, int(phase))
            occ[rows, cols] = 0
            dfs_member(i, j + 1, phases + [int(phase)], admitted)
            occ[rows, cols] = kernels.FREE
            if stop:
                return

    dfs_group(0, 0)
    return ExactResult(
        best_admitted=best["assign"], optimal=not stop, nodes_explored=nodes
    )


def commit_exact(state: Schedule, groups: list[list[Demand]], res: ExactResult) -> Schedule:
    for gi, phases in sorted(res.best_admitted.items()):
        for d, phase in zip(groups[gi], phases):
            state.commit(no_wait_config(d.sub, d.tree, phase, state.timing))
    return state


@dataclass(frozen=True)
class ExactDecision:
    key: tuple[int, int]
    admitted: bool
    phase_us: int = -1


def schedule_exact(
    state: Schedule,
    groups: list[list[Demand]],
    timing: TimingConfig | None = None,
    time_limit: float = 60.0,
    node_limit: int = DEFAULT_NODE_LIMIT,
    guard: int = DEFAULT_GUARD,
) -> tuple[Schedule, list[ExactDecision], ExactResult]:
    res = exact_max_admit(state, groups, timing, node_limit, time_limit, guard)
    commit_exact(state, groups, res)
    out = []
    for gi, group in enumerate(groups):
        phases = res.best_admitted.get(gi)
        for j, d in enumerate(group):
            if phases is None:
                out.append(ExactDecision(d.key, False))
            else:
                out.append(ExactDecision(d.key, True, phases[j]))
    return state, out, res
