"""As-soon-as-possible scheduler with queuing; earlier placements are never moved."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .timing import (
    Demand,
    Hop,
    Schedule,
    StreamConfiguration,
    TimingConfig,
    slot_geometry,
)


@dataclass(frozen=True)
class GreedyDecision:
    key: tuple[int, int]
    admitted: bool
    hops: tuple[Hop, ...] = ()
    reason: str = ""


def place_greedy(state: Schedule, d: Demand) -> StreamConfiguration | None:
    """Earliest placement of one sub-stream, or None when it cannot fit."""
    g = slot_geometry(d, state.net, state.timing)
    queued = np.array([u != d.tree.root for u, _ in d.tree.edges], dtype=np.bool_)
    starts, queues, ok = kernels.greedy_place(
        state.link_occ, state.queue_occ, g.links, g.parent, queued, g.tail,
        g.tx, g.hop, g.period, g.period,
    )
    if not ok:
        return None
    mt = state.timing.macrotick_us
    hops = tuple(
        Hop(u, v, int(s) * mt, int(q))
        for (u, v), s, q in zip(d.tree.edges, starts, queues)
    )
    no_wait = all(h.queue < 0 for h in hops)
    return StreamConfiguration(d.sub, d.tree, hops, no_wait=no_wait)


def schedule_greedy(
    state: Schedule, groups: list[list[Demand]], timing: TimingConfig | None = None
) -> tuple[Schedule, list[GreedyDecision]]:
    """Insert atomic groups in order; a group that does not fit leaves no trace."""
    if timing is not None and timing != state.timing:
        raise ValueError("timing differs from the schedule's timing")
    decisions: list[GreedyDecision] = []
    for group in groups:
        placed: list[StreamConfiguration] = []
        failed = None
        for d in group:
            cfg = place_greedy(state, d)
            if cfg is None:
                failed = d.key
                break
            state.commit(cfg)
            placed.append(cfg)
        if failed is None:
            decisions.extend(GreedyDecision(c.key, True, c.hops) for c in placed)
            continue
        for cfg in reversed(placed):
            state.withdraw(cfg.key)
        for d in group:
            why = "no feasible placement" if d.key == failed else f"sibling {failed} failed"
            decisions.append(GreedyDecision(d.key, False, reason=why))
    return state, decisions
