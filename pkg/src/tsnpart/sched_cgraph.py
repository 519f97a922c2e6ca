"""Conflict-graph scheduling with a greedy heap heuristic.

Vertices are candidate no-wait configurations (fixed tree, one phase each),
coloured by sub-stream. Edges join candidates of different sub-streams whose
transmissions would eventually collide on a shared egress port. A schedule
is an independent colourful set of that graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .timing import (
    Demand,
    Schedule,
    ScheduleConflict,
    StreamConfiguration,
    TimingConfig,
    no_wait_config,
    slot_geometry,
)

DEFAULT_K_MAX = 64


@dataclass
class ConflictGraph:
    demands: list[Demand]  # colour index -> demand
    color_ptr: np.ndarray  # vertices of colour c: color_ptr[c]:color_ptr[c+1]
    phases: np.ndarray  # per vertex, in macroticks
    indptr: np.ndarray  # symmetric CSR adjacency
    indices: np.ndarray
    group_ptr: np.ndarray  # colours of group g: group_colors[group_ptr[g]:...]
    group_colors: np.ndarray
    color_group: np.ndarray
    macrotick_us: int = 1

    @property
    def n_vertices(self) -> int:
        return int(self.phases.size)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def v_color(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.demands)), np.diff(self.color_ptr))

    @property
    def unschedulable(self) -> set[int]:
        return {c for c in range(len(self.demands)) if self.color_ptr[c + 1] == self.color_ptr[c]}

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def edge_list(self) -> list[tuple[int, int]]:
        rows = np.repeat(np.arange(self.n_vertices), np.diff(self.indptr))
        keep = rows < self.indices
        return list(zip(rows[keep].tolist(), self.indices[keep].tolist()))

    def config(self, v: int, timing: TimingConfig) -> StreamConfiguration:
        c = int(np.searchsorted(self.color_ptr, v, side="right") - 1)
        d = self.demands[c]
        return no_wait_config(d.sub, d.tree, int(self.phases[v]) * self.macrotick_us, timing)


@dataclass
class IcsResult:
    chosen: dict[tuple[int, int], int] = field(default_factory=dict)  # colour key -> vertex
    rejected_colors: set[tuple[int, int]] = field(default_factory=set)


def _shared_link_pairs(geoms, alive):
    """Colour pairs sharing directed links, with both start offsets per link."""
    rec_link, rec_color, rec_off = [], [], []
    for c, g in enumerate(geoms):
        if alive[c]:
            rec_link.append(g.links)
            rec_color.append(np.full(g.links.size, c, dtype=np.int64))
            rec_off.append(g.offsets)
    empty = np.empty(0, dtype=np.int64)
    if not rec_link:
        return empty, empty, np.zeros(1, dtype=np.int64), empty, empty
    link = np.concatenate(rec_link)
    color = np.concatenate(rec_color)
    off = np.concatenate(rec_off)
    order = np.lexsort((color, link))
    link, color, off = link[order], color[order], off[order]
    cuts = np.flatnonzero(np.diff(link)) + 1
    pa, pb, oa, ob = [], [], [], []
    for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, link.size]):
        n = hi - lo
        if n < 2:
            continue
        i, j = np.triu_indices(n, 1)
        pa.append(color[lo + i])
        pb.append(color[lo + j])
        oa.append(off[lo + i])
        ob.append(off[lo + j])
    if not pa:
        return empty, empty, np.zeros(1, dtype=np.int64), empty, empty
    pa, pb = np.concatenate(pa), np.concatenate(pb)
    oa, ob = np.concatenate(oa), np.concatenate(ob)
    order = np.lexsort((pb, pa))
    pa, pb, oa, ob = pa[order], pb[order], oa[order], ob[order]
    new = np.r_[True, (pa[1:] != pa[:-1]) | (pb[1:] != pb[:-1])]
    starts = np.flatnonzero(new)
    shared_ptr = np.r_[starts, pa.size].astype(np.int64)
    return pa[starts], pb[starts], shared_ptr, oa, ob


def build_conflict_graph(
    state: Schedule,
    groups: list[list[Demand]],
    k_max: int = DEFAULT_K_MAX,
    timing: TimingConfig | None = None,
) -> ConflictGraph:
    """Candidate phases are the first ``k_max`` ascending phases that fit."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    timing = timing or state.timing
    demands = [d for group in groups for d in group]
    geoms = [slot_geometry(d, state.net, timing) for d in demands]
    cands = []
    for g in geoms:
        cands.append(
            kernels.feasible_phases(
                state.link_occ, g.links, g.offsets, g.tx, g.period, g.latency, k_max
            )
        )
    counts = np.array([c.size for c in cands], dtype=np.int64)
    color_ptr = np.zeros(len(demands) + 1, dtype=np.int64)
    color_ptr[1:] = np.cumsum(counts)
    phases = np.concatenate(cands) if cands else np.empty(0, dtype=np.int64)

    period = np.array([g.period for g in geoms], dtype=np.int64)
    tx = np.array([g.tx for g in geoms], dtype=np.int64)
    pa, pb, shared_ptr, oa, ob = _shared_link_pairs(geoms, counts > 0)
    eu, ev = kernels.conflict_edges(phases, color_ptr, period, tx, pa, pb, shared_ptr, oa, ob)

    n_v = phases.size
    indptr, indices = kernels.edges_to_csr(eu, ev, n_v)

    group_ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    group_ptr[1:] = np.cumsum([len(g) for g in groups])
    color_group = np.repeat(np.arange(len(groups)), [len(g) for g in groups])
    return ConflictGraph(
        demands=demands,
        color_ptr=color_ptr,
        phases=phases,
        indptr=indptr,
        indices=indices,
        group_ptr=group_ptr,
        group_colors=np.arange(len(demands), dtype=np.int64),
        color_group=color_group.astype(np.int64),
        macrotick_us=timing.macrotick_us,
    )


def gfh_solve(g: ConflictGraph) -> IcsResult:
    """Heap-ordered greedy independent colourful set with atomic groups.

    Colours are taken in order of (fewest remaining candidates, highest
    bandwidth demand, smallest id); once a group starts, its siblings follow
    before any other group. Each colour takes its candidate with the fewest
    live conflicting neighbours and deletes those neighbours. A colour left
    without candidates rejects its whole group and rolls the group back.
    """
    n_c = len(g.demands)
    order = sorted(
        range(n_c),
        key=lambda c: (-Fraction(g.demands[c].sub.frame_bytes, g.demands[c].sub.period_us),
                       g.demands[c].key),
    )
    rank = np.empty(n_c, dtype=np.int64)
    rank[order] = np.arange(n_c)
    chosen = kernels.gfh_solve(
        g.indptr, g.indices, g.v_color.astype(np.int64), g.color_ptr, rank,
        g.color_group, g.group_ptr, g.group_colors,
    )
    res = IcsResult()
    for c, v in enumerate(chosen):
        key = g.demands[c].key
        if v >= 0:
            res.chosen[key] = int(v)
        else:
            res.rejected_colors.add(key)
    return res


def commit_ics(state: Schedule, g: ConflictGraph, r: IcsResult,
               timing: TimingConfig | None = None) -> Schedule:
    timing = timing or state.timing
    for key in sorted(r.chosen):
        cfg = g.config(r.chosen[key], timing)
        try:
            state.commit(cfg)
        except ScheduleConflict as exc:  # pragma: no cover - builder bug
            raise ScheduleConflict(f"conflict graph missed a collision: {exc}") from exc
    return state


@dataclass(frozen=True)
class GfhDecision:
    key: tuple[int, int]
    admitted: bool
    phase_us: int = -1
    round: int = -1


def schedule_gfh(
    state: Schedule,
    groups: list[list[Demand]],
    timing: TimingConfig | None = None,
    k_max: int = DEFAULT_K_MAX,
    max_rounds: int = 16,
) -> tuple[Schedule, list[GfhDecision]]:
    """Build, solve and commit conflict graphs until no more groups fit.

    Each round rebuilds the graph for the still-pending groups against the
    grown occupancy, so later rounds see fresh candidate phases. Groups with
    no feasible phase at all are dropped immediately.
    """
    timing = timing or state.timing
    pending = [list(g) for g in groups]
    admitted: dict[tuple[int, int], GfhDecision] = {}
    for rnd in range(max_rounds):
        if not pending:
            break
        graph = build_conflict_graph(state, pending, k_max, timing)
        res = gfh_solve(graph)
        commit_ics(state, graph, res, timing)
        for key, v in res.chosen.items():
            admitted[key] = GfhDecision(key, True, int(graph.phases[v]) * timing.macrotick_us, rnd)
        if not res.chosen:
            break
        dead = graph.unschedulable
        nxt = []
        for gi, group in enumerate(pending):
            colors = range(graph.group_ptr[gi], graph.group_ptr[gi + 1])
            if group[0].key in res.chosen or any(c in dead for c in colors):
                continue
            nxt.append(group)
        pending = nxt
    out = []
    for group in groups:
        for d in group:
            out.append(admitted.get(d.key, GfhDecision(d.key, False)))
    return state, out
