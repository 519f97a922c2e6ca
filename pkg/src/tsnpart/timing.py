"""Time model: transmission intervals, schedule state and validation."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .kernels import FREE
from .mtree import MulticastTree, tree_from_parent_map
from .netgraph import Network
from .partition import SubStream


class ScheduleConflict(RuntimeError):
    """A configuration collides with committed occupancy."""


@dataclass(frozen=True)
class TimingConfig:
    link_rate_bits_per_us: int = 1000
    propagation_us: int = 1
    processing_us: int = 4
    macrotick_us: int = 1
    n_queues: int = 8

    def __post_init__(self):
        for name in ("link_rate_bits_per_us", "propagation_us", "processing_us",
                     "macrotick_us", "n_queues"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("propagation_us", "processing_us"):
            if getattr(self, name) % self.macrotick_us:
                raise ValueError(f"{name} must be a macrotick multiple")

    def to_dict(self) -> dict:
        return {
            "link_rate_bits_per_us": self.link_rate_bits_per_us,
            "propagation_us": self.propagation_us,
            "processing_us": self.processing_us,
            "macrotick_us": self.macrotick_us,
            "n_queues": self.n_queues,
        }


def tx_duration(frame_bytes: int, cfg: TimingConfig) -> int:
    us = -(-frame_bytes * 8 // cfg.link_rate_bits_per_us)
    return -(-us // cfg.macrotick_us) * cfg.macrotick_us


def hop_delay(frame_bytes: int, cfg: TimingConfig) -> int:
    """Egress start to next egress start under no-wait forwarding."""
    return tx_duration(frame_bytes, cfg) + cfg.propagation_us + cfg.processing_us


def hypercycle(periods) -> int:
    periods = list(periods)
    if not periods:
        raise ValueError("hypercycle of an empty period set")
    return math.lcm(*periods)


@dataclass(frozen=True)
class TransmissionInterval:
    link: tuple[int, int]
    start_us: int
    duration_us: int

    @property
    def end_us(self) -> int:
        return self.start_us + self.duration_us


def overlaps(a: TransmissionInterval, b: TransmissionInterval) -> bool:
    return a.link == b.link and a.start_us < b.end_us and b.start_us < a.end_us


@dataclass(frozen=True)
class Hop:
    u: int
    v: int
    start: int  # egress start relative to the frame's cycle start
    queue: int = -1  # -1: transmitted without buffering


@dataclass(frozen=True)
class StreamConfiguration:
    sub: SubStream
    tree: MulticastTree
    hops: tuple[Hop, ...]
    no_wait: bool = True

    @property
    def key(self) -> tuple[int, int]:
        return self.sub.key

    @property
    def phase_us(self) -> int:
        return self.hops[0].start


def no_wait_offsets(tree: MulticastTree, frame_bytes: int, cfg: TimingConfig) -> list[int]:
    """Per tree edge (breadth-first order), egress start relative to the phase."""
    step = hop_delay(frame_bytes, cfg)
    return [tree.depth[u] * step for u, _ in tree.edges]


def no_wait_config(
    sub: SubStream, tree: MulticastTree, phase: int, cfg: TimingConfig
) -> StreamConfiguration:
    offs = no_wait_offsets(tree, sub.frame_bytes, cfg)
    hops = tuple(Hop(u, v, phase + o) for (u, v), o in zip(tree.edges, offs))
    return StreamConfiguration(sub, tree, hops, no_wait=True)


def no_wait_latency(tree: MulticastTree, frame_bytes: int, cfg: TimingConfig) -> int:
    """Full arrival at the deepest destination, relative to the phase."""
    depth = max(tree.depth[d] for d in tree.covered)
    return depth * hop_delay(frame_bytes, cfg) - cfg.processing_us


def _instances(period: int, hyper: int) -> range:
    if hyper % period:
        raise ValueError(f"hypercycle {hyper} is not a multiple of period {period}")
    return range(0, hyper, period)


def expand(cfg: StreamConfiguration, timing: TimingConfig, hyper: int) -> list[TransmissionInterval]:
    tx = tx_duration(cfg.sub.frame_bytes, timing)
    return [
        TransmissionInterval((h.u, h.v), h.start + base, tx)
        for base in _instances(cfg.sub.period_us, hyper)
        for h in cfg.hops
    ]


def expand_no_wait(cfg: StreamConfiguration, timing: TimingConfig, hyper: int) -> list[TransmissionInterval]:
    """Re-derive the rigid no-wait pattern from tree and phase alone."""
    sub = cfg.sub
    tx = tx_duration(sub.frame_bytes, timing)
    offs = no_wait_offsets(cfg.tree, sub.frame_bytes, timing)
    return [
        TransmissionInterval(edge, base + cfg.phase_us + o, tx)
        for base in _instances(sub.period_us, hyper)
        for edge, o in zip(cfg.tree.edges, offs)
    ]


def arrivals(cfg: StreamConfiguration, timing: TimingConfig) -> dict[int, int]:
    """Full-arrival time at every destination, relative to the cycle start."""
    tx = tx_duration(cfg.sub.frame_bytes, timing)
    into = {h.v: h for h in cfg.hops}
    return {d: into[d].start + tx + timing.propagation_us for d in cfg.tree.covered}


def end_to_end_ok(cfg: StreamConfiguration, timing: TimingConfig, hyper: int | None = None) -> bool:
    return max(arrivals(cfg, timing).values()) <= cfg.sub.deadline_us


def throughput(admitted_parents) -> Fraction:
    """Delivered bits per microsecond over the admitted original streams."""
    return sum(
        (Fraction(s.frame_bytes * 8 * len(s.destinations), s.period_us)
         for s in admitted_parents),
        Fraction(0),
    )


class Schedule:
    """Committed configurations plus per-port occupancy over one hypercycle.

    ``link_occ[l, t]`` holds the owner slot transmitting on directed link
    ``l`` during macrotick ``t``; ``queue_occ[l, q, t]`` the owner buffered
    in queue ``q`` of that egress port. Single writer.
    """

    def __init__(self, net: Network, timing: TimingConfig, hyper: int):
        if hyper % timing.macrotick_us:
            raise ValueError("hypercycle must be a macrotick multiple")
        self.net = net
        self.timing = timing
        self.hypercycle_us = hyper
        n_slots = hyper // timing.macrotick_us
        n_links = len(net.directed_links)
        self.link_occ = np.full((n_links, n_slots), FREE, dtype=np.int32)
        self.queue_occ = np.full((n_links, timing.n_queues, n_slots), FREE, dtype=np.int32)
        self.configs: dict[tuple[int, int], StreamConfiguration] = {}
        self._owner: dict[tuple[int, int], int] = {}
        self._held: dict[tuple[int, int], tuple] = {}
        self._next_owner = 0

    def _cells(self, cfg: StreamConfiguration):
        """Index arrays of link and queue cells the configuration occupies."""
        mt = self.timing.macrotick_us
        tx = tx_duration(cfg.sub.frame_bytes, self.timing) // mt
        period = cfg.sub.period_us
        hop_t = (tx_duration(cfg.sub.frame_bytes, self.timing)
                 + self.timing.propagation_us + self.timing.processing_us)
        bases = np.arange(0, self.hypercycle_us, period) // mt
        index = self.net.link_index
        lids = np.fromiter((index[(h.u, h.v)] for h in cfg.hops), dtype=np.int64,
                           count=len(cfg.hops))
        starts = np.fromiter((h.start for h in cfg.hops), dtype=np.int64,
                             count=len(cfg.hops)) // mt
        cols = starts[:, None, None] + bases[None, :, None] + np.arange(tx)[None, None, :]
        n = self.link_occ.shape[1]
        lr = np.repeat(lids, bases.size * tx)
        lc = cols.ravel() % n
        q_rows, q_idx, q_cols = [], [], []
        arrive = None
        for k, h in enumerate(cfg.hops):
            if h.queue >= 0:
                if arrive is None:
                    arrive = {x.v: x.start + hop_t for x in cfg.hops}
                qc = (bases[:, None] + np.arange(arrive.get(h.u, h.start) // mt, starts[k])[None, :]).ravel()
                q_rows.append(np.full(qc.size, lids[k]))
                q_idx.append(np.full(qc.size, h.queue))
                q_cols.append(qc)
        if q_rows:
            qr = np.concatenate(q_rows)
            qi = np.concatenate(q_idx)
            qc = np.concatenate(q_cols) % n
        else:
            qr = qi = qc = np.empty(0, dtype=np.int64)
        return lr, lc, qr, qi, qc

    def is_free(self, cfg: StreamConfiguration) -> bool:
        lr, lc, qr, qi, qc = self._cells(cfg)
        return bool((self.link_occ[lr, lc] == FREE).all()
                    and (self.queue_occ[qr, qi, qc] == FREE).all())

    def commit(self, cfg: StreamConfiguration) -> None:
        if cfg.key in self.configs:
            raise ScheduleConflict(f"sub-stream {cfg.key} is already scheduled")
        lr, lc, qr, qi, qc = self._cells(cfg)
        if not ((self.link_occ[lr, lc] == FREE).all()
                and (self.queue_occ[qr, qi, qc] == FREE).all()):
            raise ScheduleConflict(f"sub-stream {cfg.key} overlaps committed occupancy")
        # a frame longer than its period, or two hops on one link, hits itself
        if (tx_duration(cfg.sub.frame_bytes, self.timing) > cfg.sub.period_us
                or len({(h.u, h.v) for h in cfg.hops}) != len(cfg.hops)):
            raise ScheduleConflict(f"sub-stream {cfg.key} overlaps itself")
        owner = self._next_owner
        self._next_owner += 1
        self.link_occ[lr, lc] = owner
        self.queue_occ[qr, qi, qc] = owner
        self.configs[cfg.key] = cfg
        self._owner[cfg.key] = owner
        self._held[cfg.key] = (lr, lc, qr, qi, qc)

    def withdraw(self, key: tuple[int, int]) -> StreamConfiguration:
        cfg = self.configs.pop(key)
        owner = self._owner.pop(key)
        lr, lc, qr, qi, qc = self._held.pop(key)
        assert (self.link_occ[lr, lc] == owner).all()
        self.link_occ[lr, lc] = FREE
        self.queue_occ[qr, qi, qc] = FREE
        return cfg

    def withdraw_parent(self, parent_id: int) -> list[StreamConfiguration]:
        keys = sorted(k for k in self.configs if k[0] == parent_id)
        return [self.withdraw(k) for k in keys]

    def parents(self) -> set[int]:
        return {k[0] for k in self.configs}

    def validate(self) -> "ValidationReport":
        return validate_schedule(self)

    def dump(self) -> dict:
        return {
            "topology_name": self.net.name,
            "hypercycle_us": self.hypercycle_us,
            "timing": self.timing.to_dict(),
            "configs": [config_to_dict(self.configs[k]) for k in sorted(self.configs)],
        }


# -- schedule dump -----------------------------------------------------------


def config_to_dict(cfg: StreamConfiguration) -> dict:
    s = cfg.sub
    return {
        "parent_id": s.parent_id,
        "sub_index": s.sub_index,
        "src": s.source,
        "dsts": list(s.destinations),
        "period_us": s.period_us,
        "frame_bytes": s.frame_bytes,
        "phase_us": cfg.phase_us,
        "no_wait": cfg.no_wait,
        "tree": cfg.tree.to_dict(),
        "hops": [[h.u, h.v, h.start, h.queue] for h in cfg.hops],
    }


def config_from_dict(d: dict) -> StreamConfiguration:
    sub = SubStream(
        parent_id=int(d["parent_id"]),
        sub_index=int(d["sub_index"]),
        source=int(d["src"]),
        destinations=tuple(int(x) for x in d["dsts"]),
        period_us=int(d["period_us"]),
        frame_bytes=int(d["frame_bytes"]),
    )
    tree = tree_from_parent_map(sub.source, d["tree"], sub.destinations)
    hops = tuple(Hop(int(u), int(v), int(s), int(q)) for u, v, s, q in d["hops"])
    return StreamConfiguration(sub, tree, hops, no_wait=bool(d["no_wait"]))


def dumps_schedule(dump: dict) -> str:
    return json.dumps(dump, sort_keys=True, indent=1) + "\n"


def write_schedule(sched: Schedule, path) -> None:
    Path(path).write_text(dumps_schedule(sched.dump()))


def read_schedule_dump(path) -> dict:
    return json.loads(Path(path).read_text())


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    streams: tuple[tuple[int, int], ...]
    link: tuple[int, int] | None
    time_us: int | None
    detail: str

    def __str__(self):
        where = f" on {self.link}" if self.link else ""
        when = f" at {self.time_us}us" if self.time_us is not None else ""
        return f"{self.kind}{where}{when} {list(self.streams)}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    n_configs: int = 0
    n_intervals: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return f"valid: {self.n_configs} configurations, {self.n_intervals} transmissions"
        return f"INVALID: {len(self.violations)} violations"


def _sweep(items, kind, report, hyper, place):
    """Report every pair of overlapping half-open ``(start, end, key)`` items."""
    cut = []
    for start, end, key in items:
        length = end - start
        start %= hyper
        end = start + length
        cut.append((start, min(end, hyper), key))
        if end > hyper:
            cut.append((0, end - hyper, key))
    cut.sort()
    active: list[tuple[int, int, tuple]] = []
    for start, end, key in cut:
        active = [a for a in active if a[1] > start]
        for a in active:
            report.violations.append(
                Violation(kind, (a[2], key), place, start,
                          f"[{a[0]},{a[1]}) overlaps [{start},{end})")
            )
        active.append((start, end, key))


def validate_configs(
    configs, net: Network, timing: TimingConfig, hyper: int
) -> ValidationReport:
    """Independent validity check of a set of configurations.

    Recomputes every transmission and queue residency from the hop list and
    checks release, tree shape, precedence, deadlines, frame isolation and
    mutual exclusion.
    """
    rep = ValidationReport(n_configs=len(configs))
    per_link = defaultdict(list)
    per_queue = defaultdict(list)
    mt = timing.macrotick_us
    seen = set()
    net_links = set(net.links)
    for cfg in configs:
        sub = cfg.sub
        key = sub.key
        bad = rep.violations.append

        def v(kind, detail, link=None, t=None):
            bad(Violation(kind, (key,), link, t, detail))

        if key in seen:
            v("duplicate", "sub-stream scheduled twice")
        seen.add(key)
        if hyper % sub.period_us:
            v("hypercycle", f"period {sub.period_us} does not divide {hyper}")
            continue
        tx = -(-sub.frame_bytes * 8 // timing.link_rate_bits_per_us)
        tx = -(-tx // mt) * mt
        tree = cfg.tree
        if tree.root != sub.source:
            v("tree", f"root {tree.root} is not the source {sub.source}")
        edges = {(p, c) for c, p in tree.parent.items()}
        for u, w in edges:
            if (min(u, w), max(u, w)) not in net_links:
                v("tree", f"({u},{w}) is not a network link")
        for d in sub.destinations:
            if d != tree.root and d not in tree.parent:
                v("tree", f"destination {d} not covered")
        hop_edges = [(h.u, h.v) for h in cfg.hops]
        if sorted(hop_edges) != sorted(edges) or len(set(hop_edges)) != len(hop_edges):
            v("tree", "hop list does not match the tree edges")
            continue
        # cycle / reachability check
        reach = {tree.root}
        frontier = [tree.root]
        kids = defaultdict(list)
        for p, c in edges:
            kids[p].append(c)
        while frontier:
            nxt = []
            for u in frontier:
                for c in kids[u]:
                    if c in reach:
                        continue
                    reach.add(c)
                    nxt.append(c)
            frontier = nxt
        if len(reach) != len(edges) + 1:
            v("tree", "parent map is not a tree rooted at the source")
            continue

        start_of = {(h.u, h.v): h for h in cfg.hops}
        root_hops = [h for h in cfg.hops if h.u == tree.root]
        phase = root_hops[0].start if root_hops else 0
        if not 0 <= phase < sub.period_us:
            v("release", f"phase {phase} outside [0, {sub.period_us})")
        for h in cfg.hops:
            if h.start % mt:
                v("release", f"start {h.start} not on a macrotick", (h.u, h.v), h.start)
            if h.u == tree.root:
                if h.start != phase:
                    v("release", "source duplicates leave at different times", (h.u, h.v), h.start)
                if h.queue >= 0:
                    v("isolation", "source egress must not be buffered", (h.u, h.v), h.start)
                continue
            prev = start_of[(tree.parent[h.u], h.u)]
            ready = prev.start + tx + timing.propagation_us + timing.processing_us
            if h.start < ready:
                v("precedence", f"departs at {h.start} before ready time {ready}",
                  (h.u, h.v), h.start)
            elif cfg.no_wait and h.start != ready:
                v("precedence", f"no-wait hop waits {h.start - ready}us",
                  (h.u, h.v), h.start)
            if h.start > ready:
                if not 0 <= h.queue < timing.n_queues:
                    v("isolation", f"buffered frame has no valid queue ({h.queue})",
                      (h.u, h.v), ready)
                else:
                    for base in range(0, hyper, sub.period_us):
                        per_queue[(h.u, h.v, h.queue)].append(
                            (base + ready, base + h.start, key))
        for d in sub.destinations:
            into = start_of.get((tree.parent.get(d), d))
            if into is None:
                continue
            arrival = into.start + tx + timing.propagation_us
            if arrival > sub.deadline_us:
                v("deadline", f"arrives at {d} at {arrival} > {sub.deadline_us}",
                  (into.u, into.v), arrival)
        for base in range(0, hyper, sub.period_us):
            for h in cfg.hops:
                per_link[(h.u, h.v)].append((base + h.start, base + h.start + tx, key))
                rep.n_intervals += 1

    for link, items in sorted(per_link.items()):
        _sweep(items, "mutual_exclusion", rep, hyper, link)
    for (u, w, q), items in sorted(per_queue.items()):
        _sweep(items, "isolation", rep, hyper, (u, w))
    return rep


def validate_schedule(sched: Schedule, timing: TimingConfig | None = None) -> ValidationReport:
    timing = timing or sched.timing
    return validate_configs(list(sched.configs.values()), sched.net, timing, sched.hypercycle_us)


def validate_dump(dump: dict, net: Network) -> ValidationReport:
    timing = TimingConfig(**dump["timing"])
    configs = [config_from_dict(d) for d in dump["configs"]]
    return validate_configs(configs, net, timing, int(dump["hypercycle_us"]))


# -- scheduling demands ------------------------------------------------------


@dataclass(frozen=True)
class Demand:
    """A sub-stream together with its fixed multicast tree."""

    sub: SubStream
    tree: MulticastTree

    @property
    def key(self) -> tuple[int, int]:
        return self.sub.key


def make_groups(substreams, net: Network, dist) -> list[list[Demand]]:
    """Build trees and bundle sub-streams into atomic groups, in input order."""
    from .mtree import build_tree

    groups: dict[int, list[Demand]] = {}
    for sub in substreams:
        tree = build_tree(net, dist, sub.source, sub.destinations)
        groups.setdefault(sub.parent_id, []).append(Demand(sub, tree))
    return [sorted(g, key=lambda d: d.sub.sub_index) for g in groups.values()]


@dataclass(frozen=True)
class SlotGeometry:
    """Integer macrotick geometry of a rigid or hop-by-hop placement."""

    links: np.ndarray  # directed link id per tree edge, breadth-first
    parent: np.ndarray  # index of the upstream edge, -1 at the source
    offsets: np.ndarray  # no-wait start offset per edge
    tail: np.ndarray  # least latency from edge start to deepest leaf below
    tx: int
    hop: int
    period: int
    latency: int


def slot_geometry(d: Demand, net: Network, timing: TimingConfig) -> SlotGeometry:
    mt = timing.macrotick_us
    if d.sub.period_us % mt:
        raise ValueError(f"period {d.sub.period_us} is not a macrotick multiple")
    tree = d.tree
    edges = tree.edges
    index = {e: i for i, e in enumerate(edges)}
    tx = tx_duration(d.sub.frame_bytes, timing) // mt
    hop = tx + (timing.propagation_us + timing.processing_us) // mt
    last = tx + timing.propagation_us // mt
    height: dict[int, int] = {}
    for u, v in reversed(edges):
        height.setdefault(v, 0)
        height[u] = max(height.get(u, 0), height[v] + 1)
    parent = [index[(tree.parent[u], u)] if u != tree.root else -1 for u, _ in edges]
    return SlotGeometry(
        links=np.array([net.link_index[e] for e in edges], dtype=np.int64),
        parent=np.array(parent, dtype=np.int64),
        offsets=np.array([tree.depth[u] * hop for u, _ in edges], dtype=np.int64),
        tail=np.array([height[v] * hop + last for _, v in edges], dtype=np.int64),
        tx=tx,
        hop=hop,
        period=d.sub.period_us // mt,
        latency=no_wait_latency(tree, d.sub.frame_bytes, timing) // mt,
    )
