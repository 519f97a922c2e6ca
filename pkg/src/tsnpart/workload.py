"""Streams, random workloads and per-iteration admission dynamics."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netgraph import Network, NodeKind


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Stream:
    id: int
    source: int
    destinations: tuple[int, ...]
    period_us: int
    frame_bytes: int

    def __post_init__(self):
        object.__setattr__(self, "destinations", tuple(sorted(self.destinations)))
        if not self.destinations:
            raise ScenarioError(f"stream {self.id} has no destinations")
        if self.source in self.destinations:
            raise ScenarioError(f"stream {self.id} sends to its own source")
        if len(set(self.destinations)) != len(self.destinations):
            raise ScenarioError(f"stream {self.id} lists a destination twice")
        if self.period_us <= 0 or self.frame_bytes <= 0:
            raise ScenarioError(f"stream {self.id} needs positive period and size")

    @property
    def deadline_us(self) -> int:
        return self.period_us

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "src": self.source,
            "dsts": list(self.destinations),
            "period_us": self.period_us,
            "frame_bytes": self.frame_bytes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stream":
        return cls(
            id=int(d["id"]),
            source=int(d["src"]),
            destinations=tuple(int(x) for x in d["dsts"]),
            period_us=int(d["period_us"]),
            frame_bytes=int(d["frame_bytes"]),
        )


@dataclass(frozen=True)
class WorkloadProfile:
    name: str
    periods_us: tuple[int, ...] = (250, 500, 1000, 2000)
    frame_sizes: tuple[int, ...] = (125, 250, 500, 750, 1000, 1500)
    dest_counts: tuple[int, ...] = (1, 2, 4, 8, 16)
    dest_weights: tuple[float, ...] = (0.5, 0.25, 0.125, 0.0625, 0.0625)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "periods_us": list(self.periods_us),
            "frame_sizes": list(self.frame_sizes),
            "dest_counts": list(self.dest_counts),
            "dest_weights": list(self.dest_weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadProfile":
        return cls(
            name=d["name"],
            periods_us=tuple(d["periods_us"]),
            frame_sizes=tuple(d["frame_sizes"]),
            dest_counts=tuple(d["dest_counts"]),
            dest_weights=tuple(d["dest_weights"]),
        )


# Halving distribution where the largest bucket equals the second largest.
FIVE_LEVEL = WorkloadProfile("5-level")
THREE_LEVEL = WorkloadProfile(
    "3-level", dest_counts=(1, 2, 4), dest_weights=(0.5, 0.25, 0.25)
)
PROFILES = {p.name: p for p in (FIVE_LEVEL, THREE_LEVEL)}


@dataclass(frozen=True)
class IterationDelta:
    add: tuple[Stream, ...] = ()
    delete: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"add": [s.to_dict() for s in self.add], "del": list(self.delete)}

    @classmethod
    def from_dict(cls, d: dict) -> "IterationDelta":
        return cls(
            add=tuple(Stream.from_dict(s) for s in d["add"]),
            delete=tuple(int(x) for x in d["del"]),
        )


@dataclass(frozen=True)
class Scenario:
    topology_name: str
    initial: tuple[Stream, ...]
    deltas: tuple[IterationDelta, ...] = ()
    profile: dict = field(default_factory=dict, compare=False)

    def iterations(self) -> list[IterationDelta]:
        """Iteration 0 admits the initial set; later ones follow the deltas."""
        if not self.initial and not self.deltas:
            return []
        return [IterationDelta(add=self.initial)] + list(self.deltas)

    def all_streams(self) -> list[Stream]:
        out = list(self.initial)
        for d in self.deltas:
            out.extend(d.add)
        return out

    def to_dict(self) -> dict:
        return {
            "topology_name": self.topology_name,
            "profile": self.profile,
            "initial": [s.to_dict() for s in self.initial],
            "deltas": [d.to_dict() for d in self.deltas],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            topology_name=d["topology_name"],
            initial=tuple(Stream.from_dict(s) for s in d["initial"]),
            deltas=tuple(IterationDelta.from_dict(x) for x in d["deltas"]),
            profile=d.get("profile", {}),
        )


def dumps_scenario(scn: Scenario) -> str:
    return json.dumps(scn.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def loads_scenario(text: str) -> Scenario:
    return Scenario.from_dict(json.loads(text))


def write_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(scn))


def read_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text())


def check_scenario(scn: Scenario, net: Network) -> None:
    """Raise if the scenario references nodes the topology does not have."""
    if scn.topology_name != net.name:
        raise ScenarioError(
            f"scenario is for topology {scn.topology_name!r}, got {net.name!r}"
        )
    seen: set[int] = set()
    for s in scn.all_streams():
        if s.id in seen:
            raise ScenarioError(f"duplicate stream id {s.id}")
        seen.add(s.id)
        for node in (s.source, *s.destinations):
            if not 0 <= node < net.n_nodes or net.kinds[node] is not NodeKind.END_DEVICE:
                raise ScenarioError(f"stream {s.id}: node {node} is not an end device")


def _draw_streams(rng, n, net, profile, start_id):
    ends = np.asarray(net.end_devices, dtype=np.int64)
    if n > 0 and max(profile.dest_counts) + 1 > len(ends):
        raise ScenarioError(
            f"profile {profile.name} needs {max(profile.dest_counts) + 1} end devices, "
            f"network has {len(ends)}"
        )
    weights = np.asarray(profile.dest_weights, dtype=float)
    weights = weights / weights.sum()
    out = []
    for i in range(n):
        frame = int(rng.choice(profile.frame_sizes))
        period = int(rng.choice(profile.periods_us))
        k = int(rng.choice(profile.dest_counts, p=weights))
        picks = rng.choice(ends, size=k + 1, replace=False)
        out.append(
            Stream(
                id=start_id + i,
                source=int(picks[0]),
                destinations=tuple(int(x) for x in picks[1:]),
                period_us=period,
                frame_bytes=frame,
            )
        )
    return out


def gen_streams(
    n: int, net: Network, profile: WorkloadProfile = FIVE_LEVEL, seed: int = 0,
    start_id: int = 0,
) -> list[Stream]:
    return _draw_streams(np.random.default_rng(seed), n, net, profile, start_id)


def apply_iteration(
    admitted: Mapping[int, Stream], delta: IterationDelta, rejected: Iterable[int]
) -> dict[int, Stream]:
    """``(admitted - delta.delete) | (delta.add - rejected)``, keyed by id."""
    rejected = set(rejected)
    add_ids = {s.id for s in delta.add}
    if not rejected <= add_ids:
        raise ScenarioError(f"rejected ids {sorted(rejected - add_ids)} were never added")
    missing = [i for i in delta.delete if i not in admitted]
    if missing:
        raise ScenarioError(f"cannot delete streams {missing}: not admitted")
    gone = set(delta.delete)
    out = {i: s for i, s in admitted.items() if i not in gone}
    for s in delta.add:
        if s.id in out:
            raise ScenarioError(f"stream id {s.id} is already admitted")
        if s.id not in rejected:
            out[s.id] = s
    return out


def gen_scenario(
    net: Network,
    initial_n: int,
    add_per_iter: int,
    del_per_iter: int,
    iterations: int,
    profile: WorkloadProfile = FIVE_LEVEL,
    seed: int = 0,
) -> Scenario:
    """Initial batch plus ``iterations`` add/delete deltas.

    Deletions are drawn uniformly from streams still present, using a
    random stream separate from stream generation. Streams later rejected by
    a scheduler are skipped by the engine when their deletion comes up.
    """
    gen_ss, del_ss = np.random.SeedSequence(seed).spawn(2)
    gen_rng = np.random.default_rng(gen_ss)
    del_rng = np.random.default_rng(del_ss)
    initial = _draw_streams(gen_rng, initial_n, net, profile, 0)
    present = [s.id for s in initial]
    next_id = initial_n
    deltas = []
    for _ in range(iterations):
        n_del = min(del_per_iter, len(present))
        if n_del:
            idx = del_rng.choice(len(present), size=n_del, replace=False)
            dels = sorted(present[i] for i in idx)
        else:
            dels = []
        adds = _draw_streams(gen_rng, add_per_iter, net, profile, next_id)
        next_id += add_per_iter
        gone = set(dels)
        present = [i for i in present if i not in gone] + [s.id for s in adds]
        deltas.append(IterationDelta(add=tuple(adds), delete=tuple(dels)))
    meta = profile.to_dict() | {
        "seed": seed,
        "initial": initial_n,
        "add_per_iter": add_per_iter,
        "del_per_iter": del_per_iter,
        "iterations": iterations,
    }
    return Scenario(net.name, tuple(initial), tuple(deltas), meta)
