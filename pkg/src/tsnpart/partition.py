"""Distance-based partitioning of multicast destination sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .workload import Stream


@dataclass(frozen=True)
class PartitionResult:
    groups: tuple[tuple[int, ...], ...]
    threshold: int


@dataclass(frozen=True)
class SubStream:
    parent_id: int
    sub_index: int
    source: int
    destinations: tuple[int, ...]
    period_us: int
    frame_bytes: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.parent_id, self.sub_index)

    @property
    def atomic_group(self) -> int:
        return self.parent_id

    @property
    def deadline_us(self) -> int:
        return self.period_us


def partition_stream(stream: Stream, dist: np.ndarray, threshold: int) -> PartitionResult:
    """Greedy proximity grouping of ``stream.destinations``.

    The group is seeded with the destination farthest from the source. The
    unassigned destination closest to the open group joins it if within
    ``threshold`` hops; otherwise the group is closed and that destination
    seeds the next one. Ties go to the smaller node id.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    dsts = sorted(stream.destinations)
    seed = max(dsts, key=lambda x: (int(dist[stream.source, x]), -x))
    groups: list[tuple[int, ...]] = []
    group = [seed]
    left = [d for d in dsts if d != seed]
    # to_group[i]: distance from left[i] to the nearest member of the open group
    to_group = [int(dist[d, seed]) for d in left]
    while left:
        i = min(range(len(left)), key=lambda j: (to_group[j], left[j]))
        dst = left.pop(i)
        gap = to_group.pop(i)
        if gap <= threshold:
            group.append(dst)
            to_group = [min(g, int(dist[d, dst])) for g, d in zip(to_group, left)]
        else:
            groups.append(tuple(group))
            group = [dst]
            to_group = [int(dist[d, dst]) for d in left]
    groups.append(tuple(group))
    return PartitionResult(tuple(groups), threshold)


def make_substreams(stream: Stream, pr: PartitionResult) -> list[SubStream]:
    return [
        SubStream(
            parent_id=stream.id,
            sub_index=i,
            source=stream.source,
            destinations=tuple(sorted(g)),
            period_us=stream.period_us,
            frame_bytes=stream.frame_bytes,
        )
        for i, g in enumerate(pr.groups)
    ]


def whole(stream: Stream) -> SubStream:
    return SubStream(
        stream.id, 0, stream.source, stream.destinations, stream.period_us,
        stream.frame_bytes,
    )


def partition_batch(
    streams, dist: np.ndarray, threshold: int, enabled: bool = True
) -> list[SubStream]:
    if not enabled:
        return [whole(s) for s in streams]
    out: list[SubStream] = []
    for s in streams:
        out.extend(make_substreams(s, partition_stream(s, dist, threshold)))
    return out
