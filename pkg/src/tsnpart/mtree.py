"""Source-rooted multicast trees built by intermediate-node distance."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .netgraph import Network


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class MulticastTree:
    root: int
    parent: dict[int, int]
    covered: tuple[int, ...]

    @cached_property
    def children(self) -> dict[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {}
        for child, par in self.parent.items():
            kids.setdefault(par, []).append(child)
        return {k: tuple(sorted(v)) for k, v in kids.items()}

    @cached_property
    def depth(self) -> dict[int, int]:
        depth = {self.root: 0}
        for u, v in self.edges:
            depth[v] = depth[u] + 1
        return depth

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Directed ``(parent, child)`` edges in breadth-first order."""
        out = []
        frontier = [self.root]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.children.get(u, ()):
                    out.append((u, v))
                    nxt.append(v)
            frontier = nxt
        return tuple(out)

    @property
    def nodes(self) -> tuple[int, ...]:
        return (self.root, *sorted(self.parent))

    def path_to(self, node: int) -> list[int]:
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path[::-1]

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.parent.items())}


def tree_from_parent_map(root: int, parent: dict, covered) -> MulticastTree:
    return MulticastTree(
        root=int(root),
        parent={int(k): int(v) for k, v in parent.items()},
        covered=tuple(sorted(int(c) for c in covered)),
    )


def shortest_path(net: Network, dist: np.ndarray, src: int, dst: int) -> list[int]:
    """Shortest path, always stepping to the smallest-id viable neighbour."""
    if dist[src, dst] < 0:
        raise TreeError(f"{dst} unreachable from {src}")
    path = [src]
    u = src
    while u != dst:
        want = dist[u, dst] - 1
        u = next(w for w in net.neighbors[u] if dist[w, dst] == want)
        path.append(u)
    return path


def build_tree(
    net: Network, dist: np.ndarray, source: int, dests
) -> MulticastTree:
    """Connect destinations farthest-first, each to its nearest tree node.

    Ties on attachment distance go to the tree node with the smaller tree
    depth, then the smaller id.
    """
    dests = sorted(set(int(d) for d in dests))
    if not dests:
        raise TreeError("multicast tree needs at least one destination")
    order = sorted(dests, key=lambda d: (-int(dist[source, d]), d))
    parent: dict[int, int] = {}
    depth = {source: 0}

    def graft(path):
        for u, v in zip(path, path[1:]):
            parent[v] = u
            depth[v] = depth[u] + 1

    graft(shortest_path(net, dist, source, order[0]))
    for d in order[1:]:
        if d in depth:
            continue
        tree_nodes = np.fromiter(depth, dtype=np.int64)
        dd = dist[tree_nodes, d]
        best = int(dd.min())
        cands = [int(n) for n in tree_nodes[dd == best]]
        anchor = min(cands, key=lambda n: (depth[n], n))
        graft(shortest_path(net, dist, anchor, d))
    return MulticastTree(root=source, parent=parent, covered=tuple(dests))
