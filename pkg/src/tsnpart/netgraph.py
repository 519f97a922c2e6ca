"""Network topology model, topology generators and hop distances."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from . import kernels

MAX_CONNECT_ATTEMPTS = 100


class TopologyError(ValueError):
    pass


class NodeKind(str, enum.Enum):
    BRIDGE = "bridge"
    END_DEVICE = "end_device"


class TopologyKind(str, enum.Enum):
    GRID = "grid"
    ERDOS_RENYI = "erdos_renyi"
    WAXMAN = "waxman"
    BARABASI_ALBERT = "barabasi_albert"
    SMALL_WORLD = "small_world"


REFERENCE_BRIDGES = 49


@dataclass(frozen=True)
class GeneratorParams:
    """Generator knobs. ``None`` densities are tuned at 49 bridges and scaled
    to keep the same mean degree on other sizes."""

    er_p: float | None = None
    waxman_alpha: float = 0.4
    waxman_beta: float | None = None
    ba_m: int = 2
    sw_k: int = 4
    sw_p: float = 0.1

    def density(self, value: float | None, at_reference: float, n: int) -> float:
        if value is not None:
            return value
        return min(1.0, at_reference * (REFERENCE_BRIDGES - 1) / max(n - 1, 1))


@dataclass(frozen=True)
class Network:
    """Undirected graph of bridges and end devices.

    Node ids are the indices ``0..len(kinds)-1``. Links are stored once as
    ``(u, v)`` with ``u < v``, sorted.
    """

    name: str
    kinds: tuple[NodeKind, ...]
    links: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(NodeKind(k) for k in self.kinds))
        links = tuple(sorted((min(u, v), max(u, v)) for u, v in self.links))
        object.__setattr__(self, "links", links)
        self._check()

    def _check(self):
        n = len(self.kinds)
        if n == 0:
            raise TopologyError("network has no nodes")
        if len(set(self.links)) != len(self.links):
            raise TopologyError("duplicate link")
        for u, v in self.links:
            if u == v:
                raise TopologyError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"link ({u}, {v}) references unknown node")
        for node in range(n):
            if self.kinds[node] is NodeKind.END_DEVICE:
                nbrs = self.neighbors[node]
                if len(nbrs) != 1 or self.kinds[nbrs[0]] is not NodeKind.BRIDGE:
                    raise TopologyError(
                        f"end device {node} must attach to exactly one bridge"
                    )
        if n > 1 and not self.is_connected():
            raise TopologyError("network is not connected")

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in self.kinds]
        for u, v in self.links:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def bridges(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is NodeKind.BRIDGE)

    @cached_property
    def end_devices(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is NodeKind.END_DEVICE)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.neighbors])
        indices = np.fromiter(
            (v for a in self.neighbors for v in a), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices

    @cached_property
    def directed_links(self) -> tuple[tuple[int, int], ...]:
        """Both directions of every link; index is the egress-port id."""
        out = []
        for u, v in self.links:
            out.append((u, v))
            out.append((v, u))
        return tuple(out)

    @cached_property
    def link_index(self) -> dict[tuple[int, int], int]:
        return {uv: i for i, uv in enumerate(self.directed_links)}

    def has_link(self, u: int, v: int) -> bool:
        return (u, v) in self.link_index

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_nodes

    @cached_property
    def distances(self) -> np.ndarray:
        return apsp(self)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": [{"id": i, "kind": k.value} for i, k in enumerate(self.kinds)],
            "links": [[u, v] for u, v in self.links],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        nodes = sorted(data["nodes"], key=lambda n: n["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))):
            raise TopologyError("node ids must be 0..N-1")
        return cls(
            name=data["name"],
            kinds=tuple(NodeKind(n["kind"]) for n in nodes),
            links=tuple((int(u), int(v)) for u, v in data["links"]),
        )


def dumps_topology(net: Network) -> str:
    return json.dumps(net.to_dict(), indent=1, sort_keys=True) + "\n"


def loads_topology(text: str) -> Network:
    return Network.from_dict(json.loads(text))


def write_topology(net: Network, path) -> None:
    Path(path).write_text(dumps_topology(net))


def read_topology(path) -> Network:
    return loads_topology(Path(path).read_text())


def with_end_devices(name: str, n_bridges: int, bridge_links) -> Network:
    """Attach one end device per bridge; end device of bridge ``i`` is ``n + i``."""
    kinds = [NodeKind.BRIDGE] * n_bridges + [NodeKind.END_DEVICE] * n_bridges
    links = [tuple(e) for e in bridge_links]
    links += [(i, n_bridges + i) for i in range(n_bridges)]
    return Network(name=name, kinds=tuple(kinds), links=tuple(links))


def line_network(n_bridges: int, name: str = "line") -> Network:
    return with_end_devices(name, n_bridges, [(i, i + 1) for i in range(n_bridges - 1)])


def apsp(net: Network) -> np.ndarray:
    """All-pairs hop distances as an ``(N, N)`` int64 matrix."""
    indptr, indices = net.csr
    dist = kernels.bfs_all_pairs(indptr, indices, net.n_nodes)
    if (dist < 0).any():
        raise TopologyError("network is not connected")
    return dist


def diameter(net: Network, dist: np.ndarray | None = None) -> int:
    d = net.distances if dist is None else dist
    return int(d.max())


def _square_factors(n: int) -> tuple[int, int]:
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _sub_seed(seed: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])


def _bridge_graph(kind: TopologyKind, n: int, params: GeneratorParams, seed: int):
    if kind is TopologyKind.GRID:
        rows, cols = _square_factors(n)
        g = nx.grid_2d_graph(rows, cols)
        return [(r1 * cols + c1, r2 * cols + c2) for (r1, c1), (r2, c2) in g.edges()]
    if kind is TopologyKind.ERDOS_RENYI:
        g = nx.gnp_random_graph(n, params.density(params.er_p, 0.08, n), seed=seed)
    elif kind is TopologyKind.WAXMAN:
        g = nx.waxman_graph(
            n, beta=params.density(params.waxman_beta, 0.4, n),
            alpha=params.waxman_alpha, seed=seed,
        )
    elif kind is TopologyKind.BARABASI_ALBERT:
        if params.ba_m < 1:
            raise TopologyError(f"barabasi_albert needs m >= 1, got m={params.ba_m}")
        g = nx.barabasi_albert_graph(n, min(params.ba_m, n - 1), seed=seed)
    elif kind is TopologyKind.SMALL_WORLD:
        k = max(2, min(params.sw_k, n - 1))
        g = nx.watts_strogatz_graph(n, k, params.sw_p, seed=seed)
    else:  # pragma: no cover
        raise TopologyError(f"unknown topology kind {kind}")
    return list(g.edges())


def gen_topology(
    kind: TopologyKind | str,
    n_bridges: int,
    params: GeneratorParams | None = None,
    seed: int = 0,
    name: str | None = None,
) -> Network:
    """Generate a connected bridge graph with one end device per bridge.

    Random families are redrawn with derived sub-seeds until connected, at
    most ``MAX_CONNECT_ATTEMPTS`` times.
    """
    kind = TopologyKind(kind)
    params = params or GeneratorParams()
    if n_bridges < 2:
        raise TopologyError("need at least 2 bridges")
    name = name or f"{kind.value}_{n_bridges}_s{seed}"
    for attempt in range(MAX_CONNECT_ATTEMPTS):
        edges = _bridge_graph(kind, n_bridges, params, _sub_seed(seed, attempt))
        g = nx.Graph()
        g.add_nodes_from(range(n_bridges))
        g.add_edges_from(edges)
        if nx.is_connected(g):
            return with_end_devices(name, n_bridges, edges)
    raise TopologyError(
        f"{kind.value} generator produced no connected graph in "
        f"{MAX_CONNECT_ATTEMPTS} attempts"
    )
