"""Time each hot kernel under numba and under the numpy fallback.

Inputs come from a full-size run: an Erdos-Renyi network with 49 bridges
and 250 streams, half of them already committed by the Greedy scheduler.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tsnpart import kernels
from tsnpart.netgraph import gen_topology
from tsnpart.partition import partition_batch
from tsnpart.sched_cgraph import _shared_link_pairs, build_conflict_graph
from tsnpart.sched_greedy import schedule_greedy
from tsnpart.timing import Schedule, TimingConfig, hypercycle, make_groups, slot_geometry
from tsnpart.workload import FIVE_LEVEL, gen_scenario


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def build_cases(seed):
    net = gen_topology("erdos_renyi", 49, seed=seed)
    scn = gen_scenario(net, 250, 40, 20, 0, FIVE_LEVEL, seed=seed)
    timing = TimingConfig()
    periods = {s.period_us for s in scn.initial} | {timing.macrotick_us}
    state = Schedule(net, timing, hypercycle(periods))
    dist = net.distances
    groups = make_groups(partition_batch(scn.initial, dist, 4, True), net, dist)
    half = len(groups) // 2
    schedule_greedy(state, groups[:half])
    rest = groups[half:]
    demands = [d for g in rest for d in g]
    geoms = [slot_geometry(d, net, timing) for d in demands]

    indptr, indices = net.csr
    cases = {
        "bfs_all_pairs": lambda k: k.bfs_all_pairs(indptr, indices, net.n_nodes),
    }

    def phases(k):
        for g in geoms:
            k.feasible_phases(state.link_occ, g.links, g.offsets, g.tx, g.period,
                              g.latency, 64)

    def greedy(k):
        for d, g in zip(demands, geoms):
            queued = np.array([u != d.tree.root for u, _ in d.tree.edges], dtype=np.bool_)
            k.greedy_place(state.link_occ, state.queue_occ, g.links, g.parent, queued,
                           g.tail, g.tx, g.hop, g.period, g.period)

    cg = build_conflict_graph(state, rest)
    period = np.array([g.period for g in geoms], dtype=np.int64)
    tx = np.array([g.tx for g in geoms], dtype=np.int64)
    alive = np.diff(cg.color_ptr) > 0
    pa, pb, sptr, oa, ob = _shared_link_pairs(geoms, alive)
    eu, ev = kernels.conflict_edges(cg.phases, cg.color_ptr, period, tx, pa, pb, sptr, oa, ob)

    rank = np.arange(len(demands), dtype=np.int64)
    cases["feasible_phases"] = phases
    cases["greedy_place"] = greedy
    cases["conflict_edges"] = lambda k: k.conflict_edges(
        cg.phases, cg.color_ptr, period, tx, pa, pb, sptr, oa, ob)
    cases["edges_to_csr"] = lambda k: k.edges_to_csr(eu, ev, cg.n_vertices)
    cases["gfh_solve"] = lambda k: k.gfh_solve(
        cg.indptr, cg.indices, cg.v_color.astype(np.int64), cg.color_ptr, rank,
        cg.color_group, cg.group_ptr, cg.group_colors)
    info = f"{cg.n_vertices} vertices, {cg.n_edges} edges, {len(demands)} colours"
    return cases, info


class _Variant:
    """Expose one backend's kernels under the public names."""

    def __init__(self, suffix):
        for name in ("bfs_all_pairs", "feasible_phases", "greedy_place",
                     "conflict_edges", "edges_to_csr", "gfh_solve"):
            setattr(self, name, getattr(kernels, f"{name}_{suffix}"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    kernels.warmup()
    cases, info = build_cases(args.seed)
    print(f"conflict graph: {info}")
    nb, np_ = _Variant("nb"), _Variant("np")
    print(f"{'kernel':<18}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fn in cases.items():
        t_nb = best_of(lambda: fn(nb), args.repeat)
        t_np = best_of(lambda: fn(np_), max(1, args.repeat // 2))
        print(f"{name:<18}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
