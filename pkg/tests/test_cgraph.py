import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import b, e
from tsnpart import kernels
from tsnpart.mtree import build_tree
from tsnpart.netgraph import gen_topology, line_network
from tsnpart.partition import SubStream, partition_batch
from tsnpart.sched_cgraph import (
    ConflictGraph, IcsResult, build_conflict_graph, commit_ics, gfh_solve, schedule_gfh,
)
from tsnpart.timing import Demand, Schedule, TimingConfig, make_groups, validate_schedule
from tsnpart.workload import THREE_LEVEL, gen_streams

T = TimingConfig()


def demand(net, pid, src, dsts, period=250, size=1000, idx=0):
    s = SubStream(pid, idx, src, tuple(sorted(dsts)), period, size)
    return Demand(s, build_tree(net, net.distances, src, s.destinations))


def synthetic(counts, edges, groups, sizes=None):
    """Conflict graph from candidate counts per colour and explicit edges.

    ``groups`` lists colour indices per atomic group, in colour order.
    """
    sizes = sizes or [100] * len(counts)
    demands = []
    for gi, cols in enumerate(groups):
        for j, c in enumerate(cols):
            demands.append(Demand(SubStream(gi, j, 0, (1,), 100, sizes[c]), None))
    color_ptr = np.r_[0, np.cumsum(counts)].astype(np.int64)
    n_v = int(color_ptr[-1])
    eu = np.array([u for u, _ in edges], dtype=np.int64)
    ev = np.array([v for _, v in edges], dtype=np.int64)
    indptr, indices = kernels.edges_to_csr(eu, ev, n_v)
    phases = np.concatenate([np.arange(k) for k in counts]).astype(np.int64) if n_v else np.empty(0, np.int64)
    group_ptr = np.r_[0, np.cumsum([len(g) for g in groups])].astype(np.int64)
    color_group = np.repeat(np.arange(len(groups)), [len(g) for g in groups]).astype(np.int64)
    return ConflictGraph(demands, color_ptr, phases, indptr, indices, group_ptr,
                         np.arange(len(counts), dtype=np.int64), color_group)


def check_ics(g, res):
    adj = set(g.edge_list())
    vs = sorted(res.chosen.values())
    for u, v in itertools.combinations(vs, 2):
        assert (u, v) not in adj
    colors = g.v_color
    assert len({int(colors[v]) for v in vs}) == len(vs)
    for key, v in res.chosen.items():
        assert g.demands[int(colors[v])].key == key
    assert not set(res.chosen) & res.rejected_colors
    assert set(res.chosen) | res.rejected_colors == {d.key for d in g.demands}


# build_conflict_graph


def test_one_substream_no_edges(line5):
    g = build_conflict_graph(Schedule(line5, T, 250), [[demand(line5, 0, e(1), (e(3),))]], k_max=4)
    assert g.n_vertices == 4 and g.n_edges == 0
    assert g.phases.tolist() == [0, 1, 2, 3]


def test_identical_unicasts_conflict(line5):
    groups = [[demand(line5, 0, e(1), (e(3),))], [demand(line5, 1, e(1), (e(3),))]]
    g = build_conflict_graph(Schedule(line5, T, 250), groups, k_max=1)
    assert g.n_vertices == 2 and g.edge_list() == [(0, 1)]


def test_infeasible_deadline_marks_unschedulable():
    long = line_network(21)
    g = build_conflict_graph(Schedule(long, T, 250), [[demand(long, 0, 21, (41,), size=1500)]])
    assert g.n_vertices == 0 and g.unschedulable == {0}


def test_disjoint_links_do_not_conflict(line5):
    groups = [[demand(line5, 0, e(1), (e(2),))], [demand(line5, 1, e(4), (e(5),))]]
    g = build_conflict_graph(Schedule(line5, T, 250), groups, k_max=8)
    assert g.n_edges == 0


def test_rejects_bad_k_max(line5):
    with pytest.raises(ValueError):
        build_conflict_graph(Schedule(line5, T, 250), [], k_max=0)


def brute_edges(state, g):
    """Edges by explicit cell sets over the full hypercycle."""
    cells = []
    for v in range(g.n_vertices):
        cfg = g.config(v, T)
        s = set()
        tx = -(-cfg.sub.frame_bytes * 8 // T.link_rate_bits_per_us)
        for h in cfg.hops:
            lid = state.net.link_index[(h.u, h.v)]
            for base in range(0, state.hypercycle_us, cfg.sub.period_us):
                s.update((lid, (base + h.start + j) % state.hypercycle_us) for j in range(tx))
        cells.append(s)
    colors = g.v_color
    out = []
    for u in range(g.n_vertices):
        for v in range(u + 1, g.n_vertices):
            if colors[u] != colors[v] and cells[u] & cells[v]:
                out.append((u, v))
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_edges_match_explicit_cells(seed):
    net = gen_topology("waxman", 6, seed=seed % 7)
    streams = gen_streams(5, net, THREE_LEVEL, seed=seed)
    hyper = 2000
    state = Schedule(net, T, hyper)
    groups = make_groups(partition_batch(streams, net.distances, 1, True), net, net.distances)
    g = build_conflict_graph(state, groups, k_max=6)
    assert g.edge_list() == brute_edges(state, g)


# gfh_solve


def test_single_color_committed():
    g = synthetic([3], [], [[0]])
    r = gfh_solve(g)
    assert list(r.chosen.values()) == [0] and not r.rejected_colors


def test_two_conflicting_singletons_one_wins():
    g = synthetic([1, 1], [(0, 1)], [[0], [1]])
    r = gfh_solve(g)
    assert len(r.chosen) == 1 and len(r.rejected_colors) == 1
    check_ics(g, r)


def test_three_compatible_colors_tropical():
    g = synthetic([2, 2, 2], [(0, 2), (2, 4)], [[0], [1], [2]])
    r = gfh_solve(g)
    assert len(r.chosen) == 3 and not r.rejected_colors
    check_ics(g, r)


def test_prefers_fewest_conflicts_then_smaller_phase():
    # colour 0's phase 0 conflicts twice, phase 1 once, phase 2 once
    g = synthetic([3, 2, 1], [(0, 3), (0, 5), (1, 4), (2, 4)], [[0], [1], [2]])
    r = gfh_solve(g)
    # colour 2 goes first (one candidate), deleting vertex 0
    assert r.chosen[(2, 0)] == 5
    check_ics(g, r)
    assert len(r.chosen) == 3


def test_group_rollback_restores_graph():
    # group 0 = colours 0,1 whose only candidates conflict with each other;
    # colour 2 only conflicts with colour 0's candidate, so it survives the rollback
    g = synthetic([1, 1, 1], [(0, 1), (0, 2)], [[0, 1], [2]], sizes=[1500, 1500, 64])
    r = gfh_solve(g)
    assert r.rejected_colors == {(0, 0), (0, 1)}
    assert r.chosen == {(1, 0): 2}


def test_graph_arrays_untouched():
    g = synthetic([2, 2, 1], [(0, 2), (1, 4), (3, 4)], [[0, 1], [2]])
    before = (g.indptr.tobytes(), g.indices.tobytes(), g.color_ptr.tobytes())
    gfh_solve(g)
    assert (g.indptr.tobytes(), g.indices.tobytes(), g.color_ptr.tobytes()) == before


def random_graph(draw_counts, edge_bits):
    counts = draw_counts
    color_ptr = np.r_[0, np.cumsum(counts)]
    colors = np.repeat(np.arange(len(counts)), counts)
    pairs = [(u, v) for u in range(len(colors)) for v in range(u + 1, len(colors))
             if colors[u] != colors[v]]
    return counts, [p for p, bit in zip(pairs, edge_bits) if bit]


def exhaustive_best(g):
    colors = g.v_color
    adj = set(g.edge_list())
    best = 0
    for r in range(1, g.n_vertices + 1):
        for vs in itertools.combinations(range(g.n_vertices), r):
            if len({int(colors[v]) for v in vs}) < r:
                continue
            if any((u, v) in adj for u, v in itertools.combinations(vs, 2)):
                continue
            best = r
            break
        if best < r:
            break
    return best


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=5), st.lists(st.booleans(), min_size=80, max_size=80))
def test_gfh_admits_when_an_ics_exists(counts, bits):
    counts = counts[: max(1, len(counts))]
    while sum(counts) > 12:
        counts[counts.index(max(counts))] -= 1
    counts, edges = random_graph(counts, bits)
    g = synthetic(counts, edges, [[c] for c in range(len(counts))])
    r = gfh_solve(g)
    check_ics(g, r)
    best = exhaustive_best(g)
    assert len(r.chosen) <= best
    if best >= 1:
        assert len(r.chosen) >= 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=6), st.lists(st.booleans(), min_size=200, max_size=200),
       st.integers(0, 2**16))
def test_gfh_groups_atomic(counts, bits, split_seed):
    counts, edges = random_graph(counts, bits)
    rng = np.random.default_rng(split_seed)
    groups, cur = [], []
    for c in range(len(counts)):
        cur.append(c)
        if rng.random() < 0.5:
            groups.append(cur)
            cur = []
    if cur:
        groups.append(cur)
    g = synthetic(counts, edges, groups)
    r = gfh_solve(g)
    check_ics(g, r)
    for gi, cols in enumerate(groups):
        states = {(gi, j) in r.chosen for j in range(len(cols))}
        assert len(states) == 1


# commit_ics and schedule_gfh


def test_commit_empty_result_is_noop(line5):
    st_ = Schedule(line5, T, 250)
    g = build_conflict_graph(st_, [[demand(line5, 0, e(1), (e(3),))]])
    before = st_.link_occ.tobytes()
    commit_ics(st_, g, IcsResult())
    assert st_.link_occ.tobytes() == before


def test_commit_grows_by_interval_count(line5):
    st_ = Schedule(line5, T, 500)
    d = demand(line5, 0, e(1), (e(3), e(5)))
    g = build_conflict_graph(st_, [[d]])
    commit_ics(st_, g, gfh_solve(g))
    # 7 tree edges, 2 repetitions, 8 slots each
    assert int((st_.link_occ != -1).sum()) == 7 * 2 * 8


def test_commit_three_compatible_validates(line5):
    st_ = Schedule(line5, T, 250)
    groups = [[demand(line5, i, e(1), (e(3),))] for i in range(3)]
    g = build_conflict_graph(st_, groups, k_max=32)
    r = gfh_solve(g)
    assert len(r.chosen) == 3
    commit_ics(st_, g, r)
    assert validate_schedule(st_).ok


def test_schedule_gfh_keeps_existing(line5):
    st_ = Schedule(line5, T, 250)
    schedule_gfh(st_, [[demand(line5, 0, e(1), (e(3),))]])
    kept = st_.link_occ.copy()
    schedule_gfh(st_, [[demand(line5, i, e(1), (e(3),))] for i in range(1, 40)])
    mask = kept != -1
    assert (st_.link_occ[mask] == kept[mask]).all()
    assert validate_schedule(st_).ok
    assert 1 < len(st_.parents()) < 40


@pytest.fixture(scope="module")
def ba20():
    return gen_topology("barabasi_albert", 20, seed=2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 4))
def test_schedule_gfh_valid_and_atomic(ba20, seed, thr):
    streams = gen_streams(80, ba20, THREE_LEVEL, seed=seed)
    groups = make_groups(partition_batch(streams, ba20.distances, thr, True), ba20, ba20.distances)
    st_, dec = schedule_gfh(Schedule(ba20, T, 2000), groups)
    assert validate_schedule(st_).ok
    by_parent = {}
    for x in dec:
        by_parent.setdefault(x.key[0], set()).add(x.admitted)
    assert all(len(v) == 1 for v in by_parent.values())
    again, _ = schedule_gfh(Schedule(ba20, T, 2000), groups)
    assert again.link_occ.tobytes() == st_.link_occ.tobytes()
