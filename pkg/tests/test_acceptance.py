"""Acceptance criteria, one test each.

Every test records a single pass/fail line; ``conftest.py`` prints them in
the terminal summary. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import json
from fractions import Fraction

import numpy as np
import pytest

from tiny import naive_optimum, tiny_instance
from tsnpart.harness import RunConfig, run_scenario
from tsnpart.netgraph import TopologyKind, gen_topology
from tsnpart.partition import partition_stream
from tsnpart.sched_cgraph import schedule_gfh
from tsnpart.sched_exact import exact_max_admit
from tsnpart.sched_greedy import schedule_greedy
from tsnpart.timing import throughput, validate_schedule
from tsnpart.workload import (
    FIVE_LEVEL, THREE_LEVEL, Scenario, Stream, apply_iteration, gen_scenario, gen_streams,
)

REPORT: list[str] = []


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    REPORT.append(line)
    print(line)
    return ok


def profile_for(net):
    return FIVE_LEVEL if len(net.end_devices) > 16 else THREE_LEVEL


def stripped(metrics):
    return json.dumps([{k: v for k, v in m.row().items() if k != "runtime_us"} for m in metrics])


def test_criterion_1_validity():
    rng = np.random.default_rng(1)
    kinds = list(TopologyKind)
    scenarios = iterations = violations = 0
    failures = []
    for i in range(200):
        kind = kinds[i % len(kinds)]
        seed = (i // len(kinds)) % 10
        n = int(rng.integers(8, 50))
        net = gen_topology(kind, n, seed=seed)
        scn = gen_scenario(net, 60, 15, 8, 4, profile_for(net), seed=i)
        thr = int(rng.integers(0, 5))
        part = bool(rng.random() < 0.8)
        for sched in ("greedy", "gfh"):
            def hook(s):
                nonlocal iterations, violations
                rep = validate_schedule(s.schedule)
                iterations += 1
                if not rep.ok:
                    violations += len(rep.violations)
                    failures.append((kind.value, n, seed, sched, s.index, str(rep.violations[0])))

            run_scenario(RunConfig(scheduler=sched, threshold=thr, partition=part), net, scn,
                         on_iteration=hook)
        scenarios += 1
    ok = record(1, violations == 0,
                f"{scenarios} scenarios x 2 schedulers, {iterations} schedule states, "
                f"{violations} violations")
    assert ok, failures[:5]


def test_criterion_2_oracle():
    exact_bad, heur_bad = [], {"greedy": [], "gfh": []}
    for seed in range(500):
        inst = tiny_instance(seed)
        res = exact_max_admit(inst.fresh(), inst.groups)
        count, assign = naive_optimum(inst)
        if not res.optimal or res.n_admitted != count or res.best_admitted != assign:
            exact_bad.append(seed)
        st, _ = schedule_greedy(inst.fresh(), inst.groups)
        if len(st.parents()) > count:
            heur_bad["greedy"].append((seed, len(st.parents()), count))
        st, _ = schedule_gfh(inst.fresh(), inst.groups)
        if len(st.parents()) > count:
            heur_bad["gfh"].append((seed, len(st.parents()), count))
    ok = not exact_bad and not heur_bad["greedy"] and not heur_bad["gfh"]
    record(2, ok,
           f"500 tiny instances; exact vs enumeration mismatches {len(exact_bad)}; "
           f"greedy above optimum {heur_bad['greedy']}; gfh above optimum {heur_bad['gfh']}")
    assert ok, (exact_bad[:5], heur_bad)


def test_criterion_3_partitioning():
    rng = np.random.default_rng(3)
    nets = [gen_topology(k, n, seed=s) for k in TopologyKind for n in (8, 20, 49) for s in (0, 1)]
    bad = []
    for i in range(10_000):
        net = nets[i % len(nets)]
        dist = net.distances
        ends = net.end_devices
        diameter = int(dist.max())
        s = gen_streams(1, net, THREE_LEVEL, seed=int(rng.integers(2**31)), start_id=i)[0]
        t = int(rng.integers(0, diameter + 2))
        groups = [tuple(g) for g in partition_stream(s, dist, t).groups]
        flat = [x for g in groups for x in g]
        if sorted(flat) != list(s.destinations) or len(set(flat)) != len(flat):
            bad.append((i, "cover"))
        for g in groups:
            for x in g:
                if len(g) > 1 and min(dist[x, y] for y in g if y != x) > t:
                    bad.append((i, "proximity"))
        if len(partition_stream(s, dist, 0).groups) != len(s.destinations):
            bad.append((i, "t=0"))
        if len(partition_stream(s, dist, diameter).groups) != 1:
            bad.append((i, "t>=diameter"))
        assert set(s.destinations) <= set(ends)
    ok = record(3, not bad, f"10000 (stream, threshold) pairs, {len(bad)} invariant failures")
    assert ok, bad[:5]


def test_criterion_4_throughput():
    hand = [
        ([Stream(0, 10, (11, 12), 500, 1000)], Fraction(32)),
        ([Stream(0, 10, (11,), 250, 1500)], Fraction(48)),
        ([Stream(0, 10, (11, 12, 13), 2000, 64), Stream(1, 11, (10,), 1000, 125)],
         Fraction(3 * 512, 2000) + 1),
    ]
    hand_ok = all(throughput(s) == want for s, want in hand)
    same = recomputed = 0
    mismatch = []
    for seed in range(20):
        net = gen_topology("waxman", 12, seed=seed)
        scn = gen_scenario(net, 8, 4, 3, 3, THREE_LEVEL, seed=seed)
        runs = {}
        for label, cfg in (("part", RunConfig(scheduler="gfh", threshold=0)),
                           ("none", RunConfig(scheduler="gfh", partition=False))):
            seen = []

            def hook(s, seen=seen):
                nonlocal recomputed
                want = sum((Fraction(x.frame_bytes * 8 * len(x.destinations), x.period_us)
                            for x in s.admitted.values()), Fraction(0))
                seen.append((frozenset(s.admitted), want))
                recomputed += 1

            runs[label] = (run_scenario(cfg, net, scn, on_iteration=hook), seen)
        for (ma, (ida, wa)), (mb, (idb, wb)) in zip(zip(*runs["part"]), zip(*runs["none"])):
            if ma.throughput_bits_per_us != wa or mb.throughput_bits_per_us != wb:
                mismatch.append((seed, ma.iteration, "recompute"))
            if ida == idb:
                same += 1
                if ma.throughput_bits_per_us != mb.throughput_bits_per_us:
                    mismatch.append((seed, ma.iteration, "partitioned vs not"))
    ok = hand_ok and not mismatch and same > 0
    record(4, ok, f"hand cases {'exact' if hand_ok else 'WRONG'}; {recomputed} iterations "
                  f"recomputed; {same} equal admitted sets across partitioned/unpartitioned, "
                  f"{len(mismatch)} mismatches")
    assert ok, mismatch[:5]


def ten_seed_runs(scheduler, thr, seed):
    net = gen_topology("erdos_renyi", 49, seed=seed)
    scn = gen_scenario(net, 250, 40, 20, 20, FIVE_LEVEL, seed=seed)
    part = run_scenario(RunConfig(scheduler=scheduler, threshold=thr), net, scn)
    none = run_scenario(RunConfig(scheduler=scheduler, partition=False), net, scn)
    return part, none


def directional(n, scheduler, thr, runtime_cap_us, need_rejections):
    rej_wins = tp_wins = 0
    max_rt = 0
    per_seed = []
    for seed in range(10):
        part, none = ten_seed_runs(scheduler, thr, seed)
        a, b = part[-1], none[-1]
        rej_wins += a.cumulative_rejected <= b.cumulative_rejected
        tp_wins += a.throughput_bits_per_us >= b.throughput_bits_per_us
        max_rt = max(max_rt, *(m.runtime_us for m in part + none))
        per_seed.append((seed, a.cumulative_rejected, b.cumulative_rejected,
                         round(float(a.throughput_bits_per_us)), round(float(b.throughput_bits_per_us))))
    ok = tp_wins >= 7 and max_rt <= runtime_cap_us and (rej_wins >= 7 or not need_rejections)
    record(n, ok, f"{scheduler} t={thr} vs none over 10 seeds: rejections <= in {rej_wins}/10, "
                  f"throughput >= in {tp_wins}/10, max iteration {max_rt / 1e6:.3f} s "
                  f"(cap {runtime_cap_us / 1e6:g} s)")
    return ok, per_seed


def test_criterion_5_gfh_direction():
    ok, per_seed = directional(5, "gfh", 4, 1_000_000, need_rejections=True)
    assert ok, per_seed


def test_criterion_6_greedy_direction():
    ok, per_seed = directional(6, "greedy", 3, 100_000, need_rejections=False)
    assert ok, per_seed


def test_criterion_7_update_rule():
    triples = 0
    bad = []
    seed = 0
    while triples < 1000:
        net = gen_topology(list(TopologyKind)[seed % 5], 10, seed=seed)
        scn = gen_scenario(net, 15, 6, 5, 9, THREE_LEVEL, seed=seed)
        sched = ("greedy", "gfh")[seed % 2]

        def hook(s):
            nonlocal triples
            triples += 1
            gone = set(s.delta.delete)
            want = {i: x for i, x in s.admitted_before.items() if i not in gone}
            want.update({x.id: x for x in s.delta.add if x.id not in set(s.rejected)})
            if s.admitted != apply_iteration(s.admitted_before, s.delta, s.rejected) or s.admitted != want:
                bad.append((seed, s.index))

        run_scenario(RunConfig(scheduler=sched, threshold=seed % 4), net, scn, on_iteration=hook)
        seed += 1
    ok = record(7, not bad, f"{triples} iteration triples over {seed} runs, {len(bad)} mismatches")
    assert ok, bad[:5]


def test_criterion_8_determinism():
    cases = 0
    differ = []
    for seed in range(3):
        net = gen_topology("barabasi_albert", 20, seed=seed)
        scn = gen_scenario(net, 60, 15, 8, 5, FIVE_LEVEL, seed=seed)
        for cfg in (RunConfig(scheduler="greedy", threshold=3, seed=seed),
                    RunConfig(scheduler="gfh", threshold=4, seed=seed),
                    RunConfig(scheduler="gfh", partition=False, seed=seed)):
            cases += 1
            if stripped(run_scenario(cfg, net, scn)) != stripped(run_scenario(cfg, net, scn)):
                differ.append((seed, cfg.scheduler, cfg.threshold_label))
    for seed in range(10):
        inst = tiny_instance(seed)
        scn = Scenario(inst.net.name, tuple(inst.streams))
        cfg = RunConfig(scheduler="exact", timing=inst.timing, threshold=1)
        cases += 1
        if stripped(run_scenario(cfg, inst.net, scn)) != stripped(run_scenario(cfg, inst.net, scn)):
            differ.append((seed, "exact"))
    ok = record(8, not differ, f"{cases} configurations run twice, {len(differ)} differing row sets")
    assert ok, differ
