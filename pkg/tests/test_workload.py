from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsnpart.netgraph import gen_topology, line_network
from tsnpart.workload import (
    FIVE_LEVEL,
    THREE_LEVEL,
    IterationDelta,
    Scenario,
    ScenarioError,
    Stream,
    apply_iteration,
    check_scenario,
    dumps_scenario,
    gen_scenario,
    gen_streams,
    loads_scenario,
    read_scenario,
    write_scenario,
)


@pytest.fixture(scope="module")
def er49():
    return gen_topology("erdos_renyi", 49, seed=0)


def mk(i, src=49, dsts=(50,), period=500, size=1000):
    return Stream(i, src, dsts, period, size)


def test_stream_invariants():
    s = mk(1, dsts=(52, 50))
    assert s.destinations == (50, 52)
    assert s.deadline_us == s.period_us
    for bad in [dict(dsts=()), dict(dsts=(49,)), dict(dsts=(50, 50)), dict(period=0),
                dict(size=0)]:
        with pytest.raises(ScenarioError):
            mk(1, **bad)


def test_three_level_frequencies(er49):
    streams = gen_streams(4000, er49, THREE_LEVEL, seed=11)
    freq = Counter(len(s.destinations) for s in streams)
    for k, want in zip((1, 2, 4), (0.5, 0.25, 0.25)):
        assert abs(freq[k] / 4000 - want) <= 0.03


def test_five_level_mean(er49):
    streams = gen_streams(16000, er49, FIVE_LEVEL, seed=5)
    mean = np.mean([len(s.destinations) for s in streams])
    assert abs(mean - 2.9) <= 0.2


def test_draws_from_profile_sets(er49):
    streams = gen_streams(500, er49, seed=2)
    ends = set(er49.end_devices)
    for s in streams:
        assert s.period_us in FIVE_LEVEL.periods_us
        assert s.frame_bytes in FIVE_LEVEL.frame_sizes
        assert s.source in ends and set(s.destinations) <= ends
        assert s.source not in s.destinations
    assert {s.period_us for s in streams} == set(FIVE_LEVEL.periods_us)
    assert {s.frame_bytes for s in streams} == set(FIVE_LEVEL.frame_sizes)


def test_small_counts(er49):
    assert gen_streams(0, er49) == []
    (one,) = gen_streams(1, er49, seed=3)
    assert one.deadline_us == one.period_us
    with pytest.raises(ScenarioError, match="end devices"):
        gen_streams(1, line_network(5), FIVE_LEVEL)


def test_apply_iteration_examples():
    s1, s2, s3, s4 = (mk(i) for i in range(1, 5))
    assert apply_iteration({}, IterationDelta(add=(s1,)), []) == {1: s1}
    got = apply_iteration({1: s1, 2: s2}, IterationDelta(add=(s3, s4), delete=(1,)), [4])
    assert got == {2: s2, 3: s3}
    assert apply_iteration({1: s1}, IterationDelta(), []) == {1: s1}


def test_apply_iteration_errors():
    s1, s2 = mk(1), mk(2)
    with pytest.raises(ScenarioError, match="not admitted"):
        apply_iteration({}, IterationDelta(delete=(1,)), [])
    with pytest.raises(ScenarioError, match="never added"):
        apply_iteration({}, IterationDelta(add=(s1,)), [2])
    with pytest.raises(ScenarioError, match="already admitted"):
        apply_iteration({1: s1}, IterationDelta(add=(s1,)), [])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_apply_iteration_set_algebra(data):
    ids = data.draw(st.sets(st.integers(0, 40), max_size=15))
    admitted = {i: mk(i) for i in ids}
    dele = data.draw(st.sets(st.sampled_from(sorted(ids)), max_size=len(ids))) if ids else set()
    add_ids = data.draw(st.sets(st.integers(41, 80), max_size=10))
    rej = data.draw(st.sets(st.sampled_from(sorted(add_ids)))) if add_ids else set()
    delta = IterationDelta(add=tuple(mk(i) for i in sorted(add_ids)), delete=tuple(sorted(dele)))
    out = apply_iteration(admitted, delta, rej)
    assert set(out) == (ids - dele) | (add_ids - rej)
    assert not set(out) & dele and not set(out) & rej


def test_full_size_scenario(er49):
    scn = gen_scenario(er49, 250, 40, 20, 20, FIVE_LEVEL, seed=0)
    assert len(scn.all_streams()) == 250 + 20 * 40
    assert len(scn.iterations()) == 21
    assert all(len(d.delete) == 20 for d in scn.deltas)
    ids = [s.id for s in scn.all_streams()]
    assert ids == list(range(1050))
    cp = gen_scenario(er49, 150, 20, 10, 10, FIVE_LEVEL, seed=0)
    assert len(cp.all_streams()) == 350
    only = gen_scenario(er49, 10, 40, 20, 0, seed=1)
    assert only.deltas == () and len(only.iterations()) == 1
    assert Scenario("x", ()).iterations() == []


def test_deletions_target_present_streams(er49):
    scn = gen_scenario(er49, 30, 10, 25, 6, FIVE_LEVEL, seed=9)
    present = {s.id for s in scn.initial}
    for d in scn.deltas:
        assert set(d.delete) <= present
        present -= set(d.delete)
        present |= {s.id for s in d.add}


def test_scenario_round_trip_and_determinism(er49, tmp_path):
    a = gen_scenario(er49, 40, 8, 4, 5, seed=7)
    b = gen_scenario(er49, 40, 8, 4, 5, seed=7)
    assert dumps_scenario(a) == dumps_scenario(b)
    assert dumps_scenario(loads_scenario(dumps_scenario(a))) == dumps_scenario(a)
    write_scenario(a, tmp_path / "s.json")
    assert read_scenario(tmp_path / "s.json") == a
    assert dumps_scenario(gen_scenario(er49, 40, 8, 4, 5, seed=8)) != dumps_scenario(a)


def test_check_scenario(er49):
    scn = gen_scenario(er49, 5, 0, 0, 0, seed=1)
    check_scenario(scn, er49)
    with pytest.raises(ScenarioError, match="topology"):
        check_scenario(Scenario("other", scn.initial), er49)
    bad = Scenario(er49.name, (Stream(0, 0, (50,), 500, 125),))
    with pytest.raises(ScenarioError, match="not an end device"):
        check_scenario(bad, er49)
    dup = Scenario(er49.name, (mk(0), mk(0)))
    with pytest.raises(ScenarioError, match="duplicate"):
        check_scenario(dup, er49)
