import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridseer import (Emst, construct_emst, find_basic_set, fixture_path, is_observable,
                      measured_subgraph, parse_case, subnetwork_observable, validate_emst)
from gridseer.grid import GridError
from gridseer.synthetic import random_instance

from oracles import emst_exists, fraction_rank, jacobian_rows


def case(lines, meters):
    buses = sorted({b for ln in lines for b in ln[:2]})
    return parse_case(json.dumps({
        "buses": [{"id": b, "reference": b == 1} for b in buses],
        "lines": [{"from": i, "to": j, "x": x} for i, j, x in lines],
        "meters": meters,
    }))


def test_corner_observable_and_basic_set(corner):
    _, meters = corner
    assert is_observable(meters, targets=())
    assert not is_observable(meters)  # buses 3 and 7..14 are unmeasured
    assert find_basic_set(meters).meter_ids == ("r1", "r2", "r4", "r5")


def test_corner_golden_mapping(corner):
    _, meters = corner
    emst = construct_emst(meters, measured_subgraph(meters), find_basic_set(meters))
    assert emst.mapping == {(1, 2): "r1", (1, 5): "r2", (4, 5): "r4", (5, 6): "r5"}
    assert (2, 5) not in emst.tree_edges
    assert emst.vertices == {1, 2, 4, 5, 6}


def test_single_flow_meter_certificate():
    _, meters = case([(1, 2, 0.3), (2, 3, 0.4)], [{"id": "f", "kind": "flow", "line": [1, 2]}])
    obs = is_observable(meters)
    assert not obs and obs.unobservable_buses == (3,)
    c = obs.certificate
    assert np.allclose(meters.jacobian.matrix @ c, 0) and abs(c[1]) > 0 and c[0] == 0


def test_ieee14_survives_any_redundant_deletion(ieee14):
    net, meters = ieee14
    for mid in meters.ids:
        rest = [m for m in meters.ids if m != mid]
        expected = fraction_rank(jacobian_rows(net, list(meters), set(rest), exact=True)[0]) == net.n
        assert bool(is_observable(meters, rest)) == expected


def test_basic_set_of_square_system_is_everything():
    _, meters = case([(1, 2, 0.3), (2, 3, 0.4)], [
        {"id": "a", "kind": "flow", "line": [2, 3]}, {"id": "b", "kind": "injection", "bus": 1}])
    assert find_basic_set(meters).meter_ids == ("a", "b")


def test_basic_set_requires_observability():
    # one injection meter cannot pin down both of its neighbours
    _, meters = case([(1, 2, 0.3), (2, 3, 0.4)], [{"id": "p", "kind": "injection", "bus": 2}])
    with pytest.raises(ValueError):
        find_basic_set(meters)


def test_two_bus_trivial_tree():
    _, meters = case([(1, 2, 0.5)], [{"id": "f", "kind": "flow", "line": [1, 2]}])
    emst = construct_emst(meters)
    assert emst.tree_edges == ((1, 2),) and emst.mapping == {(1, 2): "f"}


def test_57_bus_spanning_tree():
    _, meters = parse_case(fixture_path("ieee57.json"))
    emst = construct_emst(meters)
    assert len(emst.tree_edges) == 56 and len(emst.vertices) == 57
    assert validate_emst(meters, emst) == (True, [])


def test_validate_reports_each_condition(corner):
    _, meters = corner
    good = construct_emst(meters)
    bad_map = dict(good.mapping)
    bad_map[(4, 5)] = "r2"  # injection at bus 1 does not measure line (4,5)
    bad_map[(1, 5)] = "r3"
    ok, problems = validate_emst(meters, Emst(good.vertices, good.tree_edges, bad_map, 1))
    assert not ok and any(p.startswith("condition 2") for p in problems)

    dup = dict(good.mapping)
    dup[(1, 5)] = "r1"
    dup[(1, 2)] = "r1"
    ok, problems = validate_emst(meters, Emst(good.vertices, good.tree_edges, dup, 1))
    assert not ok and any(p.startswith("condition 3") for p in problems)

    sub = Emst(frozenset({4, 5, 6}), ((4, 5), (5, 6)), {(4, 5): "r4", (5, 6): "r5"}, 1)
    ok, problems = validate_emst(meters, sub)
    assert not ok and any(p.startswith("condition 1") for p in problems)

    cyc = Emst(good.vertices, good.tree_edges + ((2, 5),), {**good.mapping, (2, 5): "r3"}, 1)
    ok, problems = validate_emst(meters, cyc)
    assert not ok and any(p.startswith("tree") for p in problems)


def test_construction_is_deterministic(ieee14):
    _, meters = ieee14
    assert construct_emst(meters) == construct_emst(meters)


@st.composite
def instances(draw):
    n = draw(st.integers(2, 10))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return random_instance(rng, n, draw(st.integers(0, 4)), n - 1 - draw(st.integers(0, 2)),
                           draw(st.integers(2, 4)), observable=True)


@settings(max_examples=50, deadline=None)
@given(instances())
def test_random_observable_instances(inst):
    net, meters = inst
    basic = find_basic_set(meters)
    assert len(basic) == net.n
    rows = jacobian_rows(net, list(meters), set(basic.meter_ids), exact=True)[0]
    assert fraction_rank(rows) == net.n
    emst = construct_emst(meters)
    assert validate_emst(meters, emst) == (True, [])
    assert len(emst.vertices) == len(net.buses)  # spanning special case
    assert emst_exists(net, list(meters), set(meters.ids))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_subnetwork_equivalence_sample(seed, data):
    rng = np.random.default_rng(seed)
    net, meters = random_instance(rng, int(rng.integers(2, 8)), int(rng.integers(0, 3)),
                                  int(rng.integers(0, 5)), int(rng.integers(0, 3)))
    ids = data.draw(st.lists(st.sampled_from(meters.ids), unique=True) if len(meters) else st.just([]))
    got = subnetwork_observable(meters, ids)
    assert got == emst_exists(net, list(meters), set(ids))
    if got and ids:
        emst = construct_emst(meters, measured_subgraph(meters, ids), find_basic_set(meters, ids))
        assert validate_emst(meters, emst)[0]
        assert emst.vertices == measured_subgraph(meters, ids).vertices


def test_unknown_target_ids_are_rejected(ieee14):
    with pytest.raises(GridError):
        is_observable(ieee14[1], ["zz"])
