import json

import numpy as np
import pytest

from gridseer import (ProtectionInfeasible, UnobservableError, find_basic_set, fixture_path,
                      parse_case, protect_exact, protect_tph, validate_emst, verify_protection)

from oracles import fraction_rank, jacobian_rows, min_protection_cost
from suites import protection_suite


def protected_by_oracle(net, meters, ids, targets):
    """Exact check: each target's unit vector lies in the row space of H(ids)."""
    rows, state = jacobian_rows(net, list(meters), set(ids), exact=True)
    r = fraction_rank(rows)
    for b in targets:
        unit = [1 if s == b else 0 for s in state]
        if fraction_rank(rows + [unit]) != r:
            return False
    return True


@pytest.fixture(scope="module")
def pruning():
    return parse_case(fixture_path("pruning.json"))


def test_single_adjacent_target(ieee14):
    _, meters = ieee14
    plan = protect_exact(meters, [2])
    assert plan.meters == ("f1_2",) and plan.cost == 1.0 and plan.optimal


def test_pruning_first_round(pruning):
    _, meters = pruning
    plan = protect_tph(meters, [5, 8])
    assert plan.stats["history"][0] == [1, 3, 4, 5, 6, 7, 8]
    assert 7 in plan.witness.vertices  # kept: p6 also measures bus 7
    assert plan.cost == protect_exact(meters, [5, 8]).cost


def test_all_buses_targeted_means_no_pruning(ieee14):
    net, meters = ieee14
    plan = protect_tph(meters, net.state_buses)
    assert len(plan.witness.vertices) == 14 and len(plan.meters) == 13
    assert plan.stats["rounds"] == 1


def test_basic_set_defends_everything(ieee14):
    net, meters = ieee14
    assert verify_protection(meters, find_basic_set(meters).meter_ids, net.state_buses)


def test_witness_satisfies_demands(ieee14):
    net, meters = ieee14
    D = list(net.neighbors(net.reference))
    for planner in (protect_exact, protect_tph):
        plan = planner(meters, D)
        assert set(D) | {1} <= plan.witness.vertices
        assert set(plan.witness.meters) <= set(plan.meters)
        assert validate_emst(meters, plan.witness) == (True, [])
        assert plan.cost == pytest.approx(meters.cost(plan.meters))


def test_target_validation(ieee14, corner):
    _, meters = ieee14
    with pytest.raises(ValueError):
        protect_exact(meters, [])
    with pytest.raises(ValueError):
        protect_tph(meters, [1, 5])
    with pytest.raises(ValueError):
        protect_exact(meters, [99])
    with pytest.raises(ProtectionInfeasible) as info:
        protect_exact(corner[1], [3])
    assert 3 in info.value.disconnected


def test_tph_needs_observable_network(corner):
    with pytest.raises(UnobservableError):
        protect_tph(corner[1], [5])


def test_time_limit_returns_flagged_incumbent():
    _, meters = parse_case(fixture_path("ieee57.json"))
    plan = protect_exact(meters, [10, 25, 40, 52], time_limit=0.0)
    assert plan.optimal is False
    assert verify_protection(meters, plan, [10, 25, 40, 52])


def test_trace_is_line_delimited_json(ieee14):
    events = []
    protect_exact(ieee14[1], [5, 9, 12, 14], trace=events.append)
    lines = [json.dumps(e) for e in events]
    assert events[-1]["event"] == "done" and all(json.loads(s) for s in lines)


SMALL = protection_suite()[:30]


@pytest.mark.parametrize("k", range(len(SMALL)))
def test_exact_matches_subset_enumeration(k):
    net, meters, D = SMALL[k]
    plan = protect_exact(meters, D)
    assert plan.optimal
    assert plan.cost == pytest.approx(min_protection_cost(net, list(meters), D))
    assert protected_by_oracle(net, meters, plan.meters, D)
    tph = protect_tph(meters, D)
    assert tph.cost >= plan.cost - 1e-9
    assert protected_by_oracle(net, meters, tph.meters, D)


def test_dropping_a_witness_meter_breaks_protection():
    broken = 0
    for net, meters, D in SMALL:
        plan = protect_exact(meters, D)
        for mid in plan.meters:
            rest = [m for m in plan.meters if m != mid]
            ok = verify_protection(meters, rest, D)
            assert ok == protected_by_oracle(net, meters, rest, D)
            broken += not ok
    assert broken > 0


def test_enlarging_targets_never_lowers_cost():
    rng = np.random.default_rng(11)
    for net, meters, D in SMALL[:15]:
        extra = [b for b in net.state_buses if b not in D]
        if not extra:
            continue
        bigger = sorted(set(D) | {int(rng.choice(extra))})
        assert protect_exact(meters, bigger).cost >= protect_exact(meters, D).cost - 1e-9
