"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line,
which is also collected into the terminal summary."""

import itertools
import math
import time

import numpy as np
import pytest

from gridseer import (AttackInfeasible, AttackTarget, BddConfig, construct_emst, estimate_and_check,
                      find_basic_set, fixture_path, forge_attack, measured_subgraph, min_cut_attack,
                      parse_case, protect_exact, protect_tph, subnetwork_observable, validate_emst,
                      verify_protection, verify_undetectable, wls_estimate)
from gridseer.estimator import simulate_measurements
from gridseer.synthetic import random_instance

from conftest import ACCEPTANCE
from oracles import emst_exists, line_weights, min_cut_bruteforce, min_protection_cost
from suites import cut_suite, protection_suite


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def solved_suite():
    """Exact and heuristic plans for the shared protection suite, plus timing."""
    t = time.perf_counter()
    rows = []
    for net, meters, D in protection_suite():
        rows.append((net, meters, D, protect_exact(meters, D), protect_tph(meters, D)))
    return rows, time.perf_counter() - t


def test_criterion_01_undetectability(ieee14):
    _, meters = ieee14
    H = meters.jacobian
    rng = np.random.default_rng(101)
    t = time.perf_counter()
    worst_r = worst_c = 0.0
    for _ in range(1000):
        z = simulate_measurements(H, rng.uniform(-0.5, 0.5, 13), 0.01, rng)
        c = rng.uniform(-0.5, 0.5, 13)
        a = forge_attack(H, c)
        clean, bad = wls_estimate(H, z), wls_estimate(H, z + a.a)
        worst_r = max(worst_r, abs(clean.residual_norm - bad.residual_norm))
        worst_c = max(worst_c, float(np.abs(bad.theta_hat - clean.theta_hat - c).max()))
    elapsed = time.perf_counter() - t
    ok = worst_r <= 1e-9 and worst_c <= 1e-9 and elapsed < 10
    verdict(1, ok, f"1000 triples, max residual gap {worst_r:.1e}, max shift error {worst_c:.1e}, "
                   f"{elapsed:.2f}s")


def test_criterion_02_emst_equivalence():
    rng = np.random.default_rng(202)
    t = time.perf_counter()
    networks = checks = mismatches = 0
    while networks < 200:
        n = int(rng.integers(2, 11))
        k = int(rng.integers(3, 10))
        net, meters = random_instance(rng, n, int(rng.integers(0, 4)), k - int(rng.integers(0, 3)),
                                      int(rng.integers(0, 3)))
        networks += 1
        for r in range(len(meters) + 1):
            for ids in itertools.combinations(meters.ids, r):
                checks += 1
                if subnetwork_observable(meters, ids) != emst_exists(net, list(meters), set(ids)):
                    mismatches += 1
    elapsed = time.perf_counter() - t
    verdict(2, mismatches == 0 and elapsed < 300,
            f"{networks} networks, {checks} meter subsets, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_03_corner_golden(corner):
    _, meters = corner
    emst = construct_emst(meters, measured_subgraph(meters), find_basic_set(meters))
    want = {(1, 2): "r1", (1, 5): "r2", (4, 5): "r4", (5, 6): "r5"}
    ok = emst.mapping == want and (2, 5) not in emst.tree_edges and validate_emst(meters, emst)[0]
    verdict(3, ok, f"mapping {sorted((v, k) for k, v in emst.mapping.items())}, e25 unused")


def test_criterion_04_exact_optimality(solved_suite):
    rows, solve_time = solved_suite
    t = time.perf_counter()
    wrong = unsound = 0
    for net, meters, D, exact, _ in rows:
        if not exact.optimal or abs(exact.cost - min_protection_cost(net, list(meters), D)) > 1e-9:
            wrong += 1
        unsound += not verify_protection(meters, exact, D)
    elapsed = solve_time + time.perf_counter() - t
    verdict(4, wrong == 0 and unsound == 0 and elapsed < 600,
            f"{len(rows)} instances, {wrong} cost mismatches, {unsound} unsound plans, {elapsed:.1f}s")


def test_criterion_05_tph_dominance_and_quality(solved_suite, ieee14):
    rows, _ = solved_suite
    below = sum(tph.cost < exact.cost - 1e-9 for *_, exact, tph in rows)
    suite_eq = sum(abs(tph.cost - exact.cost) <= 1e-9 for *_, exact, tph in rows)
    _, meters = ieee14
    rng = np.random.default_rng(505)
    samples = {tuple(sorted(int(b) for b in rng.choice(meters.network.state_buses, 4, replace=False)))
               for _ in range(80)}
    samples = sorted(samples)[:50]
    match = unsound = 0
    for D in samples:
        exact, tph = protect_exact(meters, D), protect_tph(meters, D)
        below += tph.cost < exact.cost - 1e-9
        match += abs(tph.cost - exact.cost) <= 1e-9
        unsound += not verify_protection(meters, tph, D)
    ratio = match / len(samples)
    verdict(5, below == 0 and unsound == 0 and ratio >= 0.8,
            f"tph below exact {below} times; 14-bus |D|=4 match ratio {match}/{len(samples)} = "
            f"{ratio:.2f}; random suite match {suite_eq}/{len(rows)}")


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    fn(*args, **kw)
    return time.perf_counter() - t


def test_criterion_06_scaling_shape():
    rng = np.random.default_rng(606)
    tph_max, ratios, exact57 = {}, {}, 0.0
    for name in ("ieee14.json", "ieee57.json", "ieee118.json"):
        _, meters = parse_case(fixture_path(name))
        tph_times, rs = [], []
        for _ in range(5):
            D = [int(b) for b in rng.choice(meters.network.state_buses, 4, replace=False)]
            tt = _timed(protect_tph, meters, D)
            te = _timed(protect_exact, meters, D)
            tph_times.append(tt)
            rs.append(te / tt)
            if name == "ieee57.json":
                exact57 = max(exact57, te)
        tph_max[name] = max(tph_times)
        ratios[name] = float(np.median(rs))
    fast = all(v < 10 for v in tph_max.values()) and exact57 < 600
    grows = ratios["ieee118.json"] > ratios["ieee14.json"]
    verdict(6, fast and grows,
            "tph max s " + ", ".join(f"{k.split('.')[0]}={v:.3f}" for k, v in tph_max.items())
            + f"; exact57 max {exact57:.2f}s; median exact/tph ratio "
            + ", ".join(f"{k.split('.')[0]}={v:.2f}" for k, v in ratios.items())
            + f"; superlinear growth {'yes' if grows else 'no'}")


def test_criterion_07_cut_single_golden():
    _, meters = parse_case(fixture_path("cut_single.json"))
    plan = min_cut_attack(meters, AttackTarget([8]))
    H = meters.jacobian
    bdd = BddConfig.chi_square(*H.matrix.shape, 0.01)
    rng = np.random.default_rng(707)
    same = True
    for _ in range(100):
        z = simulate_measurements(H, rng.uniform(-0.5, 0.5, H.matrix.shape[1]), 0.01, rng)
        clean = estimate_and_check(H, z, None, bdd)
        bad = estimate_and_check(H, z + plan.vector.a, None, bdd)
        same &= clean.detected == bad.detected and abs(clean.residual_norm - bad.residual_norm) <= 1e-9
    ok = (plan.cut_edges == ((7, 8),) and set(plan.compromised_meters) == {"f7_8", "p7"}
          and verify_undetectable(H, plan.vector) and same)
    verdict(7, ok, f"cut {list(plan.cut_edges)}, meters {sorted(plan.compromised_meters)}, "
                   f"BDD unchanged on 100 runs: {same}")


def test_criterion_08_min_cut_correctness():
    suite = cut_suite()
    wrong = gap = feasible = 0
    for net, meters, D in suite:
        best = min_cut_bruteforce(net, line_weights(net, list(meters)), set(D))
        try:
            plan = min_cut_attack(meters, AttackTarget(D))
        except AttackInfeasible:
            wrong += not math.isinf(best)
            continue
        feasible += 1
        wrong += abs(plan.cost - best) > 1e-9
        gap += abs(plan.flow_value - plan.cost) > 1e-9
    verdict(8, wrong == 0 and gap == 0 and len(suite) >= 100,
            f"{len(suite)} instances ({feasible} feasible), {wrong} cost mismatches, "
            f"{gap} flow/cut gaps")


def test_criterion_09_protection_attack_duality(solved_suite):
    rows, _ = solved_suite
    attempts = breaches = 0
    for net, meters, D, exact, _ in rows:
        guarded = meters.with_secured(exact.meters)
        for b in D:
            attempts += 1
            try:
                min_cut_attack(guarded, AttackTarget([b]))
                breaches += 1
            except AttackInfeasible:
                pass
    verdict(9, breaches == 0, f"{attempts} attacks on protected targets, {breaches} feasible")


def test_criterion_10_bdd_behaviour(ieee14):
    _, meters = ieee14
    H = meters.jacobian
    m, n = H.matrix.shape
    bdd = BddConfig.chi_square(m, n, 0.01)
    P = H.matrix @ np.linalg.pinv(H.matrix)
    k = int(np.argmax(1 - np.diag(P)))  # most redundant meter
    alarms = hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        z = simulate_measurements(H, rng.uniform(-0.5, 0.5, n), 0.01, rng)
        alarms += estimate_and_check(H, z, None, bdd).detected
        z[k] += 10 * 0.01
        hits += estimate_and_check(H, z, None, bdd).detected
    verdict(10, alarms <= 2 and hits >= 95,
            f"tau={bdd.tau:.4f}, false alarms {alarms}/100, gross error on {meters.ids[k]} "
            f"detected {hits}/100")
