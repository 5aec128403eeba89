"""
Cheapest undetectable attack
============================

The attacker wants to shift the estimated angle at a target bus without
tripping bad data detection. Cutting the network so the target sits on a
side shifted by a constant bias means only meters on the cut lines (and
injections at their ends) need tampering; a min S-T cut finds the cheapest.
"""

import numpy as np

from gridseer import (AttackInfeasible, AttackTarget, BddConfig, estimate_and_check, fixture_path,
                      min_cut_attack, parse_case, protect_exact)
from gridseer.estimator import simulate_measurements

net, meters = parse_case(fixture_path("cut_single.json"))
plan = min_cut_attack(meters, AttackTarget([8]), delta=0.1)
print("cut lines:", plan.cut_edges)
print("meters to tamper:", plan.compromised_meters, "cost", plan.cost)
print("buses shifted by 0.1:", sorted(plan.terminal_side))

# does the estimator notice? compare residuals with and without the attack
H = meters.jacobian
bdd = BddConfig.chi_square(*H.matrix.shape, sigma=0.01)
rng = np.random.default_rng(0)
z = simulate_measurements(H, rng.uniform(-0.3, 0.3, H.matrix.shape[1]), 0.01, rng)
clean = estimate_and_check(H, z, None, bdd)
bad = estimate_and_check(H, z + plan.vector.a, None, bdd)
print(f"residual clean {clean.residual_norm:.5f}, attacked {bad.residual_norm:.5f}, tau {bdd.tau:.4f}")
print("angle shift:", np.round(bad.theta_hat - clean.theta_hat, 6))

# several targets at once go through a virtual terminal
net, meters = parse_case(fixture_path("cut_pair.json"))
plan = min_cut_attack(meters, AttackTarget([10, 12]))
print("\ntwo targets: cut", plan.cut_edges, "cost", plan.cost)

# securing a protection plan shuts every single-bus attack down
net, meters = parse_case(fixture_path("ieee14.json"))
guard = protect_exact(meters, [5, 9, 12, 14])
locked = meters.with_secured(guard.meters)
for b in (5, 9, 12, 14):
    try:
        min_cut_attack(locked, AttackTarget([b]))
        print(b, "still attackable")
    except AttackInfeasible as err:
        print(f"bus {b}: blocked, barrier path {err.barrier}")
