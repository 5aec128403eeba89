"""
Observability and measurement spanning trees
============================================

A DC state estimator can only recover the bus phase angles its meters pin
down. Here five meters watch a corner of the 14-bus system. We pick a basic
set among them and build a spanning tree in which every line is explained
by its own meter.
"""

import numpy as np

from gridseer import (construct_emst, find_basic_set, fixture_path, is_observable,
                      measured_subgraph, parse_case, validate_emst)

net, meters = parse_case(fixture_path("corner.json"))
print(f"{net.n + 1} buses, {len(net.lines)} lines, meters {meters.ids}")

# the Jacobian has one column per non-reference bus
H = meters.jacobian.matrix
print(f"H is {H.shape[0]}x{H.shape[1]}, rank {np.linalg.matrix_rank(H)}")

# whole-network observability fails: most of the grid carries no meter
obs = is_observable(meters)
print("observable:", obs.observable, "unseen buses:", obs.unobservable_buses)

# restricted to the buses the meters do touch, things look better
sub = measured_subgraph(meters)
print("measured buses:", sorted(sub.vertices))
print("subnetwork observable:", bool(is_observable(meters, targets=sorted(sub.vertices - {net.reference}))))

basic = find_basic_set(meters)
print("basic set:", basic.meter_ids)

emst = construct_emst(meters, sub, basic)
for line in emst.tree_edges:
    print(f"  line {line} <- {emst.mapping[line]}")
print("valid:", validate_emst(meters, emst))
unused = sorted(set(sub.edges) - set(emst.tree_edges))
print("lines left out of the tree:", unused)
