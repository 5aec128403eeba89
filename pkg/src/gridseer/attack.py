"""Minimum-cost undetectable injection attacks through minimum S-T cuts.

To bias target buses without tripping bad data detection, the attacker
separates them from the reference bus: every bus on the far side of the cut
gets the same angle bias and only meters measuring cut lines see a change.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .estimator import AttackVector, forge_attack, verify_undetectable
from .flows import FlowNetwork
from .grid import LineId, MeterSet

VIRTUAL = "virtual-terminal"
DEFAULT_BIAS = 0.1


class AttackInfeasible(ValueError):
    """Every path from the reference to a target is guarded by secured meters.

    ``barrier`` holds the lines of one such path (all of infinite weight).
    """

    def __init__(self, msg: str, barrier: Iterable[LineId]):
        super().__init__(msg)
        self.barrier = tuple(barrier)


class AttackVerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class AttackTarget:
    buses: frozenset[int]
    forbidden: frozenset[str] = frozenset()

    def __init__(self, buses: Iterable[int], forbidden: Iterable[str] = ()):
        object.__setattr__(self, "buses", frozenset(int(b) for b in buses))
        object.__setattr__(self, "forbidden", frozenset(forbidden))
        if not self.buses:
            raise ValueError("attack target must name at least one bus")


@dataclass(frozen=True)
class CutGraph:
    source: int
    sink: int | str
    weights: dict[LineId, float]
    virtual_edges: dict[int, float] = field(default_factory=dict)

    @property
    def vertices(self) -> list:
        verts = sorted({v for ln in self.weights for v in ln} | {self.source} |
                       ({self.sink} if isinstance(self.sink, int) else set()))
        return verts + ([VIRTUAL] if self.virtual_edges else [])


@dataclass(frozen=True)
class AttackPlan:
    cut_edges: tuple[LineId, ...]
    compromised_meters: tuple[str, ...]
    cost: float
    realized_cost: float
    flow_value: float
    bias: np.ndarray
    vector: AttackVector
    terminal_side: frozenset[int]
    cut_graph: CutGraph

    @property
    def meter_count(self) -> int:
        return len(self.compromised_meters)


def _secured(meters: MeterSet, target: AttackTarget) -> set[str]:
    return {mt.id for mt in meters if mt.secured} | set(meters.ordered(target.forbidden))


def build_cut_graph(meters: MeterSet, target: AttackTarget,
                    unknown_lines: Iterable[LineId] = ()) -> CutGraph:
    """Weighted graph whose minimum cut is the cheapest attack.

    A line weighs the summed cost of the unsecured meters measuring it, or
    infinity when a secured meter measures it; unmeasured lines weigh zero.
    Several targets are tied to a virtual terminal by infinite-weight edges.
    Lines in ``unknown_lines`` are left out.
    """
    net = meters.network
    if net.reference in target.buses:
        raise ValueError("the reference bus cannot be attacked")
    for b in target.buses:
        if not net.has_bus(b):
            raise ValueError(f"unknown target bus {b}")
    secured = _secured(meters, target)
    skip = {tuple(sorted(ln)) for ln in unknown_lines}
    weights = {}
    for ln in net.lines:
        if ln.endpoints in skip:
            continue
        on = meters.meters_on(ln.endpoints)
        if any(mid in secured for mid in on):
            weights[ln.endpoints] = math.inf
        else:
            weights[ln.endpoints] = float(sum(meters[mid].cost for mid in on))
    if len(target.buses) == 1:
        return CutGraph(net.reference, next(iter(target.buses)), weights)
    return CutGraph(net.reference, VIRTUAL, weights, {b: math.inf for b in sorted(target.buses)})


def _edges(graph: CutGraph):
    for (i, j), w in graph.weights.items():
        yield i, j, w
    for b, w in graph.virtual_edges.items():
        yield b, VIRTUAL, w


def _infinite_path(graph: CutGraph) -> list | None:
    adj: dict = {}
    for i, j, w in _edges(graph):
        if math.isinf(w):
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
    parent = {graph.source: None}
    queue = deque([graph.source])
    while queue:
        u = queue.popleft()
        if u == graph.sink:
            path = []
            while parent[u] is not None:
                p = parent[u]
                if VIRTUAL not in (p, u):
                    path.append((min(p, u), max(p, u)))
                u = p
            return path[::-1]
        for v in sorted(adj.get(u, ()), key=str):
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return None


def min_cut(graph: CutGraph) -> tuple[float, set, list[LineId]]:
    """Max-flow value, source side and cut lines of ``graph``.

    Raises :class:`AttackInfeasible` when no finite cut exists.
    """
    barrier = _infinite_path(graph)
    if barrier is not None:
        raise AttackInfeasible("attack impossible under secured set", barrier)
    finite = sum(w for _, _, w in _edges(graph) if not math.isinf(w))
    big = finite + 1.0
    fn = FlowNetwork()
    fn.node(graph.source)
    fn.node(graph.sink)
    for i, j, w in _edges(graph):
        cap = big if math.isinf(w) else w
        fn.add_edge(i, j, cap)
        fn.add_edge(j, i, cap)
    value = fn.max_flow(graph.source, graph.sink)
    side = fn.source_side(graph.source)
    cut = sorted(ln for ln in graph.weights if (ln[0] in side) != (ln[1] in side))
    return value, side, cut


def min_cut_attack(meters: MeterSet, target: AttackTarget, delta: float = DEFAULT_BIAS,
                   unknown_lines: Iterable[LineId] = ()) -> AttackPlan:
    """Cheapest undetectable attack biasing every target bus by ``delta``."""
    net = meters.network
    graph = build_cut_graph(meters, target, unknown_lines)
    value, side, cut = min_cut(graph)
    terminal_side = frozenset(b for b in net.bus_ids if b not in side)
    cut_set = set(cut)
    compromised = tuple(mid for mid in meters.ids
                        if meters.coverage(mid)[1] & cut_set)
    c = np.array([delta if b in terminal_side else 0.0 for b in net.state_buses])
    H = meters.jacobian
    vector = forge_attack(H, c)
    if not verify_undetectable(H, vector) or not set(vector.support) <= set(compromised):
        raise AttackVerificationError(
            f"forged attack touches meters outside the cut: {sorted(set(vector.support) - set(compromised))}")
    weight = float(sum(graph.weights[ln] for ln in cut))
    return AttackPlan(tuple(cut), compromised, weight, meters.cost(compromised), value,
                      c, vector, terminal_side, graph)


def smallest_attack_meter_set(meters: MeterSet, target: AttackTarget,
                              delta: float = DEFAULT_BIAS) -> AttackPlan:
    """Min-cut attack with every unsecured meter costing one.

    Under the per-line weighting an injection meter on several cut lines is
    charged once per line, so ``meter_count`` is an upper bound on the true
    minimum number of meters.
    """
    unit = MeterSet(meters.network, tuple(replace(mt, cost=1.0) for mt in meters))
    return min_cut_attack(unit, target, delta)
