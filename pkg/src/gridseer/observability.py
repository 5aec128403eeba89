"""Observability of networks and measured subnetworks, basic measurement
sets, and edge-measured Steiner trees (EMSTs).

An EMST over a measured subnetwork is a tree on its buses that contains the
reference bus, with every tree line assigned to a distinct meter that
measures it. Such a tree exists exactly when the subnetwork is observable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .estimator import UnobservableError
from .flows import FlowNetwork
from .grid import LineId, MeasuredSubgraph, MeterSet, measured_subgraph
from .linalg import RowEchelon, null_space, rank

NULL_TOL = 1e-9


class EmstConstructionError(RuntimeError):
    """No tree was found for an input that passed the observability check."""


@dataclass(frozen=True)
class Observability:
    observable: bool
    certificate: np.ndarray | None = None
    unobservable_buses: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.observable


def _jacobian_rows(meters: MeterSet, ids: tuple[str, ...]) -> np.ndarray:
    return meters.jacobian.rows(ids)


def is_observable(meters: MeterSet, ids: Iterable[str] | None = None,
                  targets: Iterable[int] | None = None) -> Observability:
    """Check whether the chosen meters determine the state.

    With ``targets=None`` the whole network is checked (``rank(H) == n``).
    Otherwise the subnetwork measured by the meters is checked: it must
    contain the reference bus and every target, and its buses must be
    uniquely determined by the meters. On failure the certificate is a
    nonzero ``c`` with ``H c = 0``.
    """
    net = meters.network
    ids = meters.ids if ids is None else meters.ordered(ids)
    H = _jacobian_rows(meters, ids)
    N = null_space(H)
    free = np.abs(N).max(axis=1) > NULL_TOL if N.size else np.zeros(net.n, bool)

    if targets is None:
        relevant = set(net.state_buses)
        ok = N.shape[1] == 0
    else:
        targets = set(targets)
        sub = measured_subgraph(meters, ids)
        relevant = (sub.vertices | targets) - {net.reference}
        cols = [net.column[b] for b in sorted(sub.vertices - {net.reference})]
        ok = (net.reference in sub.vertices and targets <= sub.vertices
              and rank(H[:, cols]) == len(cols))
    if ok:
        return Observability(True)

    bad = tuple(b for b in net.state_buses if b in relevant and free[net.column[b]])
    if N.shape[1] == 0:
        # full column rank yet the subnetwork lacks the reference bus
        return Observability(False, None, bad)
    rows = [net.column[b] for b in bad] or list(range(net.n))
    j = int(np.argmax(np.linalg.norm(N[rows, :], axis=0)))
    c = N[:, j]
    c = c / c[np.argmax(np.abs(c))]
    return Observability(False, c, bad)


def subnetwork_observable(meters: MeterSet, ids: Iterable[str] | None = None) -> bool:
    return is_observable(meters, ids, targets=()).observable


@dataclass(frozen=True)
class BasicSet:
    meter_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.meter_ids)

    def __iter__(self):
        return iter(self.meter_ids)


def find_basic_set(meters: MeterSet, ids: Iterable[str] | None = None) -> BasicSet:
    """Pick independent Jacobian rows in declaration order.

    Rows are restricted to the buses of the measured subnetwork (all buses
    when the meters cover the whole network), so the result has one meter per
    non-reference bus of that subnetwork.
    """
    net = meters.network
    ids = meters.ids if ids is None else meters.ordered(ids)
    report = is_observable(meters, ids, targets=())
    if not report:
        raise UnobservableError("unobservable meter set", report.certificate, report.unobservable_buses)
    sub = measured_subgraph(meters, ids)
    cols = [net.column[b] for b in sorted(sub.vertices - {net.reference})]
    H = _jacobian_rows(meters, ids)[:, cols]
    elim = RowEchelon(len(cols))
    chosen = []
    for mid, row in zip(ids, H):
        if elim.add(row):
            chosen.append(mid)
            if elim.rank == len(cols):
                break
    return BasicSet(tuple(chosen))


@dataclass(frozen=True)
class Emst:
    vertices: frozenset[int]
    tree_edges: tuple[LineId, ...]
    mapping: dict[LineId, str] = field(hash=False)
    root: int

    @property
    def meters(self) -> tuple[str, ...]:
        return tuple(self.mapping[e] for e in self.tree_edges)

    def children(self) -> dict[int, list[int]]:
        """Children of every vertex when the tree hangs from the root."""
        adj: dict[int, list[int]] = {v: [] for v in self.vertices}
        for i, j in self.tree_edges:
            adj[i].append(j)
            adj[j].append(i)
        kids: dict[int, list[int]] = {v: [] for v in self.vertices}
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    kids[u].append(v)
                    queue.append(v)
        return kids


class _Forest:
    def __init__(self, edges: Iterable[LineId]):
        self.adj: dict[int, list[int]] = {}
        for i, j in edges:
            self.adj.setdefault(i, []).append(j)
            self.adj.setdefault(j, []).append(i)

    def path(self, u: int, v: int) -> list[LineId] | None:
        """Lines on the forest path from ``u`` to ``v``; None if disconnected."""
        if u not in self.adj or v not in self.adj:
            return None
        parent = {u: None}
        queue = deque([u])
        while queue:
            a = queue.popleft()
            if a == v:
                break
            for b in self.adj[a]:
                if b not in parent:
                    parent[b] = a
                    queue.append(b)
        if v not in parent:
            return None
        out = []
        while parent[v] is not None:
            p = parent[v]
            out.append((p, v) if p < v else (v, p))
            v = p
        return out


def _match(edges: list[LineId], meter_ids: tuple[str, ...], meters: MeterSet,
           first: LineId | None = None) -> dict[LineId, str] | None:
    """Assign distinct meters to ``edges`` by bipartite max-flow.

    ``first`` must be matched (lower capacity bound of one); it is routed
    before any other edge is allowed to reach the sink, and arcs into the
    sink never lose flow afterwards. Returns a maximum partial assignment, or
    None when ``first`` cannot be matched.
    """
    fn = FlowNetwork()
    for mid in meter_ids:
        fn.add_edge("s", ("m", mid), 1)
    for mid in meter_ids:
        for e in edges:
            if meters.measures(mid, e):
                fn.add_edge(("m", mid), ("e", e), 1)
    sink_arcs = {e: fn.add_edge(("e", e), "t", 1 if first in (None, e) else 0) for e in edges}
    if first is not None:
        if fn.max_flow("s", "t") < 1:
            return None
        for e, arc in sink_arcs.items():
            fn.set_capacity(arc, 1)
    fn.max_flow("s", "t")
    assignment = {}
    for arc in fn.arcs():
        u, v = fn.tail(arc), fn.head(arc)
        if isinstance(u, tuple) and u[0] == "m" and fn.flow(arc) > 0.5:
            assignment[v[1]] = u[1]
    return assignment


def _augment(tree: list[LineId], matching: dict[LineId, str], forced: LineId,
             ground: list[LineId], meter_ids: tuple[str, ...], meters: MeterSet) -> list[LineId] | None:
    """One shortest exchange path enlarging ``tree`` while keeping it a
    forest whose lines can be given distinct meters. ``forced`` never leaves."""
    in_tree = set(tree)
    forest = _Forest(tree)
    owner = {mid: e for e, mid in matching.items()}
    free_meters = {mid for mid in meter_ids if mid not in owner}

    outside = [y for y in ground if y not in in_tree]
    sources, to_y = set(), {}
    sinks, from_y = set(), {}
    for y in outside:
        cycle = forest.path(*y)
        if cycle is None:
            sources.add(y)
        else:
            for x in cycle:
                if x != forced:
                    to_y.setdefault(x, []).append(y)
        # alternating search: which tree lines can give up their meter to y
        reach, seen_m, queue = [], set(), deque([y])
        seen_e = {y}
        while queue:
            e = queue.popleft()
            for mid in meter_ids:
                if mid in seen_m or not meters.measures(mid, e):
                    continue
                seen_m.add(mid)
                if mid in free_meters:
                    sinks.add(y)
                    continue
                x = owner[mid]
                if x not in seen_e:
                    seen_e.add(x)
                    if x != forced:
                        reach.append(x)
                    queue.append(x)
        from_y[y] = reach

    parent: dict[LineId, LineId | None] = {}
    queue = deque()
    for y in outside:
        if y in sources:
            parent[y] = None
            queue.append(y)
    while queue:
        node = queue.popleft()
        if node not in in_tree and node in sinks:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            path.reverse()
            removed = set(path[1::2])
            added = path[0::2]
            return [e for e in tree if e not in removed] + added
        nxt = from_y.get(node, []) if node not in in_tree else to_y.get(node, [])
        for w in nxt:
            if w not in parent:
                parent[w] = node
                queue.append(w)
    return None


def construct_emst(meters: MeterSet, subgraph: MeasuredSubgraph | None = None,
                   basic: BasicSet | Iterable[str] | None = None) -> Emst:
    """Build an EMST on the buses of an observable measured subnetwork.

    Each line touching the reference bus is tried in turn as a forced first
    tree line. For a guess, a bipartite max-flow matches basic meters to the
    lines they measure with the guessed line required; the matched lines are
    trimmed to a forest and then enlarged by exchange augmentations until no
    further line can be added. A guess succeeds when the forest spans the
    subnetwork.
    """
    net = meters.network
    if subgraph is None:
        subgraph = measured_subgraph(meters)
    if basic is None:
        basic = find_basic_set(meters, subgraph.generating_meters)
    meter_ids = meters.ordered(basic)
    root = net.reference
    vertices = subgraph.vertices
    target = len(vertices) - 1
    if root not in vertices:
        raise UnobservableError("reference bus not in the measured subnetwork", None)
    if len(meter_ids) != target:
        raise ValueError(f"basic set has {len(meter_ids)} meters, subnetwork needs {target}")

    ground = sorted(e for e in subgraph.edges
                    if e[0] in vertices and e[1] in vertices
                    and any(meters.measures(mid, e) for mid in meter_ids))
    root_lines = [e for e in ground if root in e]
    for forced in root_lines:
        matching = _match(ground, meter_ids, meters, first=forced)
        if matching is None:
            continue
        tree = [forced]
        comp = _Forest(tree)
        for e in ground:
            if e != forced and e in matching and comp.path(*e) is None:
                tree.append(e)
                comp = _Forest(tree)
        matching = _match(tree, meter_ids, meters)
        while len(tree) < target:
            grown = _augment(tree, matching, forced, ground, meter_ids, meters)
            if grown is None:
                break
            tree = grown
            matching = _match(tree, meter_ids, meters)
            if len(matching) != len(tree):
                raise EmstConstructionError("exchange step produced an unmatchable line set")
        if len(tree) == target:
            edges = tuple(sorted(tree))
            mapping = _match(list(edges), meter_ids, meters)
            emst = Emst(frozenset(vertices), edges, {e: mapping[e] for e in edges}, root)
            ok, problems = validate_emst(meters, emst)
            if not ok:
                raise EmstConstructionError("; ".join(problems))
            return emst
    raise EmstConstructionError(
        "no edge-measured Steiner tree found although the subnetwork passed the rank test")


def validate_emst(meters: MeterSet, emst: Emst) -> tuple[bool, list[str]]:
    """Check tree shape and the three EMST conditions; list every violation."""
    net = meters.network
    problems = []
    verts = set(emst.vertices)
    edges = list(emst.tree_edges)
    if len(set(edges)) != len(edges):
        problems.append("tree: repeated line")
    for e in edges:
        if not net.has_line(*e):
            problems.append(f"tree: line {e} not in the network")
        if not set(e) <= verts:
            problems.append(f"tree: line {e} leaves the vertex set")
    if len(edges) != len(verts) - 1:
        problems.append(f"tree: {len(edges)} lines for {len(verts)} vertices")
    if verts:
        forest = _Forest(edges)
        start = min(verts)
        unreached = [v for v in verts if v != start and forest.path(start, v) is None]
        if unreached:
            problems.append(f"tree: vertices {sorted(unreached)} not connected")
    if net.reference not in verts:
        problems.append(f"condition 1: reference bus {net.reference} not in the tree")
    used: dict[str, LineId] = {}
    for e in edges:
        mid = emst.mapping.get(e)
        if mid is None:
            problems.append(f"condition 2: line {e} has no meter")
            continue
        if mid not in meters:
            problems.append(f"condition 2: unknown meter {mid!r} on line {e}")
            continue
        if not meters.measures(mid, e):
            problems.append(f"condition 2: meter {mid} does not measure line {e}")
        if mid in used:
            problems.append(f"condition 3: meter {mid} mapped to lines {used[mid]} and {e}")
        used[mid] = e
    extra = set(emst.mapping) - set(edges)
    if extra:
        problems.append(f"tree: mapping names lines outside the tree {sorted(extra)}")
    return not problems, problems
