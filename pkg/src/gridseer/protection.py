"""Minimum-cost meter protection for a set of target state variables.

A protected meter set defends the targets when the subnetwork it measures is
observable and contains them; equivalently an edge-measured Steiner tree over
that subnetwork reaches every target from the reference bus.

Two planners are provided: an exact integer program over a rooted
arborescence (solved by :mod:`gridseer.bnb`) and a polynomial tree-pruning
heuristic.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import sparse

from .bnb import solve_binary_milp
from .estimator import UnobservableError
from .grid import LineId, MeterSet, measured_subgraph
from .linalg import null_space, rank
from .observability import Emst, construct_emst, find_basic_set, is_observable, validate_emst

log = logging.getLogger(__name__)


class ProtectionInfeasible(ValueError):
    def __init__(self, msg: str, disconnected: Iterable[int]):
        super().__init__(msg)
        self.disconnected = tuple(sorted(disconnected))


@dataclass(frozen=True)
class ProtectionPlan:
    meters: tuple[str, ...]
    cost: float
    witness: Emst
    optimal: bool
    stats: dict = field(default_factory=dict, compare=False)


def _check_target(meters: MeterSet, target: Iterable[int]) -> frozenset[int]:
    net = meters.network
    D = frozenset(int(b) for b in target)
    if not D:
        raise ValueError("target set must be nonempty")
    if net.reference in D:
        raise ValueError("target set must not contain the reference bus")
    unknown = [b for b in D if not net.has_bus(b)]
    if unknown:
        raise ValueError(f"unknown target buses {sorted(unknown)}")
    return D


def _reachable_targets(meters: MeterSet, D: frozenset[int]) -> None:
    sub = measured_subgraph(meters)
    net = meters.network
    adj: dict[int, list[int]] = {}
    for i, j in sub.edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    seen = {net.reference}
    queue = deque([net.reference])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    missing = D - seen
    if missing:
        raise ProtectionInfeasible(
            f"targets {sorted(missing)} are not connected to the reference through measured lines",
            set(net.bus_ids) - seen)


def _plan(meters: MeterSet, emst: Emst, optimal: bool, stats: dict) -> ProtectionPlan:
    ids = meters.ordered(emst.meters)
    return ProtectionPlan(ids, meters.cost(ids), emst, optimal, stats)


def verify_protection(meters: MeterSet, plan_meters: Iterable[str] | ProtectionPlan,
                      target: Iterable[int], tol: float = 1e-9) -> bool:
    """True iff no state bias invisible to the protected meters moves a target.

    Every vector in the null space of the protected rows of ``H`` must vanish
    on the target columns.
    """
    if isinstance(plan_meters, ProtectionPlan):
        plan_meters = plan_meters.meters
    net = meters.network
    ids = meters.ordered(plan_meters)
    N = null_space(meters.jacobian.rows(ids))
    if N.shape[1] == 0:
        return True
    cols = [net.column[b] for b in target]
    return bool(np.abs(N[cols, :]).max(initial=0.0) <= tol)


class _Model:
    """Arborescence model over the measured lines.

    Variables: arc use ``u`` (two arcs per line, none entering the root), arc
    flow ``f``, line-to-meter assignment ``x``, and in-tree indicator ``w`` for
    every non-reference bus.
    """

    def __init__(self, meters: MeterSet, D: frozenset[int]):
        net = meters.network
        self.meters = meters
        root = net.reference
        lines = sorted(measured_subgraph(meters).edges)
        self.arcs = [(i, j) for a, b in lines for i, j in ((a, b), (b, a)) if j != root]
        self.pairs = [(ln, mid) for ln in lines for mid in meters.meters_on(ln)]
        self.nodes = list(net.state_buses)
        na, nx, nw = len(self.arcs), len(self.pairs), len(self.nodes)
        self.u0, self.f0, self.x0, self.w0 = 0, na, 2 * na, 2 * na + nx
        self.size = 2 * na + nx + nw
        arc_idx = {a: k for k, a in enumerate(self.arcs)}
        wcol = {v: self.w0 + k for k, v in enumerate(self.nodes)}
        self.arc_idx, self.wcol = arc_idx, wcol
        big = float(net.n)

        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        ub_r, ub_c, ub_v, b_ub = [], [], [], []

        def eq(entries, rhs):
            r = len(b_eq)
            for col, val in entries:
                eq_r.append(r); eq_c.append(col); eq_v.append(val)
            b_eq.append(rhs)

        def ub(entries, rhs):
            r = len(b_ub)
            for col, val in entries:
                ub_r.append(r); ub_c.append(col); ub_v.append(val)
            b_ub.append(rhs)

        by_line: dict[LineId, list[int]] = {}
        by_meter: dict[str, list[int]] = {}
        for k, (ln, mid) in enumerate(self.pairs):
            by_line.setdefault(ln, []).append(self.x0 + k)
            by_meter.setdefault(mid, []).append(self.x0 + k)

        # a used line carries exactly one meter, in one direction
        for ln in lines:
            a, b = ln
            uses = [(self.u0 + arc_idx[arc], -1.0) for arc in ((a, b), (b, a)) if arc in arc_idx]
            eq([(col, 1.0) for col in by_line[ln]] + uses, 0.0)
            if len(uses) == 2:
                ub([(col, 1.0) for col, _ in uses], 1.0)
        for mid, cols in by_meter.items():
            ub([(col, 1.0) for col in cols], 1.0)
            mt = meters[mid]
            if not mt.is_flow:
                # pseudo demand: every bus seen by a used injection meter is in the tree
                for v in meters.coverage(mid)[0]:
                    if v != root:
                        ub([(col, 1.0) for col in cols] + [(wcol[v], -1.0)], 0.0)

        into: dict[int, list[int]] = {v: [] for v in self.nodes}
        out: dict[int, list[int]] = {v: [] for v in self.nodes}
        for k, (i, j) in enumerate(self.arcs):
            into[j].append(k)
            if i != root:
                out[i].append(k)
            ub([(self.f0 + k, 1.0), (self.u0 + k, -big)], 0.0)
        for v in self.nodes:
            eq([(self.u0 + k, 1.0) for k in into[v]] + [(wcol[v], -1.0)], 0.0)
            eq([(self.f0 + k, 1.0) for k in into[v]] + [(self.f0 + k, -1.0) for k in out[v]]
               + [(wcol[v], -1.0)], 0.0)

        # one unit-flow commodity per target bus, bounded by arc use; these
        # rows only tighten the relaxation
        self.g0 = self.size
        self.targets = sorted(D)
        self.size += len(D) * na
        for t, d in enumerate(sorted(D)):
            base = self.g0 + t * na
            for k in range(na):
                ub([(base + k, 1.0), (self.u0 + k, -1.0)], 0.0)
            for v in self.nodes:
                rhs = 1.0 if v == d else 0.0
                eq([(base + k, 1.0) for k in into[v]] + [(base + k, -1.0) for k in out[v]], rhs)

        self.A_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), self.size))
        self.b_eq = np.array(b_eq)
        self.A_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), self.size))
        self.b_ub = np.array(b_ub)

        self.c = np.zeros(self.size)
        for k, (_, mid) in enumerate(self.pairs):
            self.c[self.x0 + k] = meters[mid].cost
        self.lower = np.zeros(self.size)
        self.upper = np.ones(self.size)
        self.upper[self.f0:self.x0] = big
        self.upper[self.g0:] = 1.0
        for v in D:
            self.lower[wcol[v]] = 1.0
        self.binary = np.ones(self.size, dtype=bool)
        self.binary[self.f0:self.x0] = False
        self.binary[self.g0:] = False
        self.priority = np.zeros(self.size, dtype=bool)
        self.priority[self.u0:self.f0] = True

    def encode(self, emst: Emst) -> np.ndarray:
        """Feasible point for a tree (used to seed the incumbent)."""
        x = np.zeros(self.size)
        kids = emst.children()
        sizes: dict[int, int] = {}

        def count(v):
            sizes[v] = 1 + sum(count(c) for c in kids[v])
            return sizes[v]

        count(emst.root)
        pair_idx = {p: k for k, p in enumerate(self.pairs)}
        for u, children in kids.items():
            for v in children:
                k = self.arc_idx[(u, v)]
                x[self.u0 + k] = 1.0
                x[self.f0 + k] = sizes[v]
                ln = (u, v) if u < v else (v, u)
                x[self.x0 + pair_idx[(ln, emst.mapping[ln])]] = 1.0
        for v in emst.vertices:
            if v != emst.root:
                x[self.wcol[v]] = 1.0
        parent = {v: u for u, children in kids.items() for v in children}
        na = len(self.arcs)
        for t, d in enumerate(self.targets):
            v = d
            while v != emst.root:
                x[self.g0 + t * na + self.arc_idx[(parent[v], v)]] = 1.0
                v = parent[v]
        return x

    def decode(self, sol: np.ndarray) -> Emst:
        root = self.meters.network.reference
        mapping = {}
        for k, (ln, mid) in enumerate(self.pairs):
            if sol[self.x0 + k] > 0.5:
                mapping[ln] = mid
        vertices = {root} | {v for v in self.nodes if sol[self.wcol[v]] > 0.5}
        return Emst(frozenset(vertices), tuple(sorted(mapping)), mapping, root)


def protect_exact(meters: MeterSet, target: Iterable[int], time_limit: float = 60.0,
                  seed_with_heuristic: bool = True,
                  trace: Callable[[dict], None] | None = None) -> ProtectionPlan:
    """Minimum-cost protected meter set whose measured subnetwork is
    observable and contains every target bus.

    The plan is optimal unless the time limit cut the search short, in which
    case the best plan found is returned with ``optimal=False``.
    """
    D = _check_target(meters, target)
    _reachable_targets(meters, D)
    model = _Model(meters, D)
    incumbent = None
    if seed_with_heuristic and is_observable(meters):
        incumbent = model.encode(protect_tph(meters, D).witness)
    res = solve_binary_milp(model.c, model.A_ub, model.b_ub, model.A_eq, model.b_eq,
                            lower=model.lower, upper=model.upper, binary=model.binary,
                            priority=model.priority, incumbent=incumbent,
                            time_limit=time_limit, trace=trace)
    if res.x is None:
        if res.status == "time_limit":
            raise TimeoutError("no feasible plan found before the time limit")
        raise ProtectionInfeasible("no observable subnetwork contains the targets", D)
    emst = model.decode(res.x)
    ok, problems = validate_emst(meters, emst)
    if not ok:
        raise RuntimeError("integer solution is not a valid tree: " + "; ".join(problems))
    stats = {"nodes": res.nodes, "bound": res.bound, "elapsed": res.elapsed, "status": res.status}
    return _plan(meters, emst, res.optimal, stats)


def _observable_residual(meters: MeterSet, pool: tuple[str, ...],
                         vertices: set[int]) -> tuple[str, ...] | None:
    """Meters of ``pool`` lying wholly inside ``vertices`` if they observe
    exactly that vertex set, else None."""
    net = meters.network
    kept = tuple(mid for mid in pool if meters.coverage(mid)[0] <= vertices)
    covered = set()
    for mid in kept:
        covered |= meters.coverage(mid)[0]
    if covered != vertices:
        return None
    cols = [net.column[b] for b in sorted(vertices - {net.reference})]
    if rank(meters.jacobian.rows(kept)[:, cols]) != len(cols):
        return None
    return kept


def protect_tph(meters: MeterSet, target: Iterable[int]) -> ProtectionPlan:
    """Tree pruning heuristic.

    Starting from an EMST of the full measured network, subtrees without
    target buses are cut off during a depth-first pass from the root, as long
    as the remaining buses stay observable with the meters lying wholly inside
    them. Sibling subtrees are first tried together, then one by one. After
    each pass a fresh EMST is built on what is left; the loop stops when a pass
    removes nothing.
    """
    D = _check_target(meters, target)
    _reachable_targets(meters, D)
    report = is_observable(meters)
    if not report:
        raise UnobservableError("the heuristic needs an observable network",
                                report.certificate, report.unobservable_buses)
    pool = meters.ids
    emst = construct_emst(meters)
    rounds = checks = 0
    history = []
    while True:
        rounds += 1
        kids = emst.children()
        subtree: dict[int, frozenset[int]] = {}

        def collect(v):
            s = {v}
            for c in kids[v]:
                s |= collect(c)
            subtree[v] = frozenset(s)
            return s

        collect(emst.root)
        residual = set(emst.vertices)
        pruned_any = False

        def try_prune(group):
            nonlocal residual, pool, pruned_any, checks
            trial = residual.difference(*(subtree[c] for c in group))
            checks += 1
            kept = _observable_residual(meters, pool, trial)
            if kept is None:
                return False
            residual, pool, pruned_any = trial, kept, True
            return True

        stack = [emst.root]
        while stack:
            u = stack.pop()
            free = [c for c in kids[u] if not subtree[c] & D]
            gone: set[int] = set()
            if len(free) > 1 and try_prune(free):
                gone.update(free)
            else:
                for c in free:
                    if try_prune([c]):
                        gone.add(c)
            stack.extend(reversed([c for c in kids[u] if c not in gone]))
        log.debug("pruning round %d leaves %d buses", rounds, len(residual))
        history.append(sorted(residual))
        if not pruned_any:
            break
        basic = find_basic_set(meters, pool)
        emst = construct_emst(meters, measured_subgraph(meters, pool), basic)
    return _plan(meters, emst, False, {"rounds": rounds, "checks": checks, "history": history})
