"""Power network and meter model for the linearized (DC) measurement setting.

Buses are identified by the integer ids found in the case file. Lines are
identified by their sorted endpoint pair ``(i, j)`` with ``i < j``; that is
also the canonical orientation used for flow measurements. Meters keep the
order in which they were declared, which is the row order of the Jacobian.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

FLOW = "flow"
INJECTION = "injection"

LineId = tuple[int, int]


class GridError(ValueError):
    """Invalid network or meter data."""


def line_id(i: int, j: int) -> LineId:
    if i == j:
        raise GridError(f"line endpoints must differ, got ({i}, {j})")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Bus:
    id: int
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    endpoints: LineId
    reactance: float

    def __post_init__(self):
        a, b = self.endpoints
        object.__setattr__(self, "endpoints", line_id(int(a), int(b)))
        if not self.reactance > 0:
            raise GridError(f"zero/negative reactance on line {self.endpoints}: {self.reactance}")

    @property
    def id(self) -> LineId:
        return self.endpoints


@dataclass(frozen=True)
class PowerNetwork:
    """Undirected bus/line graph with a single reference bus.

    The state vector holds the angles of every bus except the reference, in
    ascending bus-id order (``state_buses``).
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]

    def __post_init__(self):
        buses = tuple(sorted(self.buses, key=lambda b: b.id))
        lines = tuple(sorted(self.lines, key=lambda ln: ln.endpoints))
        object.__setattr__(self, "buses", buses)
        object.__setattr__(self, "lines", lines)

        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            raise GridError("duplicate bus id")
        refs = [b.id for b in buses if b.is_reference]
        if len(refs) != 1:
            raise GridError(f"exactly one reference bus required, found {len(refs)}")
        if len(buses) < 2:
            raise GridError("network needs at least two buses")
        known = set(ids)
        seen = set()
        for ln in lines:
            for end in ln.endpoints:
                if end not in known:
                    raise GridError(f"unknown bus {end} on line {ln.endpoints}")
            if ln.endpoints in seen:
                raise GridError(f"duplicate line {ln.endpoints}")
            seen.add(ln.endpoints)
        unreachable = known - self._reachable(self.reference)
        if unreachable:
            raise GridError(f"disconnected network: buses {sorted(unreachable)} unreachable from the reference")

    def _reachable(self, start: int) -> set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    @cached_property
    def reference(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    @cached_property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def state_buses(self) -> tuple[int, ...]:
        return tuple(b for b in self.bus_ids if b != self.reference)

    @cached_property
    def column(self) -> dict[int, int]:
        """Map from non-reference bus id to Jacobian column."""
        return {b: k for k, b in enumerate(self.state_buses)}

    @property
    def n(self) -> int:
        return len(self.state_buses)

    @cached_property
    def _line_map(self) -> dict[LineId, Line]:
        return {ln.endpoints: ln for ln in self.lines}

    @cached_property
    def _adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {b: [] for b in self.bus_ids}
        for i, j in self._line_map:
            adj[i].append(j)
            adj[j].append(i)
        return {b: tuple(sorted(v)) for b, v in adj.items()}

    def line(self, i: int, j: int) -> Line:
        try:
            return self._line_map[line_id(i, j)]
        except KeyError:
            raise GridError(f"unknown line ({i}, {j})") from None

    def has_line(self, i: int, j: int) -> bool:
        return i != j and line_id(i, j) in self._line_map

    def has_bus(self, b: int) -> bool:
        return b in self._adjacency

    def neighbors(self, b: int) -> tuple[int, ...]:
        return self._adjacency[b]

    def incident_lines(self, b: int) -> tuple[LineId, ...]:
        return tuple(line_id(b, k) for k in self._adjacency[b])

    def degree(self, b: int) -> int:
        return len(self._adjacency[b])


@dataclass(frozen=True)
class Meter:
    """A flow meter (``line`` set) or an injection meter (``bus`` set)."""

    id: str
    kind: str
    line: LineId | None = None
    bus: int | None = None
    cost: float = 1.0
    secured: bool = False

    def __post_init__(self):
        if self.kind == FLOW:
            if self.line is None or self.bus is not None:
                raise GridError(f"flow meter {self.id} needs a line and no bus")
            object.__setattr__(self, "line", line_id(*self.line))
        elif self.kind == INJECTION:
            if self.bus is None or self.line is not None:
                raise GridError(f"injection meter {self.id} needs a bus and no line")
        elif str(self.kind).lower() == "pmu":
            raise GridError("unsupported meter kind: PMU (out of scope)")
        else:
            raise GridError(f"unsupported meter kind: {self.kind}")
        if not self.cost >= 0:
            raise GridError(f"meter {self.id} has negative cost {self.cost}")

    @property
    def is_flow(self) -> bool:
        return self.kind == FLOW


@dataclass(frozen=True)
class MeterSet:
    """Ordered collection of meters validated against a network."""

    network: PowerNetwork = field(repr=False)
    meters: tuple[Meter, ...]

    def __post_init__(self):
        seen = set()
        for mt in self.meters:
            if mt.id in seen:
                raise GridError(f"duplicate meter id {mt.id}")
            seen.add(mt.id)
            if mt.is_flow and not self.network.has_line(*mt.line):
                raise GridError(f"meter {mt.id} references unknown line {mt.line}")
            if not mt.is_flow and not self.network.has_bus(mt.bus):
                raise GridError(f"meter {mt.id} references unknown bus {mt.bus}")

    def __iter__(self) -> Iterator[Meter]:
        return iter(self.meters)

    def __len__(self) -> int:
        return len(self.meters)

    def __contains__(self, meter_id: str) -> bool:
        return meter_id in self._by_id

    def __getitem__(self, meter_id: str) -> Meter:
        try:
            return self._by_id[meter_id]
        except KeyError:
            raise GridError(f"unknown meter id {meter_id!r}") from None

    @cached_property
    def _by_id(self) -> dict[str, Meter]:
        return {mt.id: mt for mt in self.meters}

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(mt.id for mt in self.meters)

    @cached_property
    def position(self) -> dict[str, int]:
        return {mid: k for k, mid in enumerate(self.ids)}

    def ordered(self, ids: Iterable[str]) -> tuple[str, ...]:
        """Return ``ids`` sorted in declaration order, rejecting unknown ids."""
        ids = set(ids)
        for mid in ids:
            self[mid]
        return tuple(mid for mid in self.ids if mid in ids)

    def subset(self, ids: Iterable[str]) -> MeterSet:
        keep = set(self.ordered(ids))
        return MeterSet(self.network, tuple(mt for mt in self.meters if mt.id in keep))

    def with_costs(self, costs: dict[str, float]) -> MeterSet:
        return MeterSet(self.network, tuple(
            replace(mt, cost=float(costs[mt.id])) if mt.id in costs else mt for mt in self.meters))

    def with_secured(self, ids: Iterable[str]) -> MeterSet:
        secured = set(self.ordered(ids))
        return MeterSet(self.network, tuple(
            replace(mt, secured=mt.secured or mt.id in secured) for mt in self.meters))

    def cost(self, ids: Iterable[str]) -> float:
        return float(sum(self[mid].cost for mid in ids))

    def coverage(self, meter_id: str) -> tuple[frozenset[int], frozenset[LineId]]:
        return self._coverage[meter_id]

    @cached_property
    def _coverage(self) -> dict[str, tuple[frozenset[int], frozenset[LineId]]]:
        net = self.network
        out = {}
        for mt in self.meters:
            if mt.is_flow:
                out[mt.id] = (frozenset(mt.line), frozenset([mt.line]))
            else:
                out[mt.id] = (frozenset((mt.bus, *net.neighbors(mt.bus))),
                              frozenset(net.incident_lines(mt.bus)))
        return out

    @cached_property
    def jacobian(self) -> Jacobian:
        return build_jacobian(self)

    def measures(self, meter_id: str, line: LineId) -> bool:
        return line in self._coverage[meter_id][1]

    def meters_on(self, line: LineId) -> tuple[str, ...]:
        """Meters measuring ``line``, in declaration order."""
        return self._meters_on.get(line, ())

    @cached_property
    def _meters_on(self) -> dict[LineId, tuple[str, ...]]:
        out: dict[LineId, list[str]] = {}
        for mid in self.ids:
            for ln in sorted(self._coverage[mid][1]):
                out.setdefault(ln, []).append(mid)
        return {k: tuple(v) for k, v in out.items()}


@dataclass(frozen=True)
class MeasuredSubgraph:
    vertices: frozenset[int]
    edges: frozenset[LineId]
    generating_meters: frozenset[str]


def measured_subgraph(meters: MeterSet, ids: Iterable[str] | None = None) -> MeasuredSubgraph:
    """Buses and lines observed by a subset of meters.

    A flow meter covers its line and both end buses; an injection meter covers
    its bus, every incident line and every bus at the other end of those lines.
    ``ids=None`` uses the whole meter set.
    """
    ids = meters.ids if ids is None else meters.ordered(ids)
    vertices: set[int] = set()
    edges: set[LineId] = set()
    for mid in ids:
        vs, es = meters.coverage(mid)
        vertices |= vs
        edges |= es
    return MeasuredSubgraph(frozenset(vertices), frozenset(edges), frozenset(ids))


@dataclass(frozen=True)
class Jacobian:
    """DC measurement matrix with its row (meter) and column (bus) labels."""

    matrix: np.ndarray
    meter_ids: tuple[str, ...]
    state_buses: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        pos = {mid: k for k, mid in enumerate(self.meter_ids)}
        idx = [pos[mid] for mid in ids]
        return self.matrix[idx, :]

    def columns(self, buses: Iterable[int]) -> list[int]:
        pos = {b: k for k, b in enumerate(self.state_buses)}
        return [pos[b] for b in buses]


def flow_row(network: PowerNetwork, i: int, j: int) -> np.ndarray:
    """Coefficients of the flow from bus ``i`` to bus ``j`` over their line."""
    row = np.zeros(network.n)
    y = 1.0 / network.line(i, j).reactance
    col = network.column
    if i in col:
        row[col[i]] += y
    if j in col:
        row[col[j]] -= y
    return row


def build_jacobian(meters: MeterSet) -> Jacobian:
    """Stack one DC measurement row per meter.

    Flow meters use the canonical orientation low id -> high id; an injection
    meter at ``b`` sums the flows leaving ``b`` over all its lines. The
    reference column is omitted.
    """
    net = meters.network
    H = np.zeros((len(meters), net.n))
    for k, mt in enumerate(meters):
        if mt.is_flow:
            H[k] = flow_row(net, *mt.line)
        else:
            for nb in net.neighbors(mt.bus):
                H[k] += flow_row(net, mt.bus, nb)
    return Jacobian(H, meters.ids, net.state_buses)
