"""Augmenting-path maximum flow (Edmonds-Karp) on small directed networks."""

from __future__ import annotations

from collections import deque
from typing import Hashable


class FlowNetwork:
    """Residual graph with capacities that may be raised between solves.

    Nodes are arbitrary hashables; adjacency is scanned in insertion order so
    augmenting paths, and therefore flows and cuts, are deterministic.
    """

    def __init__(self):
        self._index: dict[Hashable, int] = {}
        self.nodes: list[Hashable] = []
        self._adj: list[list[int]] = []
        self._head: list[int] = []
        self._cap: list[float] = []
        self._flow: list[float] = []

    def node(self, key: Hashable) -> int:
        if key not in self._index:
            self._index[key] = len(self.nodes)
            self.nodes.append(key)
            self._adj.append([])
        return self._index[key]

    def add_edge(self, u: Hashable, v: Hashable, cap: float) -> int:
        """Add arc ``u -> v``; returns the arc handle."""
        a, b = self.node(u), self.node(v)
        e = len(self._head)
        self._head += [b, a]
        self._cap += [float(cap), 0.0]
        self._flow += [0.0, 0.0]
        self._adj[a].append(e)
        self._adj[b].append(e + 1)
        return e

    def set_capacity(self, e: int, cap: float) -> None:
        self._cap[e] = float(cap)

    def flow(self, e: int) -> float:
        return self._flow[e]

    def tail(self, e: int) -> Hashable:
        return self.nodes[self._head[e ^ 1]]

    def head(self, e: int) -> Hashable:
        return self.nodes[self._head[e]]

    def arcs(self):
        """Forward arc handles."""
        return range(0, len(self._head), 2)

    def _residual(self, e: int) -> float:
        return self._cap[e] - self._flow[e]

    def _bfs(self, s: int, t: int) -> list[int] | None:
        parent = [-1] * len(self.nodes)
        seen = [False] * len(self.nodes)
        seen[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self._adj[u]:
                v = self._head[e]
                if not seen[v] and self._residual(e) > 1e-12:
                    seen[v] = True
                    parent[v] = e
                    if v == t:
                        path = []
                        while v != s:
                            path.append(parent[v])
                            v = self._head[parent[v] ^ 1]
                        return path[::-1]
                    queue.append(v)
        return None

    def max_flow(self, s: Hashable, t: Hashable) -> float:
        """Augment until no path is left; returns the flow added by this call."""
        si, ti = self.node(s), self.node(t)
        total = 0.0
        while (path := self._bfs(si, ti)) is not None:
            push = min(self._residual(e) for e in path)
            for e in path:
                self._flow[e] += push
                self._flow[e ^ 1] -= push
            total += push
        return total

    def value(self, s: Hashable) -> float:
        si = self.node(s)
        return sum(self._flow[e] for e in self._adj[si] if e % 2 == 0)

    def source_side(self, s: Hashable) -> set[Hashable]:
        """Nodes reachable from ``s`` in the residual graph."""
        si = self.node(s)
        seen = {si}
        queue = deque([si])
        while queue:
            u = queue.popleft()
            for e in self._adj[u]:
                v = self._head[e]
                if v not in seen and self._residual(e) > 1e-12:
                    seen.add(v)
                    queue.append(v)
        return {self.nodes[i] for i in seen}
