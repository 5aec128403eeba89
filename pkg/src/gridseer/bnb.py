"""Best-bound branch-and-bound for mixed 0/1 linear programs.

LP relaxations are solved with HiGHS through :func:`scipy.optimize.linprog`;
everything else (node queue, branching, incumbent handling, time limit) is
local to this module.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

log = logging.getLogger(__name__)

INT_TOL = 1e-6


@dataclass
class MilpResult:
    x: np.ndarray | None
    objective: float
    optimal: bool
    bound: float
    nodes: int
    elapsed: float
    status: str


@dataclass
class _Node:
    bound: float
    lower: np.ndarray
    upper: np.ndarray
    depth: int
    x: np.ndarray | None = field(default=None, compare=False)


def _lp(c, A_ub, b_ub, A_eq, b_eq, lower, upper):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lower, upper]), method="highs")
    if res.status == 2:
        return None
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return res


def solve_binary_milp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, lower, upper,
                      binary: np.ndarray, priority: np.ndarray | None = None,
                      incumbent: np.ndarray | None = None, time_limit: float = 60.0,
                      trace: Callable[[dict], None] | None = None) -> MilpResult:
    """Minimize ``c @ x`` over the constraints with ``x[binary]`` in {0, 1}.

    Nodes are expanded lowest LP bound first (ties: older node first). A node
    is branched on the fractional binary closest to 0.5, scanning variables
    with ``priority`` set before the others and lower indices first.
    ``incumbent`` seeds the upper bound with a known feasible point.
    """
    start = time.perf_counter()
    c = np.asarray(c, dtype=float)
    binary = np.asarray(binary, dtype=bool)
    priority = np.zeros_like(binary) if priority is None else np.asarray(priority, dtype=bool)
    groups = [np.flatnonzero(binary & priority), np.flatnonzero(binary & ~priority)]

    best_x = None if incumbent is None else np.asarray(incumbent, dtype=float)
    best = np.inf if best_x is None else float(c @ best_x)
    eps = 1e-9 * max(1.0, np.abs(c).sum())

    def emit(event, **kw):
        if trace is not None:
            trace({"event": event, **kw})

    root = _lp(c, A_ub, b_ub, A_eq, b_eq, np.asarray(lower, float), np.asarray(upper, float))
    if root is None:
        return MilpResult(None, np.inf, True, np.inf, 1, time.perf_counter() - start, "infeasible")

    counter = itertools.count()
    heap = [(root.fun, next(counter), _Node(root.fun, np.asarray(lower, float).copy(),
                                           np.asarray(upper, float).copy(), 0, root.x))]
    nodes = 1
    status = "optimal"
    while heap:
        bound, _, node = heapq.heappop(heap)
        if bound >= best - eps:
            heap.clear()
            break
        if time.perf_counter() - start > time_limit:
            heapq.heappush(heap, (bound, -1, node))
            status = "time_limit"
            break
        x = node.x
        branch_var = None
        for group in groups:
            if group.size == 0:
                continue
            frac = np.abs(x[group] - np.round(x[group]))
            cand = np.flatnonzero(frac > INT_TOL)
            if cand.size:
                dist = np.abs(x[group[cand]] - 0.5)
                branch_var = int(group[cand[np.argmin(dist)]])
                break
        if branch_var is None:
            xr = x.copy()
            xr[binary] = np.round(xr[binary])
            val = float(c @ xr)
            if val < best - eps:
                best, best_x = val, xr
                emit("incumbent", objective=val, nodes=nodes)
                log.debug("incumbent %.6g after %d nodes", val, nodes)
            continue
        for fix in (0.0, 1.0):
            lo, up = node.lower.copy(), node.upper.copy()
            lo[branch_var] = up[branch_var] = fix
            res = _lp(c, A_ub, b_ub, A_eq, b_eq, lo, up)
            nodes += 1
            if res is None or res.fun >= best - eps:
                continue
            heapq.heappush(heap, (res.fun, next(counter), _Node(res.fun, lo, up, node.depth + 1, res.x)))
        if nodes % 50 < 2:
            emit("progress", nodes=nodes, open=len(heap), bound=bound, incumbent=best)

    final_bound = min([best] + [b for b, _, _ in heap])
    elapsed = time.perf_counter() - start
    emit("done", nodes=nodes, bound=final_bound, incumbent=best, status=status, elapsed=elapsed)
    if best_x is None:
        return MilpResult(None, np.inf, status == "optimal", final_bound, nodes, elapsed,
                          "infeasible" if status == "optimal" else status)
    return MilpResult(best_x, best, status == "optimal", final_bound, nodes, elapsed, status)
