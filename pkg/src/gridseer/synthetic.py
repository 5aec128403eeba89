"""Random small networks and meter placements for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .grid import FLOW, INJECTION, Bus, Line, Meter, MeterSet, PowerNetwork


def random_network(rng: np.random.Generator, n_buses: int, extra_lines: int = 0,
                   x_range: tuple[float, float] = (0.05, 1.0)) -> PowerNetwork:
    """Random spanning tree on buses ``1..n_buses`` plus ``extra_lines`` chords.

    Bus 1 is the reference. Reactances are drawn uniformly from ``x_range`` so
    that rank deficiencies are structural, not numerical accidents.
    """
    edges = set()
    for b in range(2, n_buses + 1):
        p = int(rng.integers(1, b))
        edges.add((p, b))
    candidates = [(i, j) for i in range(1, n_buses + 1) for j in range(i + 1, n_buses + 1)
                  if (i, j) not in edges]
    if candidates and extra_lines:
        pick = rng.choice(len(candidates), size=min(extra_lines, len(candidates)), replace=False)
        edges.update(candidates[k] for k in pick)
    lines = tuple(Line(e, float(rng.uniform(*x_range))) for e in sorted(edges))
    buses = tuple(Bus(b, b == 1) for b in range(1, n_buses + 1))
    return PowerNetwork(buses, lines)


def random_meters(rng: np.random.Generator, network: PowerNetwork, n_flow: int, n_injection: int,
                  cost_range: tuple[float, float] | None = None) -> MeterSet:
    """Distinct flow meters on random lines and injection meters on random buses.

    Costs are 1 unless ``cost_range`` is given, in which case they are drawn
    uniformly (rounded to 0.01 to keep ties meaningful).
    """
    lines = [ln.endpoints for ln in network.lines]
    flow = rng.choice(len(lines), size=max(0, min(n_flow, len(lines))), replace=False)
    inj = rng.choice(network.bus_ids, size=max(0, min(n_injection, len(network.bus_ids))), replace=False)

    def cost():
        if cost_range is None:
            return 1.0
        return round(float(rng.uniform(*cost_range)), 2)

    meters = [Meter(f"f{lines[k][0]}_{lines[k][1]}", FLOW, line=lines[k], cost=cost())
              for k in sorted(flow)]
    meters += [Meter(f"p{b}", INJECTION, bus=int(b), cost=cost()) for b in sorted(inj)]
    return MeterSet(network, tuple(meters))


def random_instance(rng: np.random.Generator, n_buses: int, extra_lines: int, n_flow: int,
                    n_injection: int, cost_range=None, observable: bool = False,
                    max_tries: int = 200) -> tuple[PowerNetwork, MeterSet]:
    """Draw a network and meters; with ``observable=True`` redraw until the
    whole network is observable."""
    from .linalg import rank

    for _ in range(max_tries):
        net = random_network(rng, n_buses, extra_lines)
        meters = random_meters(rng, net, n_flow, n_injection, cost_range)
        if not observable or rank(meters.jacobian.matrix) == net.n:
            return net, meters
    raise RuntimeError("could not draw an observable instance; add meters")
