"""JSON-ready dictionaries and Graphviz DOT renderings of results."""

from __future__ import annotations

from .attack import VIRTUAL, AttackPlan
from .grid import PowerNetwork
from .observability import Emst
from .protection import ProtectionPlan


def emst_to_dict(emst: Emst) -> dict:
    return {
        "vertices": sorted(emst.vertices),
        "edges": [list(e) for e in emst.tree_edges],
        "mapping": {emst.mapping[e]: list(e) for e in emst.tree_edges},
    }


def plan_to_dict(plan: ProtectionPlan) -> dict:
    return {
        "meters": list(plan.meters),
        "cost": plan.cost,
        "optimal": plan.optimal,
        "witness": emst_to_dict(plan.witness),
    }


def attack_to_dict(plan: AttackPlan) -> dict:
    return {
        "cut": [list(e) for e in plan.cut_edges],
        "meters": list(plan.compromised_meters),
        "cost": plan.cost,
        "realized_cost": plan.realized_cost,
        "flow_value": plan.flow_value,
        "terminal_side": sorted(plan.terminal_side),
        "virtual_terminal": bool(plan.cut_graph.virtual_edges),
        "c": plan.bias.tolist(),
        "a": plan.vector.a.tolist(),
    }


def _dot_lines(network: PowerNetwork, bold: set, label: dict, shaded: set,
               red: set = frozenset()) -> list[str]:
    out = ["graph G {", "  node [shape=circle];"]
    for b in network.bus_ids:
        attrs = [f'label="{b}"']
        if b == network.reference:
            attrs.append("shape=doublecircle")
        if b in shaded:
            attrs.append('style=filled fillcolor="lightgrey"')
        out.append(f"  {b} [{' '.join(attrs)}];")
    for ln in network.lines:
        e = ln.endpoints
        attrs = []
        if e in red:
            attrs.append('color="red" penwidth=3')
        elif e in bold:
            attrs.append("penwidth=3")
        else:
            attrs.append("style=dashed color=grey")
        if e in label:
            attrs.append(f'label="{label[e]}"')
        out.append(f"  {e[0]} -- {e[1]} [{' '.join(attrs)}];")
    return out


def emst_to_dot(network: PowerNetwork, emst: Emst) -> str:
    out = _dot_lines(network, set(emst.tree_edges), dict(emst.mapping), set(emst.vertices))
    return "\n".join(out + ["}"]) + "\n"


def attack_to_dot(network: PowerNetwork, plan: AttackPlan) -> str:
    out = _dot_lines(network, set(), {}, set(plan.terminal_side), red=set(plan.cut_edges))
    if plan.cut_graph.virtual_edges:
        out.append(f'  "{VIRTUAL}" [shape=box];')
        for b in plan.cut_graph.virtual_edges:
            out.append(f'  {b} -- "{VIRTUAL}" [style=dotted label="inf"];')
    return "\n".join(out + ["}"]) + "\n"
