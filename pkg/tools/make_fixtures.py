"""Regenerate the JSON fixtures under src/gridseer/fixtures.

The IEEE topologies and branch reactances come from PYPOWER's case files;
install it first (``pip install pypower``). Run from the repository root:

    python3 tools/make_fixtures.py
"""

import json
from collections import deque
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "gridseer" / "fixtures"


def ieee_lines(case):
    ppc = case()
    status = ppc["branch"][:, 10]
    raw = {}
    for row in ppc["branch"][status != 0]:
        i, j, x = int(row[0]), int(row[1]), float(row[3])
        key = (min(i, j), max(i, j))
        raw[key] = raw.get(key, 0.0) + 1.0 / x
    buses = sorted(int(b) for b in ppc["bus"][:, 0])
    ref = int(ppc["bus"][ppc["bus"][:, 1] == 3][0, 0])
    return buses, ref, {k: round(1.0 / y, 6) for k, y in sorted(raw.items())}


def default_meters(buses, ref, lines, skip_lines=(), skip_injections=()):
    """Flow meters on a BFS spanning tree from the reference, injection meters
    on every odd-degree bus."""
    adj = {b: [] for b in buses}
    for i, j in lines:
        adj[i].append(j)
        adj[j].append(i)
    tree, seen, queue = [], {ref}, deque([ref])
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u]):
            key = (min(u, v), max(u, v))
            if v not in seen and key not in skip_lines:
                seen.add(v)
                tree.append(key)
                queue.append(v)
    meters = [{"id": f"f{i}_{j}", "kind": "flow", "line": [i, j], "cost": 1.0}
              for i, j in sorted(tree)]
    meters += [{"id": f"p{b}", "kind": "injection", "bus": b, "cost": 1.0}
               for b in buses if len(adj[b]) % 2 == 1 and b not in skip_injections]
    return meters


def case_doc(buses, ref, lines, meters, notes):
    return {
        "notes": notes,
        "buses": [{"id": b, "reference": b == ref} for b in buses],
        "lines": [{"from": i, "to": j, "x": x} for (i, j), x in lines.items()],
        "meters": meters,
    }


def write(name, doc):
    (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")
    print("wrote", name)


def matpower_text(case, name):
    ppc = case()
    out = [f"function mpc = {name}", "mpc.version = '2';", "mpc.baseMVA = 100;", "",
           "%% bus data", "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
           "mpc.bus = ["]
    for row in ppc["bus"]:
        out.append("\t" + "\t".join(f"{v:g}" for v in row[:13]) + ";")
    out += ["];", "", "%% branch data",
            "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            "mpc.branch = ["]
    for row in ppc["branch"]:
        out.append("\t" + "\t".join(f"{v:g}" for v in row[:13]) + ";")
    out.append("];")
    return "\n".join(out) + "\n"


def main():
    from pypower.case14 import case14
    from pypower.case57 import case57
    from pypower.case118 import case118

    buses, ref, lines14 = ieee_lines(case14)
    meters = default_meters(buses, ref, lines14, skip_lines={(2, 4)}, skip_injections={2, 4})
    write("ieee14.json", case_doc(buses, ref, lines14, meters,
        "IEEE 14-bus topology and reactances. Default meters: flow meters on a BFS spanning "
        "tree from bus 1 plus injection meters on odd-degree buses. Tuned so that line (2,4) "
        "stays unmeasured: it is kept out of the tree and buses 2 and 4 carry no injection meter."))
    (OUT / "ieee14.m").write_text(matpower_text(case14, "case14"))
    (OUT / "ieee14_meters.json").write_text(json.dumps({"meters": meters}, indent=1) + "\n")

    for case, name in ((case57, "ieee57.json"), (case118, "ieee118.json")):
        b, r, ln = ieee_lines(case)
        write(name, case_doc(b, r, ln, default_meters(b, r, ln),
            f"IEEE {len(b)}-bus topology and reactances (parallel branches merged). Default meters: "
            "flow meters on a BFS spanning tree from the reference plus injection meters on "
            "odd-degree buses."))

    # Corner example: measured subnetwork {1,2,4,5,6}. r2 and r4 are injection
    # meters; r3 duplicates information already carried by r1 and r2.
    corner = [
        {"id": "r1", "kind": "flow", "line": [1, 2]},
        {"id": "r2", "kind": "injection", "bus": 1},
        {"id": "r3", "kind": "flow", "line": [1, 5]},
        {"id": "r4", "kind": "injection", "bus": 5},
        {"id": "r5", "kind": "flow", "line": [5, 6]},
    ]
    write("corner.json", case_doc(buses, ref, lines14, corner,
        "Reconstructed measured-subnetwork example on the 14-bus topology. Five meters observe "
        "buses 1, 2, 4, 5, 6 and lines (1,2), (1,5), (2,5), (4,5), (5,6); r2 and r4 are "
        "injection meters and r3 is redundant."))

    # Pruning example: a 12-vertex tree plus the non-tree line (6,7); the injection
    # meter at bus 6 covers lines (4,6), (6,7), (6,8).
    tree5 = [(1, 2), (1, 3), (1, 4), (2, 9), (3, 5), (4, 6), (4, 7), (6, 8),
             (7, 10), (7, 11), (7, 12)]
    rng = np.random.default_rng(5)
    lines5 = {e: round(float(rng.uniform(0.05, 0.5)), 4) for e in sorted(tree5 + [(6, 7)])}
    meters5 = [{"id": f"f{i}_{j}", "kind": "flow", "line": [i, j]} for i, j in tree5 if (i, j) != (4, 6)]
    meters5.append({"id": "p6", "kind": "injection", "bus": 6})
    write("pruning.json", case_doc(list(range(1, 13)), 1, lines5, meters5,
        "Reconstructed tree-pruning example: terminals 5 and 8. The injection meter at bus 6 "
        "is the only meter on line (4,6) and also measures bus 7."))

    all_flows = [{"id": f"f{i}_{j}", "kind": "flow", "line": [i, j]} for i, j in lines14]
    injections = [{"id": f"p{b}", "kind": "injection", "bus": b} for b in buses if b != 8]
    write("cut_single.json", case_doc(buses, ref, lines14, all_flows + injections,
        "Reconstructed single-target cut example on the 14-bus topology: a flow meter on every "
        "line and an injection meter on every bus except 8; unit costs. Line (7,8) then weighs "
        "2 and every other separating cut weighs more."))
    secured_root = [dict(m, secured=True) if tuple(m["line"]) in {(1, 2), (1, 5)} else m
                    for m in all_flows]
    write("cut_pair.json", case_doc(buses, ref, lines14, secured_root,
        "Reconstructed two-target cut example on the 14-bus topology (targets 10 and 12): a "
        "flow meter on every line, unit costs, with the two meters next to the reference bus "
        "secured so the cut cannot simply isolate bus 1."))


if __name__ == "__main__":
    main()
