"""Reading and writing case files.

Two input formats are understood:

* ``native-json``: a single JSON document with ``buses``, ``lines`` and
  optionally ``meters``.
* ``matpower-subset``: the ``mpc.bus`` and ``mpc.branch`` tables of a MATPOWER
  case file (bus ids, branch endpoints and reactance). Meters come from a
  separate native-format document.

Parallel lines are merged into one line with the equivalent reactance.
"""

from __future__ import annotations

import json
import re
from os import PathLike
from pathlib import Path

from .grid import FLOW, INJECTION, Bus, GridError, Line, Meter, MeterSet, PowerNetwork, line_id

NATIVE = "native-json"
MATPOWER = "matpower-subset"


class CaseSyntaxError(GridError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"syntax error at line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


def _read(source) -> str:
    if isinstance(source, PathLike):
        return Path(source).read_text()
    if isinstance(source, str) and "\n" not in source and "{" not in source:
        return Path(source).read_text()
    if isinstance(source, bytes):
        return source.decode()
    if hasattr(source, "read"):
        data = source.read()
        return data.decode() if isinstance(data, bytes) else data
    return str(source)


def _guess_format(text: str) -> str:
    return NATIVE if text.lstrip().startswith("{") else MATPOWER


def _merge_parallel(raw: list[tuple[int, int, float]]) -> list[Line]:
    admittance: dict[tuple[int, int], float] = {}
    for i, j, x in raw:
        if not x > 0:
            raise GridError(f"zero/negative reactance on line ({i}, {j}): {x}")
        key = line_id(i, j)
        admittance[key] = admittance.get(key, 0.0) + 1.0 / x
    return [Line(k, 1.0 / y) for k, y in admittance.items()]


def _meter_from_dict(d: dict) -> Meter:
    kind = str(d.get("kind", "")).lower()
    if kind == "pmu":
        raise GridError("unsupported meter kind: PMU (out of scope)")
    if "id" not in d:
        raise GridError(f"meter without id: {d}")
    line = tuple(int(v) for v in d["line"]) if kind == FLOW and "line" in d else None
    bus = int(d["bus"]) if kind == INJECTION and "bus" in d else None
    if kind == FLOW and (line is None or len(line) != 2):
        raise GridError(f"flow meter {d['id']} needs a two-element line")
    return Meter(str(d["id"]), kind, line=line, bus=bus,
                 cost=float(d.get("cost", 1.0)), secured=bool(d.get("secured", False)))


def _load_json(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise CaseSyntaxError("top level must be an object", 1, 1)
    return doc


def parse_meters(network: PowerNetwork, source) -> MeterSet:
    """Read a meter configuration (native format, only ``meters`` is used)."""
    doc = _load_json(_read(source))
    return MeterSet(network, tuple(_meter_from_dict(d) for d in doc.get("meters", [])))


def _parse_native(text: str) -> tuple[PowerNetwork, list[dict]]:
    doc = _load_json(text)
    try:
        buses = [Bus(int(b["id"]), bool(b.get("reference", False))) for b in doc["buses"]]
        raw = [(int(ln["from"]), int(ln["to"]), float(ln["x"])) for ln in doc["lines"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GridError(f"malformed bus/line record: {exc}") from None
    return PowerNetwork(tuple(buses), tuple(_merge_parallel(raw))), doc.get("meters", [])


_MATRIX = re.compile(r"mpc\.(bus|branch)\s*=\s*\[(.*?)\]\s*;", re.S)


def _matrix_rows(text: str, name: str) -> list[tuple[list[float], int]]:
    """Numeric rows of ``mpc.<name>`` with the 1-based line of each row."""
    for m in _MATRIX.finditer(text):
        if m.group(1) != name:
            continue
        body_start = m.start(2)
        rows = []
        offset = body_start
        for chunk in re.split(r"(;|\n)", m.group(2)):
            if chunk in (";", "\n"):
                offset += len(chunk)
                continue
            content = chunk.split("%", 1)[0]
            tokens = [(t.group(), t.start()) for t in re.finditer(r"\S+", content)]
            if tokens:
                values = []
                for tok, pos in tokens:
                    try:
                        values.append(float(tok))
                    except ValueError:
                        abs_pos = offset + pos
                        line = text.count("\n", 0, abs_pos) + 1
                        col = abs_pos - (text.rfind("\n", 0, abs_pos) + 1) + 1
                        raise CaseSyntaxError(f"bad number {tok!r} in mpc.{name}", line, col) from None
                rows.append((values, text.count("\n", 0, offset) + 1))
            offset += len(chunk)
        return rows
    raise CaseSyntaxError(f"missing mpc.{name} table", text.count("\n") + 1, 1)


def _parse_matpower(text: str) -> PowerNetwork:
    bus_rows = _matrix_rows(text, "bus")
    branch_rows = _matrix_rows(text, "branch")
    buses, ref = [], None
    for values, _ in bus_rows:
        bid = int(values[0])
        if len(values) > 1 and int(values[1]) == 3 and ref is None:
            ref = bid
        buses.append(bid)
    if ref is None:
        ref = min(buses)
    raw = []
    for values, lineno in branch_rows:
        if len(values) < 4:
            raise CaseSyntaxError("branch row needs at least 4 columns", lineno, 1)
        if len(values) >= 11 and values[10] == 0:
            continue
        raw.append((int(values[0]), int(values[1]), values[3]))
    return PowerNetwork(tuple(Bus(b, b == ref) for b in buses), tuple(_merge_parallel(raw)))


def parse_case(source, format: str | None = None, meters=None) -> tuple[PowerNetwork, MeterSet]:
    """Parse a case into a validated network and meter set.

    ``source`` may be a path, raw text/bytes or a file object. ``meters``
    optionally supplies a separate native-format meter document; it replaces
    any meters embedded in a native case.
    """
    text = _read(source)
    format = format or _guess_format(text)
    if format == NATIVE:
        network, meter_dicts = _parse_native(text)
    elif format == MATPOWER:
        network, meter_dicts = _parse_matpower(text), []
    else:
        raise ValueError(f"unknown case format {format!r}")
    if meters is not None:
        return network, parse_meters(network, meters)
    return network, MeterSet(network, tuple(_meter_from_dict(d) for d in meter_dicts))


def case_to_dict(network: PowerNetwork, meters: MeterSet | None = None) -> dict:
    doc = {
        "buses": [{"id": b.id, "reference": b.is_reference} for b in network.buses],
        "lines": [{"from": ln.endpoints[0], "to": ln.endpoints[1], "x": ln.reactance}
                  for ln in network.lines],
    }
    if meters is not None:
        doc["meters"] = [meter_to_dict(mt) for mt in meters]
    return doc


def meter_to_dict(mt: Meter) -> dict:
    d = {"id": mt.id, "kind": mt.kind}
    if mt.is_flow:
        d["line"] = list(mt.line)
    else:
        d["bus"] = mt.bus
    d["cost"] = mt.cost
    d["secured"] = mt.secured
    return d


def dump_case(network: PowerNetwork, meters: MeterSet | None = None) -> str:
    return json.dumps(case_to_dict(network, meters), indent=1)
