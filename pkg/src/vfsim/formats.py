"""Readers and writers for the text files the command line works with.

Model libraries and scenarios are TOML documents; traces, heat-map reports
and benchmark context lists are CSV.
"""
from __future__ import annotations

import csv
import io
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from vfsim.compiler import HeatMap
from vfsim.errors import ConsistencyError, InvalidArgumentError, ParseError
from vfsim.frames import (Context, ExecutionSpec, FactorSet, PropertySet, ValidityFrame,
                          ValidityRecord, format_value, parse_domain, parse_value, validation)
from vfsim.models import Blinker, PlannerConfig, Role, Scenario, ScriptEvent, VehicleState
from vfsim.runtime import Library, ModelSpec
from vfsim.vfg import VFGraph

TRACE_COLUMNS = ("t", "blinking", "selected_frame", "decision_kind", "target_lane",
                 "ego_x", "ego_lane", "step_cost", "switched")

_TOML_LINE = re.compile(r"line (\d+)")


def _load_toml(text, path):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _TOML_LINE.search(str(exc))
        raise ParseError(str(exc), path, int(m.group(1)) if m else None) from None


def _header_lines(text, table):
    """1-based line numbers of every ``[[table]]`` header, in order."""
    pat = re.compile(r"^\s*\[\[\s*" + re.escape(table) + r"\s*\]\]")
    return [i for i, line in enumerate(text.splitlines(), 1) if pat.match(line)]


def _line_for(lines, idx):
    return lines[idx] if idx < len(lines) else None


# -- model library ---------------------------------------------------------

def _domains(raw, where):
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"{where} must be a table of name = \"domain\"")
    return {name: parse_domain(str(text)) for name, text in raw.items()}


def _frame_from(entry, models):
    fid = entry["id"]
    model_id = entry["model"]
    if model_id not in models:
        raise InvalidArgumentError(f"frame {fid}: model {model_id!r} is not in the registry")
    validations = tuple(validation(v["name"], bool(v.get("expected", True)))
                        for v in entry.get("validations", []))
    return ValidityFrame(
        frame_id=fid, model_id=model_id,
        pi=PropertySet(_domains(entry.get("pi", {}), f"frame {fid} pi")),
        gamma=FactorSet(_domains(entry.get("gamma", {}), f"frame {fid} gamma")),
        exec=ExecutionSpec(str(entry.get("platform", "desk")), float(entry["wcet"]),
                           float(entry.get("mean_cost", entry["wcet"]))),
        validity=ValidityRecord(entry.get("status", "AssumedValid"), entry.get("notes", "")),
        validations=validations,
        map_pi=dict(entry.get("map_pi", {})), map_gamma=dict(entry.get("map_gamma", {})))


def parse_library(text: str, path=None) -> Library:
    doc = _load_toml(text, path)
    model_lines = _header_lines(text, "model")
    frame_lines = _header_lines(text, "frame")
    edge_lines = _header_lines(text, "edge")

    models = {}
    for i, entry in enumerate(doc.get("model", [])):
        try:
            spec = ModelSpec(entry["id"], entry["kind"], entry.get("params", {}))
            if spec.model_id in models:
                raise InvalidArgumentError(f"duplicate model id {spec.model_id!r}")
        except (KeyError, InvalidArgumentError) as exc:
            raise ParseError(f"model entry: {_describe(exc)}", path,
                             _line_for(model_lines, i)) from None
        models[spec.model_id] = spec

    graph = VFGraph()
    head = doc.get("head")
    for i, entry in enumerate(doc.get("frame", [])):
        try:
            frame = _frame_from(entry, models)
            graph.add_frame(frame, head=(frame.frame_id == head))
        except (KeyError, ValueError, InvalidArgumentError, ConsistencyError) as exc:
            raise ParseError(f"frame entry: {_describe(exc)}", path,
                             _line_for(frame_lines, i)) from None
    if head is not None and graph.head != head:
        raise ParseError(f"head {head!r} is not a declared frame", path, _key_line(text, "head"))

    for i, entry in enumerate(doc.get("edge", [])):
        try:
            graph.add_edge(entry["from"], entry["to"], entry["kind"])
        except (KeyError, ValueError, ConsistencyError) as exc:
            raise ParseError(f"edge entry: {_describe(exc)}", path,
                             _line_for(edge_lines, i)) from None
    try:
        requested = PropertySet(_domains(doc.get("requested", {}), "requested"))
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path, _key_line(text, "requested")) from None
    return Library(models, graph, requested)


def _describe(exc):
    if isinstance(exc, KeyError) and not isinstance(exc, InvalidArgumentError):
        return f"missing key {exc.args[0]!r}"
    return str(exc)


def _key_line(text, key):
    pat = re.compile(r"^\s*\[?\s*" + re.escape(key) + r"\b")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return None


def load_library(path) -> Library:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read library: {exc.strerror}", path) from None
    return parse_library(text, path)


def library_to_dict(lib: Library) -> dict:
    doc = {}
    if lib.graph.head is not None:
        doc["head"] = lib.graph.head
    doc["requested"] = {k: str(v) for k, v in lib.requested.items()}
    doc["model"] = [{"id": m.model_id, "kind": m.kind, "params": dict(m.params)}
                    for m in lib.models.values()]
    frames = []
    for fr in lib.graph.frames.values():
        frames.append({
            "id": fr.frame_id, "model": fr.model_id,
            "pi": {k: str(v) for k, v in fr.pi.items()},
            "gamma": {k: str(v) for k, v in fr.gamma.items()},
            "wcet": float(fr.exec.wcet), "mean_cost": float(fr.exec.mean_cost),
            "platform": fr.exec.platform_label,
            "status": fr.validity.status.value, "notes": fr.validity.notes,
            "map_pi": dict(fr.map_pi), "map_gamma": dict(fr.map_gamma),
            "validations": [{"name": c.name, "expected": c.expected} for c in fr.validations],
        })
    doc["frame"] = frames
    doc["edge"] = [{"from": e.source, "to": e.target, "kind": e.kind.value}
                   for e in lib.graph.edges]
    return doc


def serialize_library(lib: Library) -> str:
    return tomli_w.dumps(library_to_dict(lib))


# -- scenario --------------------------------------------------------------

_PLANNER_KEYS = {f for f in PlannerConfig.__dataclass_fields__}


def parse_scenario(text: str, path=None) -> Scenario:
    doc = _load_toml(text, path)
    vehicle_lines = _header_lines(text, "vehicle")
    event_lines = _header_lines(text, "event")
    vehicles = []
    for i, entry in enumerate(doc.get("vehicle", [])):
        try:
            vehicles.append(VehicleState(
                vehicle_id=str(entry["id"]), x=float(entry["x"]), lane=int(entry["lane"]),
                v=float(entry["v"]), a=float(entry.get("a", 0.0)),
                blinker=Blinker(entry.get("blinker", "Off")),
                role=Role(entry.get("role", "Other"))))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"vehicle entry: {_describe(exc)}", path,
                             _line_for(vehicle_lines, i)) from None
    events = []
    ids = {veh.vehicle_id for veh in vehicles}
    for i, entry in enumerate(doc.get("event", [])):
        try:
            if entry["vehicle"] not in ids:
                raise InvalidArgumentError(f"unknown vehicle {entry['vehicle']!r}")
            if "blinker" not in entry and "lane" not in entry:
                raise InvalidArgumentError("event needs a blinker state or a lane")
            events.append(ScriptEvent(
                t=float(entry["t"]), vehicle_id=str(entry["vehicle"]),
                blinker=Blinker(entry["blinker"]) if "blinker" in entry else None,
                lane=int(entry["lane"]) if "lane" in entry else None))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"event entry: {_describe(exc)}", path,
                             _line_for(event_lines, i)) from None

    planner_raw = dict(doc.get("planner", {}))
    unknown = set(planner_raw) - _PLANNER_KEYS
    if unknown:
        raise ParseError(f"unknown planner keys {sorted(unknown)}", path,
                         _key_line(text, "planner"))
    if "initiation" in planner_raw:
        planner_raw["initiation"] = tuple(float(f) for f in planner_raw["initiation"])
    try:
        scenario = Scenario(
            vehicles=tuple(vehicles), dt=float(doc["dt"]), horizon=float(doc["horizon"]),
            deadline=float(doc["deadline"]), duration=float(doc["duration"]),
            lane_count=int(doc.get("lane_count", 3)),
            lane_width=float(doc.get("lane_width", 3.5)),
            planner=PlannerConfig(**planner_raw), events=tuple(events),
            recheck=int(doc.get("recheck", 10)), observe=tuple(doc.get("observe", ())))
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}", path) from None
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc), path) from None
    for ev in events:
        if ev.lane is not None and not 0 <= ev.lane < scenario.lane_count:
            raise ParseError(f"event lane {ev.lane} outside the road", path,
                             _line_for(event_lines, events.index(ev)))
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc.strerror}", path) from None
    return parse_scenario(text, path)


def scenario_to_dict(sc: Scenario) -> dict:
    planner = {}
    for name in PlannerConfig.__dataclass_fields__:
        value = getattr(sc.planner, name)
        if value is None:
            continue
        planner[name] = list(value) if isinstance(value, tuple) else value
    doc = {"lane_count": sc.lane_count, "lane_width": sc.lane_width, "dt": sc.dt,
           "horizon": sc.horizon, "deadline": sc.deadline, "duration": sc.duration,
           "recheck": sc.recheck, "observe": list(sc.observe), "planner": planner,
           "vehicle": [{"id": v.vehicle_id, "role": v.role.value, "x": v.x, "lane": v.lane,
                        "v": v.v, "a": v.a, "blinker": v.blinker.value}
                       for v in sc.vehicles]}
    events = []
    for ev in sc.events:
        item = {"t": ev.t, "vehicle": ev.vehicle_id}
        if ev.blinker is not None:
            item["blinker"] = ev.blinker.value
        if ev.lane is not None:
            item["lane"] = ev.lane
        events.append(item)
    doc["event"] = events
    return doc


def serialize_scenario(sc: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(sc))


# -- traces ----------------------------------------------------------------

def _num(x) -> str:
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return str(x)
    return repr(round(x, 9) + 0.0)


def _flag(b) -> str:
    return "true" if b else "false"


@dataclass(frozen=True)
class TraceRow:
    t: float
    blinking: bool
    selected_frame: str
    decision_kind: str
    target_lane: int
    ego_x: float
    ego_lane: int
    step_cost: float
    switched: bool

    @classmethod
    def from_record(cls, rec) -> "TraceRow":
        return cls(rec.t, bool(rec.context.get("blinking", False)), rec.selected,
                   rec.decision.kind.value, rec.decision.target_lane, rec.ego_state.x,
                   rec.ego_state.lane, rec.step_cost, rec.switched)

    def cells(self) -> list:
        return [_num(self.t), _flag(self.blinking), self.selected_frame, self.decision_kind,
                str(self.target_lane), _num(self.ego_x), str(self.ego_lane),
                _num(self.step_cost), _flag(self.switched)]

    @classmethod
    def parse(cls, cells) -> "TraceRow":
        if len(cells) != len(TRACE_COLUMNS):
            raise ValueError(f"expected {len(TRACE_COLUMNS)} columns, got {len(cells)}")
        bools = {"true": True, "false": False}
        return cls(float(cells[0]), bools[cells[1]], cells[2], cells[3], int(cells[4]),
                   float(cells[5]), int(cells[6]), float(cells[7]), bools[cells[8]])


def format_trace(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in records:
        row = rec if isinstance(rec, TraceRow) else TraceRow.from_record(rec)
        writer.writerow(row.cells())
    return buf.getvalue()


def write_trace(records, path):
    Path(path).write_text(format_trace(records))


def read_trace(path):
    """Return ``(rows, malformed)``; malformed rows are skipped and counted."""
    rows, bad = [], 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ParseError("trace header does not match the trace schema", path, 1)
        for cells in reader:
            try:
                rows.append(TraceRow.parse(cells))
            except (ValueError, KeyError, IndexError):
                bad += 1
    return rows, bad


# -- heat-map reports --------------------------------------------------------

def cell_text(cell) -> str:
    return ";".join(f"{name}={'*' if v is None else format_value(v)}" for name, v in cell)


def parse_cell(text: str) -> tuple:
    items = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        name, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad cell item {part!r}")
        items[name.strip()] = None if value.strip() == "*" else parse_value(value)
    if not items:
        raise ValueError("empty cell")
    return HeatMap.cell(items)


def format_heatmap(heatmap: HeatMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("cell", "count", "frequency"))
    freqs = heatmap.frequencies()
    for cell in sorted(heatmap.counts, key=lambda c: (-heatmap.counts[c], cell_text(c))):
        writer.writerow((cell_text(cell), heatmap.counts[cell], repr(freqs[cell])))
    return buf.getvalue()


def read_heatmap(path) -> HeatMap:
    hm = HeatMap()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["cell", "count"]:
            raise ParseError("heat-map report must start with 'cell,count[,frequency]'", path, 1)
        for lineno, cells in enumerate(reader, 2):
            try:
                hm.add(parse_cell(cells[0]), int(cells[1]))
            except (ValueError, IndexError, InvalidArgumentError) as exc:
                raise ParseError(f"bad heat-map row: {exc}", path, lineno) from None
    return hm


def heatmap_from_traces(rows) -> HeatMap:
    hm = HeatMap()
    for row in rows:
        hm.add((("blinking", row.blinking),))
    return hm


# -- benchmark contexts ------------------------------------------------------

def read_contexts(path) -> list:
    """CSV with a header of factor names, one context per row."""
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ParseError("contexts file is empty", path)
    header = [h.strip() for h in rows[0]]
    for lineno, cells in enumerate(rows[1:], 2):
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} values, got {len(cells)}", path, lineno)
        out.append(Context({h: parse_value(c) for h, c in zip(header, cells)}))
    return out
