"""Model files, trajectory and causal-trace serialization.

Model files are JSON documents checked against ``schema/model.v1.json``
before the model is built. Trajectories and traces are written with a fixed
field order and floats rendered with 17 significant digits, so identical runs
produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, TextIO

import jsonschema

from .clocks import INF, TimeEventSet, validate_event_set
from .core import Interaction, Model, Space, StateVector, ZeroSet, build_model
from .engine import CausalTrace, EngineConfig, Trajectory
from .errors import BadDistribution, ModelSyntaxError, SchemaError, SerializationError, ValidationError
from .runtime import ClockSpec, Distribution, Fixed, NormalGoods, Roles, RunData
from .transitions import REGISTRY, transition_from_dict

SCHEMA_VERSION = "1"


@lru_cache(maxsize=1)
def model_schema() -> dict:
    return json.loads(resources.files("ispace").joinpath("schema/model.v1.json").read_text("utf-8"))


def bundled_model_path(name: str) -> Path:
    """Path of a model file shipped with the package (``"ode_decay"``, ``"life_blinker"``)."""
    return Path(str(resources.files("ispace").joinpath(f"models/{name}.json")))


# -- model files: writing -----------------------------------------------------

def _time_out(t: float):
    return "inf" if t == INF else t


def _time_in(t) -> float:
    return INF if t == "inf" else float(t)


def _events_out(ev: TimeEventSet) -> dict:
    return {"points": list(ev.points), "intervals": [list(iv) for iv in ev.intervals]}


def _clock_out(spec: ClockSpec) -> dict:
    if spec.deterministic:
        return {"events": _events_out(spec.events)}
    d: dict[str, Any] = {"mode": spec.mode}
    if spec.distribution is not None:
        d["distribution"] = _dist_out(spec.distribution)
    if spec.length is not None:
        d["length"] = _dist_out(spec.length)
    return d


def _dist_out(dist: Distribution) -> dict:
    if dist.param_fn is not None:
        raise SerializationError("history-dependent distribution parameters cannot be written to a file")
    return {"kind": dist.kind, "params": [_time_out(p) for p in dist.params]}


def _neighborhood_out(rule) -> dict:
    if isinstance(rule, Roles):
        return {"kind": "roles"}
    if isinstance(rule, Fixed):
        return {"kind": "fixed", "entities": list(rule.entities)}
    raise SerializationError(f"neighborhood rule {rule!r} cannot be written to a file")


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def model_to_dict(model: Model, engine: EngineConfig | None = None) -> dict:
    """Model-file document for ``model``.

    Raises :class:`SerializationError` when the model uses Python callables
    outside the named library.
    """
    inter = {}
    for iid, it in sorted(model.interactions.items()):
        d: dict[str, Any] = {"agents": list(it.agents), "propagator": it.propagator, "type": it.itype,
                             "patient": it.patient, "resource_space": it.resource_space.to_dict()}
        if it.zero_set is not None:
            if not isinstance(it.zero_set, ZeroSet):
                raise SerializationError(f"zero set of {iid!r} is a Python callable", path=f"interactions.{iid}")
            d["zero_set"] = it.zero_set.to_dict()
        inter[iid] = d
    run_data = {}
    for iid, rd in sorted(model.run_data.items()):
        d = {"start": _clock_out(rd.start), "ongoing": _clock_out(rd.ongoing),
             "arrival": _dist_out(rd.arrival), "neighborhood": _neighborhood_out(rd.neighborhood)}
        if rd.goods is not None:
            if not isinstance(rd.goods, NormalGoods):
                raise SerializationError(f"goods rule of {iid!r} cannot be written", path=f"run_data.{iid}")
            d["goods"] = {"kind": "normal", "mean": list(rd.goods.mean), "cov": [list(r) for r in rd.goods.cov]}
        run_data[iid] = d
    transitions = {}
    for e, f in sorted(model.transitions.items()):
        if not isinstance(f, tuple(REGISTRY.values())):
            raise SerializationError(f"transition of {e!r} is not from the named library", path=f"transitions.{e}")
        try:
            transitions[e] = f.to_dict()
        except TypeError as exc:
            raise SerializationError(str(exc), path=f"transitions.{e}") from None
    doc = {
        "version": SCHEMA_VERSION,
        "model": {
            "entities": {e: sp.to_dict() for e, sp in sorted(model.entities.items())},
            "t_start": model.t_start,
            "t_end": _time_out(model.t_end),
            "delta": _time_out(model.delta),
            "types": sorted(model.types),
            "interactions": inter,
            "run_data": run_data,
            "transitions": transitions,
            "initial_states": {e: model.initial_states[e].to_dict() for e in sorted(model.entities)},
        },
    }
    if engine is not None:
        doc["engine"] = {"eps_t": engine.eps_t, "micro_step": engine.micro_step,
                         "horizon": None if engine.horizon is None else _time_out(engine.horizon)}
    return doc


def serialize_model(model: Model, engine: EngineConfig | None = None) -> str:
    return json.dumps(model_to_dict(model, engine), indent=2) + "\n"


def write_model_file(model: Model, path: str | os.PathLike, engine: EngineConfig | None = None) -> None:
    Path(path).write_text(serialize_model(model, engine), encoding="utf-8")


# -- model files: reading -----------------------------------------------------

def _locate(text: str, path: list) -> tuple[int | None, int | None]:
    """Best-effort line/column of the JSON member addressed by ``path``."""
    pos, found = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        k = text.find(json.dumps(str(key)), pos)
        if k < 0:
            break
        pos = found = k
    if found is None:
        return None, None
    line = text.count("\n", 0, found) + 1
    return line, found - (text.rfind("\n", 0, found) + 1) + 1


def _space_in(d) -> Space:
    return Space.from_dict(d)


def _dist_in(d) -> Distribution:
    return Distribution(d["kind"], tuple(_time_in(p) for p in d["params"]))


def _clock_in(d: Mapping, t_start: float, t_end: float) -> ClockSpec:
    if "events" in d:
        ev = d["events"]
        return ClockSpec(events=validate_event_set(ev.get("points", ()), ev.get("intervals", ()),
                                                   t_start=t_start, t_end=t_end))
    return ClockSpec(distribution=_dist_in(d["distribution"]) if "distribution" in d else None,
                     mode=d.get("mode", "instant"),
                     length=_dist_in(d["length"]) if "length" in d else None)


def _run_data_in(d: Mapping, t_start: float, t_end: float) -> RunData:
    kw: dict[str, Any] = {}
    if "start" in d:
        kw["start"] = _clock_in(d["start"], t_start, t_end)
    if "ongoing" in d:
        kw["ongoing"] = _clock_in(d["ongoing"], t_start, t_end)
    if "arrival" in d:
        kw["arrival"] = _dist_in(d["arrival"])
    nb = d.get("neighborhood", {"kind": "roles"})
    kw["neighborhood"] = Roles() if nb["kind"] == "roles" else Fixed(tuple(nb.get("entities", ())))
    if "goods" in d:
        kw["goods"] = NormalGoods(tuple(d["goods"]["mean"]), tuple(tuple(r) for r in d["goods"]["cov"]))
    return RunData(**kw)


def model_from_dict(doc: Mapping) -> tuple[Model, EngineConfig]:
    """Build a model from an already schema-checked document."""
    m = doc["model"]
    t_start, t_end = float(m["t_start"]), _time_in(m["t_end"])
    interactions = {}
    for iid, d in m["interactions"].items():
        zs = d.get("zero_set")
        interactions[iid] = Interaction(iid, tuple(d.get("agents", ())), d["propagator"], d["type"], d["patient"],
                                        _space_in(d.get("resource_space", {"kind": "any"})),
                                        ZeroSet(zs["kind"], zs["value"]) if zs else None)
    decl: dict[str, Any] = {
        "entities": {e: _space_in(s) for e, s in m["entities"].items()},
        "t_start": t_start, "t_end": t_end,
        "interactions": interactions,
        "run_data": {},
        "delta": _time_in(m.get("delta", 0.0)),
        "transitions": {},
        "initial_states": m["initial_states"],
    }
    if "types" in m:
        decl["types"] = set(m["types"])
    for iid, d in m.get("run_data", {}).items():
        try:
            try:
                decl["run_data"][iid] = _run_data_in(d, t_start, t_end)
            except BadDistribution as exc:
                raise ValidationError(exc.message, code=exc.code) from None
        except ValidationError as exc:
            exc.path = f"run_data.{iid}" + (f".{exc.path}" if exc.path else "")
            raise
    for e, d in m.get("transitions", {}).items():
        try:
            decl["transitions"][e] = transition_from_dict(d)
        except ValidationError as exc:
            exc.path = f"transitions.{e}"
            raise
    model = build_model(decl)
    eng = doc.get("engine", {})
    horizon = eng.get("horizon")
    config = EngineConfig(eps_t=float(eng.get("eps_t", 1e-9)), micro_step=eng.get("micro_step"),
                          horizon=None if horizon is None else _time_in(horizon))
    return model, config


def parse_model_text(text: str) -> tuple[Model, EngineConfig]:
    """Parse model-file text; errors carry a field path and, when possible, a line."""
    if not text.strip():
        raise ModelSyntaxError("model file is empty", line=1, column=1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    validator = jsonschema.Draft202012Validator(model_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        where = list(err.absolute_path)
        line, col = _locate(text, where)
        raise SchemaError(err.message, path=".".join(map(str, where)) or "$", line=line, column=col)
    try:
        return model_from_dict(doc)
    except ValidationError as exc:
        where = ["model"] + (exc.path.split(".") if exc.path else [])
        exc.path = ".".join(where)
        exc.line, exc.column = _locate(text, where)
        raise


def parse_model_file(source: str | os.PathLike) -> tuple[Model, EngineConfig]:
    """Parse a model file given by path, or model-file text directly."""
    if isinstance(source, str) and (not source.strip() or source.lstrip().startswith("{")):
        return parse_model_text(source)
    return parse_model_text(Path(source).read_text(encoding="utf-8"))


# -- JSON rendering with exact floats ---------------------------------------

def _fmt(v) -> str:
    if v is None or isinstance(v, bool):
        return json.dumps(v)
    if isinstance(v, float):
        if math.isnan(v):
            raise SerializationError("NaN cannot be serialized")
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        s = format(v, ".17g")
        return s if any(ch in s for ch in ".en") else s + ".0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if isinstance(v, Mapping):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_fmt(x)}" for k, x in v.items()) + "}"
    if hasattr(v, "tolist"):
        return _fmt(v.tolist())
    raise SerializationError(f"cannot serialize {type(v).__name__}")


# -- trajectories ---------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryRecord:
    time: float
    entity: str
    activation: Mapping[str, float]
    goods: Mapping[str, Any]
    proper: Any


def trajectory_records(traj: Trajectory) -> list[TrajectoryRecord]:
    return [TrajectoryRecord(t, e, dict(sorted(sv.activation.items())), dict(sorted(sv.goods.items())), sv.proper)
            for t, e, sv in traj.records()]


def _open_sink(sink):
    if isinstance(sink, (str, os.PathLike)):
        return open(sink, "w", encoding="utf-8", newline=""), True
    return sink, False


def write_trajectory(traj: Trajectory | Iterable[TrajectoryRecord], fmt: str = "jsonl", sink: TextIO | str | os.PathLike | None = None) -> str | None:
    """Write one record per line (``jsonl``) or component rows (``csv``).

    With ``sink=None`` the text is returned instead.
    """
    records = trajectory_records(traj) if isinstance(traj, Trajectory) else list(traj)
    buf = io.StringIO()
    if fmt == "jsonl":
        for r in records:
            buf.write("{" + f'"time":{_fmt(float(r.time))},"entity":{_fmt(r.entity)},'
                      f'"activation":{_fmt(r.activation)},"goods":{_fmt(r.goods)},"proper":{_fmt(r.proper)}' + "}\n")
    elif fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "entity", "component", "value"])
        for r in records:
            t = _fmt(float(r.time))
            for iid, a in r.activation.items():
                w.writerow([t, r.entity, f"activation/{iid}", _fmt(float(a))])
            for iid, g in r.goods.items():
                w.writerow([t, r.entity, f"goods/{iid}", _fmt(g)])
            w.writerow([t, r.entity, "proper", _fmt(r.proper)])
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    text = buf.getvalue()
    if sink is None:
        return text
    out, owned = _open_sink(sink)
    try:
        out.write(text)
    finally:
        if owned:
            out.close()
    return None


def _revive_time(v) -> float:
    return _time_in(v) if v != "-inf" else -INF


def read_trajectory(source: str | os.PathLike | TextIO, fmt: str = "jsonl") -> list[TrajectoryRecord]:
    """Inverse of :func:`write_trajectory`; ``source`` is a path, a stream or text."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and ("\n" in source or source == ""):
        text = source
    else:
        text = Path(source).read_text(encoding="utf-8")
    out = []
    if fmt == "jsonl":
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                out.append(TrajectoryRecord(_revive_time(d["time"]), d["entity"], d["activation"], d["goods"],
                                            d["proper"]))
        return out
    if fmt != "csv":
        raise ValueError(f"unknown trajectory format {fmt!r}")
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is not None and header != ["time", "entity", "component", "value"]:
        raise SerializationError(f"unexpected CSV header {header}")
    act: dict = {}
    goods: dict = {}
    for t, e, comp, value in rows:
        v = json.loads(value)
        if comp.startswith("activation/"):
            act[comp.split("/", 1)[1]] = v
        elif comp.startswith("goods/"):
            goods[comp.split("/", 1)[1]] = v
        elif comp == "proper":
            out.append(TrajectoryRecord(_revive_time(json.loads(t)), e, act, goods, v))
            act, goods = {}, {}
        else:
            raise SerializationError(f"unknown component {comp!r}")
    return out


# -- causal traces ----------------------------------------------------------

def trace_records(trace: CausalTrace) -> list[dict]:
    out = []
    for entry in trace.entries:
        r = entry.record
        out.append({
            "interaction": r.interaction, "index": r.index, "t_s": float(r.t_s), "t_a": float(r.t_a),
            "ongoing": [float(x) for x in r.ongoing] if isinstance(r.ongoing, tuple) else float(r.ongoing),
            "goods": _jsonable(r.goods),
            "start_neighborhood": sorted(entry.start_neighborhood),
            "arrival_neighborhood": sorted(entry.arrival_neighborhood),
            "patients": list(entry.patients),
            "deferred": entry.deferred,
        })
    return out


def _dot_id(x) -> str:
    return json.dumps(str(x))


def export_causal_trace(trace: CausalTrace, model: Model | None = None, fmt: str = "jsonl",
                        sink: TextIO | str | os.PathLike | None = None) -> str | None:
    """Write the trace as JSON lines or as a Graphviz digraph.

    The digraph draws, per occurrence, every agent to the propagator and the
    propagator to the patient, labelled with the type and the start and
    arrival times. ``model`` is required for ``dot``.
    """
    if fmt == "jsonl":
        text = "".join(_fmt(d) + "\n" for d in trace_records(trace))
    elif fmt == "dot":
        if model is None:
            raise ValueError("dot export needs the model to resolve roles")
        lines = ["digraph trace {"]
        for entry in trace.entries:
            r = entry.record
            it = model.interactions[r.interaction]
            label = _dot_id(f"{r.interaction}: {it.itype} t_s={format(r.t_s, '.17g')} t_a={format(r.t_a, '.17g')}")
            for a in it.agents:
                lines.append(f"  {_dot_id(a)} -> {_dot_id(it.propagator)} [label={label}];")
            lines.append(f"  {_dot_id(it.propagator)} -> {_dot_id(it.patient)} [label={label}];")
        lines.append("}")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    if sink is None:
        return text
    out, owned = _open_sink(sink)
    try:
        out.write(text)
    finally:
        if owned:
            out.close()
    return None
