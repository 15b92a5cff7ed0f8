"""Versioned JSON documents: scenarios, models, behaviors, expressions, machines, assemblages, reports.

Every document carries ``format_version`` and ``kind``. Complex matrices are row-major
lists of rows whose entries are ``[re, im]`` pairs. Unknown fields are rejected.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .automata import ClassicalMachine, QuantumMachine
from .behavior import Behavior, Scenario
from .expressions import LinearExpression, Term, builtin
from .quantum import Channel, Instrument, QuantumSequenceModel, QuantumState, IDLE
from .steering import Assemblage

FORMAT_VERSION = 1

_COMPLEX = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}}
_LABELS = {"type": "array", "items": {"type": "string"}}
_VALUES = {"type": ["object", "null"], "additionalProperties": {"type": "number"}}


def _doc(kind: str, props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": {"format_version": {"const": FORMAT_VERSION}, "kind": {"const": kind}, **props},
        "required": ["format_version", "kind", *required],
    }


_SCENARIO_BODY = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "length": {"type": "integer", "minimum": 0},
        "settings": _LABELS,
        "outcomes": {"type": "object", "additionalProperties": _LABELS},
        "outcome_values": _VALUES,
        "idle": {"type": ["string", "null"]},
    },
    "required": ["length", "settings", "outcomes", "outcome_values", "idle"],
}

_INSTRUMENT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"outcomes": _LABELS, "kraus": {"type": "array", "items": {"type": "array", "items": _COMPLEX}}},
    "required": ["outcomes", "kraus"],
}

_TERM = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "coefficient": {"type": "number"},
        "kind": {"enum": ["probability", "correlator", "expectation"]},
        "settings": {"anyOf": [_LABELS, {"type": "null"}]},
        "outcomes": {"anyOf": [_LABELS, {"type": "null"}]},
        "positions": {"type": "array", "items": {"type": "integer"}},
    },
    "required": ["coefficient", "kind", "settings", "outcomes", "positions"],
}

SCHEMAS: dict[str, dict] = {
    "scenario": _doc("scenario", {"scenario": _SCENARIO_BODY}, ["scenario"]),
    "model": _doc("model", {
        "description": {"type": "string"},
        "initial": _COMPLEX,
        "instruments": {"type": "object", "additionalProperties": _INSTRUMENT},
        "channel": {"anyOf": [{"type": "null"}, {"type": "array", "items": _COMPLEX}]},
        "outcome_values": _VALUES,
    }, ["initial", "instruments", "channel", "outcome_values"]),
    "behavior": _doc("behavior", {
        "scenario": _SCENARIO_BODY,
        "table": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "properties": {"settings": _LABELS, "distribution": {"type": "array", "items": {
                "type": "object", "additionalProperties": False,
                "properties": {"outcomes": _LABELS, "p": {"type": "number"}},
                "required": ["outcomes", "p"]}}},
            "required": ["settings", "distribution"]}},
    }, ["scenario", "table"]),
    "expression": _doc("expression", {
        "builtin": {"type": "string"},
        "name": {"type": "string"},
        "scenario": {"anyOf": [_SCENARIO_BODY, {"type": "null"}]},
        "terms": {"type": "array", "items": _TERM},
        "constant": {"type": "number"},
        "sense": {"enum": ["max", "min"]},
        "classical_bound": {"type": ["number", "null"]},
        "quantum_bound": {"type": ["number", "null"]},
    }, []),
    "machine": _doc("machine", {
        "description": {"type": "string"},
        "type": {"enum": ["classical", "quantum"]},
        "inputs": _LABELS,
        "outputs": _LABELS,
        "initial": {"type": "array"},
        "transition": {"type": "array"},
        "instruments": {"type": "object", "additionalProperties": _INSTRUMENT},
    }, ["type", "initial"]),
    "assemblage": _doc("assemblage", {
        "sigma": {"type": "object", "additionalProperties": {"type": "object", "additionalProperties": _COMPLEX}},
    }, ["sigma"]),
    "report": _doc("report", {
        "command": {"type": "string"},
        "result": {"type": "object"},
    }, ["command", "result"]),
}


class FormatError(ValueError):
    """A document is malformed or fails schema validation."""


def validate(doc: Any, kind: str | None = None) -> dict:
    if not isinstance(doc, dict):
        raise FormatError("document must be a JSON object")
    kind = kind or doc.get("kind")
    if kind not in SCHEMAS:
        raise FormatError(f"unknown document kind {kind!r}")
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{kind} document invalid at {where}: {exc.message}") from None
    return doc


# ------------------------------------------------------------------- primitives


def matrix_to_json(m) -> list:
    a = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2:
        raise FormatError("complex matrix must be rows of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def scenario_to_json(sc: Scenario) -> dict:
    return {
        "length": sc.length,
        "settings": list(sc.settings),
        "outcomes": {s: list(v) for s, v in sc.outcomes.items()},
        "outcome_values": None if sc.outcome_values is None else dict(sc.outcome_values),
        "idle": sc.idle,
    }


def scenario_from_json(body: Mapping) -> Scenario:
    return Scenario(body["length"], body["settings"], body["outcomes"], body.get("outcome_values"), body.get("idle"))


def _instrument_to_json(ins: Instrument) -> dict:
    return {"outcomes": list(ins.outcomes), "kraus": [[matrix_to_json(k) for k in ks] for ks in ins.kraus]}


def _instrument_from_json(body: Mapping) -> Instrument:
    return Instrument(tuple(body["outcomes"]), tuple(tuple(matrix_from_json(k) for k in ks) for ks in body["kraus"]))


# -------------------------------------------------------------------- documents


def model_to_json(model: QuantumSequenceModel, description: str | None = None) -> dict:
    doc = {"format_version": FORMAT_VERSION, "kind": "model"}
    if description:
        doc["description"] = description
    doc["initial"] = matrix_to_json(model.initial.matrix)
    doc["instruments"] = {s: _instrument_to_json(i) for s, i in model.instruments.items() if s != IDLE}
    doc["channel"] = None if model.channel is None else [matrix_to_json(k) for k in model.channel.kraus]
    doc["outcome_values"] = None if model.outcome_values is None else dict(model.outcome_values)
    return doc


def model_from_json(doc: Mapping) -> QuantumSequenceModel:
    validate(dict(doc), "model")
    channel = None if doc["channel"] is None else Channel(tuple(matrix_from_json(k) for k in doc["channel"]))
    instruments = {s: _instrument_from_json(b) for s, b in doc["instruments"].items()}
    return QuantumSequenceModel(QuantumState(matrix_from_json(doc["initial"])), instruments, channel, doc["outcome_values"])


def behavior_to_json(b: Behavior) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "behavior",
        "scenario": scenario_to_json(b.scenario),
        "table": [{"settings": list(s), "distribution": [{"outcomes": list(q), "p": p} for q, p in dist.items()]}
                  for s, dist in b.table.items()],
    }


def behavior_from_json(doc: Mapping) -> Behavior:
    validate(dict(doc), "behavior")
    sc = scenario_from_json(doc["scenario"])
    table = {}
    for row in doc["table"]:
        key = tuple(row["settings"])
        if key in table:
            raise FormatError(f"settings {key} listed twice")
        table[key] = {tuple(e["outcomes"]): e["p"] for e in row["distribution"]}
    return Behavior(sc, table)


def expression_to_json(expr: LinearExpression) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "expression",
        "name": expr.name,
        "scenario": None if expr.scenario is None else scenario_to_json(expr.scenario),
        "terms": [{"coefficient": t.coefficient, "kind": t.kind,
                   "settings": None if t.settings is None else list(t.settings),
                   "outcomes": None if t.outcomes is None else list(t.outcomes),
                   "positions": list(t.positions)} for t in expr.terms],
        "constant": expr.constant,
        "sense": expr.sense,
        "classical_bound": expr.classical_bound,
        "quantum_bound": expr.quantum_bound,
    }


def expression_from_json(doc: Mapping) -> LinearExpression:
    validate(dict(doc), "expression")
    if "builtin" in doc:
        extra = set(doc) - {"format_version", "kind", "builtin"}
        if extra:
            raise FormatError(f"built-in expression documents take no other fields ({sorted(extra)})")
        return builtin(doc["builtin"])
    for key in ("scenario", "terms"):
        if key not in doc:
            raise FormatError(f"expression document lacks {key!r}")
    sc = None if doc["scenario"] is None else scenario_from_json(doc["scenario"])
    terms = tuple(Term(t["coefficient"], t["kind"], t["settings"], t["outcomes"], tuple(t["positions"])) for t in doc["terms"])
    return LinearExpression(terms, doc.get("constant", 0.0), sc, doc.get("sense", "max"), doc.get("classical_bound"),
                            doc.get("quantum_bound"), doc.get("name", ""))


def machine_to_json(m: ClassicalMachine | QuantumMachine, description: str | None = None) -> dict:
    doc: dict = {"format_version": FORMAT_VERSION, "kind": "machine"}
    if description:
        doc["description"] = description
    if isinstance(m, ClassicalMachine):
        doc.update({"type": "classical", "inputs": list(m.inputs), "outputs": list(m.outputs),
                    "initial": m.initial.tolist(), "transition": m.transition.tolist()})
    else:
        doc.update({"type": "quantum", "initial": matrix_to_json(m.initial.matrix),
                    "instruments": {s: _instrument_to_json(i) for s, i in m.instruments.items()}})
    return doc


def machine_from_json(doc: Mapping) -> ClassicalMachine | QuantumMachine:
    validate(dict(doc), "machine")
    if doc["type"] == "classical":
        if "transition" not in doc or "instruments" in doc:
            raise FormatError("classical machines need 'transition' and no 'instruments'")
        return ClassicalMachine(np.asarray(doc["initial"], float), np.asarray(doc["transition"], float),
                                tuple(doc.get("inputs", ("0",))), tuple(doc.get("outputs", ("0", "1"))))
    if "instruments" not in doc or "transition" in doc:
        raise FormatError("quantum machines need 'instruments' and no 'transition'")
    return QuantumMachine(QuantumState(matrix_from_json(doc["initial"])),
                          {s: _instrument_from_json(b) for s, b in doc["instruments"].items()})


def assemblage_to_json(a: Assemblage) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": "assemblage",
            "sigma": {x: {o: matrix_to_json(m) for o, m in row.items()} for x, row in a.sigma.items()}}


def assemblage_from_json(doc: Mapping) -> Assemblage:
    validate(dict(doc), "assemblage")
    return Assemblage({x: {o: matrix_from_json(m) for o, m in row.items()} for x, row in doc["sigma"].items()})


def report(command: str, result: Mapping) -> dict:
    doc = {"format_version": FORMAT_VERSION, "kind": "report", "command": command, "result": to_plain(result)}
    return validate(doc, "report")


def to_plain(obj):
    """Convert numpy scalars, arrays and tuples to JSON-ready values."""
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return matrix_to_json(obj) if obj.ndim == 2 else [[float(z.real), float(z.imag)] for z in obj]
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ------------------------------------------------------------------------ files


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_json(path: str | Path) -> dict:
    """Read a document from ``path``, falling back to the bundled data directory."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("tempocorr") / "data" / p.name
        if not bundled.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        text = bundled.read_text()
    else:
        text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})") from None
    return validate(doc)


def bundled_files() -> list[str]:
    return sorted(f.name for f in (resources.files("tempocorr") / "data").iterdir() if f.name.endswith(".json"))


LOADERS = {
    "model": model_from_json,
    "behavior": behavior_from_json,
    "expression": expression_from_json,
    "machine": machine_from_json,
    "assemblage": assemblage_from_json,
    "scenario": lambda d: scenario_from_json(validate(dict(d), "scenario")["scenario"]),
}

SERIALIZERS = {
    Behavior: behavior_to_json,
    LinearExpression: expression_to_json,
    Assemblage: assemblage_to_json,
}


def load(path: str | Path):
    doc = load_json(path)
    return LOADERS[doc["kind"]](doc)
