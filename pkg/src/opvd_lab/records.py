"""Deterministic JSON and CSV records for run outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "opvd-lab"


def plain(obj):
    """Recursively convert numpy scalars/arrays, complex numbers and fractions to JSON types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        return {"numerator": obj.numerator, "denominator": obj.denominator, "value": float(obj)}
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return [_num(c.real), _num(c.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return obj


def _num(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def canonical_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


@dataclass
class Invariant:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class OpResult:
    record: dict
    invariants: list = field(default_factory=list)
    table: tuple | None = None  # (columns, rows)
    tolerances: dict = field(default_factory=dict)
    plot: dict | None = None

    @property
    def passed(self) -> bool:
        return all(inv.passed for inv in self.invariants)


def metadata(config: dict, result: OpResult) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "module": config["module"],
        "op": config["op"],
        "seed": config["seed"],
        "format": config["format"],
        "config_hash": config_hash(config),
        "parameters": config["parameters"],
        "tolerances": result.tolerances,
        "invariants": [inv.to_dict() for inv in result.invariants],
        "status": "pass" if result.passed else "fail",
        "plot": result.plot,
    }


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (complex, np.complexfloating)):
        c = complex(v)
        return "%.17g%+.17gj" % (c.real, c.imag)
    return str(v)


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (list, tuple)) and obj and not all(isinstance(x, (int, float, str, bool)) for x in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def write_output(path: Path, config: dict, result: OpResult) -> Path:
    meta = metadata(config, result)
    if config["format"] == "json":
        doc = {"metadata": meta, "result": result.record}
        if result.table is not None:
            cols, rows = result.table
            doc["table"] = {"columns": list(cols), "rows": [list(r) for r in rows]}
        text = json.dumps(plain(doc), sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        for key in ("tool", "version", "module", "op", "seed", "format", "config_hash", "status"):
            buf.write(f"# {key}: {meta[key]}\n")
        for key in ("parameters", "tolerances", "invariants", "plot"):
            buf.write(f"# {key}: {canonical_json(meta[key])}\n")
        w = csv.writer(buf, lineterminator="\n")
        if result.table is not None:
            cols, rows = result.table
            w.writerow(cols)
            for r in rows:
                w.writerow([fmt(v) for v in r])
        else:
            w.writerow(["key", "value"])
            flat = []
            _flatten("", plain(result.record), flat)
            for k, v in flat:
                w.writerow([k, canonical_json(v) if isinstance(v, (list, dict)) else fmt(v)])
        text = buf.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def read_output(path: Path) -> dict:
    """Metadata and table of a run output (JSON or CSV)."""
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        doc = json.loads(text)
        meta = doc.get("metadata", {})
        tab = doc.get("table")
        return {"metadata": meta, "table": (tab["columns"], tab["rows"]) if tab else None, "format": "json"}
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val) if key in ("parameters", "tolerances", "invariants", "plot") else val
        else:
            body.append(line)
    rows = list(csv.reader(body))
    table = None
    if rows and rows[0] != ["key", "value"]:
        table = (rows[0], [[_parse(v) for v in r] for r in rows[1:]])
    return {"metadata": meta, "table": table, "format": "csv"}


def _parse(v: str):
    try:
        return float(v)
    except ValueError:
        return v
