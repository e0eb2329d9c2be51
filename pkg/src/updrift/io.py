"""Structured output documents and the matching config reader.

Two formats: ``kv`` is a JSON document ``{schema_version, command, config,
result}``; ``csv`` is a table whose first line is ``# `` followed by the
same header as compact JSON.  Both read back through :func:`read_document`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ._rng import DEFAULT_SEED

SCHEMA_VERSION = 1
FORMATS = ("kv", "csv")


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    trials: int | None = None
    cap: int | None = None
    seed: int = DEFAULT_SEED
    out: str | None = None
    format: str = "kv"

    def to_dict(self) -> dict:
        return {"command": self.command, "params": jsonable(self.params),
                "trials": self.trials, "cap": self.cap, "seed": self.seed,
                "out": self.out, "format": self.format}

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        unknown = set(d) - {"command", "params", "trials", "cap", "seed", "out", "format"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if d.get("format", "kv") not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        return cls(d["command"], dict(d.get("params") or {}), d.get("trials"), d.get("cap"),
                   int(d.get("seed", DEFAULT_SEED)), d.get("out"), d.get("format", "kv"))


def jsonable(obj):
    """Recursively convert to JSON-safe values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        obj = obj.item()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def render_kv(config: ExperimentConfig, result) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "command": config.command,
           "config": config.to_dict(), "result": jsonable(result)}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(config: ExperimentConfig, rows: list[dict]) -> str:
    header = {"schema_version": SCHEMA_VERSION, "command": config.command,
              "config": config.to_dict()}
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True, allow_nan=False) + "\n")
    rows = [jsonable(r) for r in rows]
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def render(config: ExperimentConfig, result, rows: list[dict] | None = None) -> str:
    if config.format == "csv":
        if rows is None:
            rows = [flatten(result)]
        return render_csv(config, rows)
    return render_kv(config, result)


def flatten(d: dict, prefix: str = "") -> dict:
    """One-level dict with dotted keys, used for single-row CSV output."""
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(jsonable(v))
        else:
            out[key] = v
    return out


@dataclass
class Document:
    schema_version: int
    command: str
    config: ExperimentConfig
    result: object


def read_document(text: str) -> Document:
    """Parse either output format back into its config and payload."""
    if text.startswith("#"):
        first, _, body = text.partition("\n")
        header = json.loads(first[1:].strip())
        rows = list(csv.DictReader(io.StringIO(body)))
        result = rows
    else:
        header = json.loads(text)
        result = header.get("result")
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    return Document(version, header["command"], ExperimentConfig.from_dict(header["config"]),
                    result)


def read_config(path) -> ExperimentConfig:
    return read_document(Path(path).read_text()).config


def write_output(text: str, out: str | None) -> None:
    if out is None:
        print(text, end="")
    else:
        Path(out).write_text(text)
