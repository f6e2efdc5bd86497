"""CSV/JSONL serialisation, flat config files and run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import DomainError, OutputError

FLOAT_FORMAT = ".17g"

# Flat configuration keys and their value types; "floats" is a comma-separated list.
CONFIG_SCHEMA = {
    "command": "str",
    "dim": "int",
    "alpha": "float",
    "radius": "float",
    "t_end": "float",
    "t_checkpoints": "floats",
    "mesh": "float",
    "replicas": "int",
    "seed": "int",
    "method": "str",
    "grid_res": "float",
    "mc_samples": "int",
    "tail_factor": "float",
    "k_max": "int",
    "order": "int",
    "start_norm": "float",
    "target_uncensored": "int",
    "point": "floats",
    "times": "floats",
    "sigma2": "float",
    "paths": "int",
    "process": "bool",
}
# Keys that change how a run is executed but never what it outputs.
EXECUTION_KEYS = ("workers",)


def format_value(value) -> str:
    """17 significant digits for reals, plain text for everything else."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, FLOAT_FORMAT)
    return str(value)


def _json_number(value):
    if value is None:
        return None
    v = float(value)
    return v if math.isfinite(v) else str(v)


def _open_for_write(path):
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        return open(path, "w", newline="\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(report, path) -> None:
    """Header line of ``report.columns`` then one line per row; '\\n' endings."""
    with _open_for_write(path) as fh:
        try:
            fh.write(",".join(report.columns) + "\n")
            for row in report.rows:
                fh.write(",".join(format_value(row.get(c)) for c in report.columns) + "\n")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc


def jsonl_records(report, config_hash: str, seed) -> list[dict]:
    """Statistics then check values, one flat object each."""
    out = []
    for name, value in report.statistics.items():
        if isinstance(value, (list, tuple, dict, str)):
            continue
        out.append({"experiment": report.name, "config_hash": config_hash, "seed": seed,
                    "name": name, "value": _json_number(value),
                    "stderr": _json_number(report.stderrs.get(name))})
    for check in report.checks:
        out.append({"experiment": report.name, "config_hash": config_hash, "seed": seed,
                    "name": f"check.{check.name}", "value": _json_number(check.value), "stderr": None})
    return out


def emit_jsonl(report, path, config_hash: str = "", seed=None) -> None:
    with _open_for_write(path) as fh:
        try:
            for rec in jsonl_records(report, config_hash, seed):
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def _parse_scalar(kind: str, key: str, text: str):
    text = text.strip()
    if text == "" or text.lower() == "none":
        return None
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "floats":
            return [float(v) for v in text.split(",") if v.strip()]
        if kind == "bool":
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
    except ValueError:
        raise DomainError(f"config key {key!r} expects {kind}, got {text!r}") from None
    return text


def _emit_scalar(kind: str, value) -> str:
    if value is None:
        return ""
    if kind == "floats":
        return ",".join(repr(float(v)) for v in value)
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


def emit_config_text(config: dict) -> str:
    """Flat ``key = value`` text; floats use the shortest exact repr."""
    lines = []
    for key in CONFIG_SCHEMA:
        if key in config:
            lines.append(f"{key} = {_emit_scalar(CONFIG_SCHEMA[key], config[key])}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if key in EXECUTION_KEYS:
            out[key] = _parse_scalar("int", key, value)
            continue
        if key not in CONFIG_SCHEMA:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _parse_scalar(CONFIG_SCHEMA[key], key, value)
    return out


def load_config_file(path) -> dict:
    """Flat key/value text, or the ``config`` block of a JSON run manifest."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"config {path}: invalid JSON ({exc.msg})") from None
        data = data.get("config", data)
        return {normalize_key(k): v for k, v in data.items() if normalize_key(k) in CONFIG_SCHEMA}
    return parse_config_text(text)


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON of the output-relevant config keys."""
    relevant = {k: v for k, v in sorted(config.items()) if k not in EXECUTION_KEYS}
    blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    master_seed: int
    started: str
    finished: str = ""
    outputs: dict = field(default_factory=dict)
    tool_version: str = __version__
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = config_hash(self.config)

    def write(self, path) -> None:
        with _open_for_write(path) as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls(**json.load(fh))
        except OSError as exc:
            raise OutputError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
