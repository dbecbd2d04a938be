"""Result records, CSV/JSON persistence and the critical-point cache."""

from __future__ import annotations

import copy
import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .riemann_core import CriticalPoint, PointKind

SCHEMA_VERSION = 1
CACHE_ENV = "ZETA_ARCLEN_CACHE"
CACHE_FILE = "critical_points.jsonl"


def fmt_float(x: float) -> str:
    """17 significant digits; float(fmt_float(x)) == x for every finite double."""
    return format(x, ".17g")


@dataclass
class ResultRecord:
    command: str
    config: dict
    results: dict
    seed: int = 0
    diagnostics: dict = field(default_factory=lambda: {"warnings": []})
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    code_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "provenance": {"seed": self.seed, "code_version": self.code_version, "created": self.created},
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        validate(d)
        prov = d["provenance"]
        return cls(
            command=d["command"],
            config=d["config"],
            results=d["results"],
            seed=prov["seed"],
            diagnostics=d["diagnostics"],
            created=prov["created"],
            code_version=prov["code_version"],
            schema_version=d["schema_version"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls.from_dict(json.loads(text))

    def numeric_payload(self) -> str:
        """Canonical JSON of everything except timestamps."""
        d = copy.deepcopy(self.to_dict())
        del d["provenance"]["created"]
        d["diagnostics"].pop("timing", None)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def load_schema() -> dict:
    return json.loads(resources.files("zeta_arclen").joinpath("result_record.schema.json").read_text())


def validate(record: dict) -> None:
    jsonschema.validate(record, load_schema())


def table_to_csv(columns: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def csv_to_table(text: str) -> tuple[list[str], list[list[float]]]:
    reader = csv.reader(io.StringIO(text))
    columns = next(reader)
    return columns, [[float(v) for v in row] for row in reader]


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def record_to_csv(record: ResultRecord) -> str:
    """Key/value rows for the scalar leaves of a record; tables go through ``table_to_csv``."""
    rows: list = []
    _flatten("", record.to_dict(), rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for k, v in rows:
        writer.writerow([k, fmt_float(v) if isinstance(v, float) else json.dumps(v) if isinstance(v, list) else v])
    return buf.getvalue()


def write_text(text: str, path: str | os.PathLike | None) -> None:
    if path is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def points_to_json(points: list[CriticalPoint]) -> list:
    return [[p.location, p.kind.value, p.value_at] for p in points]


def points_from_json(data: list) -> list[CriticalPoint]:
    return [CriticalPoint(float(x), PointKind(k), float(v)) for x, k, v in data]


class CriticalPointCache:
    """Append-only JSON-lines store of critical-point lists.

    Entries are keyed by window, scan parameters and code version, so a
    version bump invalidates everything written before it.
    """

    def __init__(self, directory: str | os.PathLike):
        self.path = Path(directory) / CACHE_FILE

    @staticmethod
    def make_key(T: float, U: float, scan: dict) -> str:
        key = {"T": T, "U": U, "scan": scan, "code_version": __version__}
        return json.dumps(key, sort_keys=True)

    def get(self, key: str) -> list[CriticalPoint] | None:
        if not self.path.exists():
            return None
        found = None
        with self.path.open() as fh:
            for line in fh:
                entry = json.loads(line)
                if entry["key"] == key:
                    found = entry["points"]
        return None if found is None else points_from_json(found)

    def put(self, key: str, points: list[CriticalPoint]) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps({"key": key, "points": points_to_json(points)}) + "\n")
        except OSError as exc:
            raise OSError(f"cannot append to cache {self.path}: {exc.strerror or exc}") from exc


def default_cache_dir() -> str | None:
    return os.environ.get(CACHE_ENV) or None


def config_echo(config) -> dict:
    d = asdict(config)
    return {k: v for k, v in d.items() if not k.startswith("_")}
