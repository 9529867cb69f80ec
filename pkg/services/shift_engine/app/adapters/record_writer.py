"""
CSV and JSON output with a versioned header.

CSV files start with '#'-prefixed header lines (schema, code version, seed and
the config echo as JSON), followed by a regular csv header row. Floats are
written with repr(), the shortest decimal that round-trips.
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel

from .. import __version__
from ..core.scalar_recursion import DiagnosticRow
from ..core.shift_dynamics import AlignmentRecord
from ..schemas import RunHeader

TRAJECTORY_COLUMNS = ("t", "particle_id", "align_b", "align_c", "a", "b", "norm_log10", "log_misalign_b", "log_misalign_c")
DIAGNOSTIC_COLUMNS = ("t", "a", "b", "s", "L", "env_u", "env_l", "assumption_ok")
SNAPSHOT_COLUMNS = ("particle_id", "x", "y", "align_b", "align_c", "stationary")


def make_header(schema_name: str, seed: int, config: Mapping[str, Any]) -> RunHeader:
    return RunHeader(schema_name=schema_name, code_version=__version__, seed=seed, config=dict(config))


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        if isinstance(value, float) or value.dtype.kind == "f":
            return repr(float(value))
        if value.dtype.kind == "b":
            return "true" if bool(value) else "false"
        return str(int(value))
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def parse_value(text: str) -> Any:
    """Inverse of format_value for numbers and booleans; other text is returned as is."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _header_lines(header: RunHeader) -> List[str]:
    return [
        f"# schema: {header.schema_name} v{header.schema_version}",
        f"# code_version: {header.code_version}",
        f"# seed: {header.seed}",
        f"# config: {json.dumps(header.config, sort_keys=True)}",
    ]


def write_csv(path, header: RunHeader, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        for line in _header_lines(header):
            f.write(line + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """Header metadata and typed rows of a file written by write_csv."""
    meta: Dict[str, Any] = {}
    body: List[str] = []
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = json.loads(value) if key == "config" else value
            else:
                body.append(line)
    if "schema" in meta:
        name, _, version = meta["schema"].rpartition(" v")
        meta["schema_name"], meta["schema_version"] = name, int(version)
    rows = [{k: parse_value(v) for k, v in row.items()} for row in csv.DictReader(body)]
    return meta, rows


def _json_default(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite_or_none(v) for v in value]
    return value


def write_json(path, payload: Any, header: Optional[RunHeader] = None) -> Path:
    """Write a model or mapping as JSON; with a header it is nested under 'header'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else dict(payload)
    if header is not None:
        body = {"header": header.model_dump(mode="json"), **body}
    body = _finite_or_none(json.loads(json.dumps(body, default=_json_default)))
    path.write_text(json.dumps(body, indent=2, sort_keys=False, allow_nan=False) + "\n", encoding="utf-8")
    return path


def trajectory_rows(records: Sequence[AlignmentRecord]) -> Iterable[Tuple]:
    for rec in records:
        for i in range(rec.n):
            yield (
                rec.t,
                i,
                rec.align_b[i],
                rec.align_c[i],
                rec.a[i],
                rec.b[i],
                rec.norm_log10[i],
                rec.log_misalign_b[i],
                rec.log_misalign_c[i],
            )


def diagnostic_rows(rows: Sequence[DiagnosticRow]) -> Iterable[Tuple]:
    for row in rows:
        yield (row.t, row.a, row.b, row.s, row.L, row.env_u, row.env_l, row.assumption_ok)


def snapshot_rows(snapshot) -> Iterable[Tuple]:
    for i in range(snapshot.coords.shape[0]):
        yield (
            i,
            snapshot.coords[i, 0],
            snapshot.coords[i, 1],
            snapshot.align_b[i],
            snapshot.align_c[i],
            snapshot.stationary[i],
        )


def model_rows(models: Sequence[BaseModel]) -> Tuple[List[str], List[List[Any]]]:
    """Columns and rows of a list of flat pydantic models (field order)."""
    if not models:
        return [], []
    columns = list(type(models[0]).model_fields)
    return columns, [[getattr(m, c) for c in columns] for m in models]

