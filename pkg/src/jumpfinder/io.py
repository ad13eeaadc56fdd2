"""CSV ingestion and atomic artifact writers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyAfterFilter, NonPositivePredictor, ParseError
from .estimators import ObservedSample

__all__ = ["IngestReport", "ingest", "file_digest", "write_atomic", "dumps_json", "write_json", "write_csv", "load_schema"]


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_kept: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        return {"rows_read": self.rows_read, "rows_kept": self.rows_kept, "dropped": dict(self.dropped)}


def _parse_float(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse {text!r} as a number", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row, column)
    return value


def ingest(
    path,
    w_column: str = "w",
    y_column: str = "y",
    log_transform: bool = False,
    window: tuple[float, float] | None = None,
    binary: bool = False,
) -> tuple[ObservedSample, IngestReport]:
    """Read a header-first, comma-separated UTF-8 file into a sample.

    ``window`` keeps rows whose (possibly log-transformed) predictor lies in
    ``[lo, hi]``; ``binary`` requires responses in ``{0, 1}``. Row numbers
    in errors count the header as row 1.
    """
    path = Path(path)
    report = IngestReport()
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror or exc}") from None
    w_vals, y_vals = [], []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path} is empty")
        for col in (w_column, y_column):
            if col not in reader.fieldnames:
                raise ParseError(f"missing column (header has {reader.fieldnames})", 1, col)
        for i, rec in enumerate(reader, start=2):
            report.rows_read += 1
            w = _parse_float(rec[w_column], i, w_column)
            y = _parse_float(rec[y_column], i, y_column)
            if binary and y not in (0.0, 1.0):
                raise ParseError(f"response {y!r} is not 0 or 1", i, y_column)
            if log_transform:
                if w <= 0:
                    raise NonPositivePredictor(f"log transform needs w > 0, got {w!r}", i, w_column)
                w = math.log(w)
            if window is not None and not window[0] <= w <= window[1]:
                report.dropped["outside_window"] = report.dropped.get("outside_window", 0) + 1
                continue
            w_vals.append(w)
            y_vals.append(y)
    report.rows_kept = len(w_vals)
    if not w_vals:
        raise EmptyAfterFilter(f"no rows left in {path} after filtering")
    return ObservedSample(w_vals, y_vals), report


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps_json(obj) -> str:
    # floats use repr, the shortest string that round-trips exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    write_atomic(path, dumps_json(obj))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    write_atomic(path, "\n".join(lines) + "\n")


def load_schema(name: str) -> dict:
    """Bundled JSON schema: ``result``, ``bootstrap``, ``manifest`` or ``report``."""
    from importlib.resources import files

    return json.loads(files("jumpfinder").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8"))
