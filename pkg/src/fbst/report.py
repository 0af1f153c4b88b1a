"""Reports: lossless JSON round trip, content hashes, CSV tables and atomic writes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

# Keys in the result section that hold logs of possibly-zero quantities; -inf travels as null.
_LOG_KEYS = ("log_s_star", "log_s_hat")


def _plain(value):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass(frozen=True)
class EvalReport:
    """Everything one test run produced.

    The ``result`` section is a pure function of (spec, seed, version); wall
    clock, timestamp and output locations live in ``meta`` and stay out of
    the hash.
    """

    version: str
    family: str
    reference: str
    hypothesis: str
    method: str
    seed: int
    N: int
    theta_star: list
    log_s_star: float
    theta_hat: list
    log_s_hat: float
    ev: float
    ev_bar: float
    se: float
    t: int
    h: int | None
    sev: float | None
    decision: str | None
    thresholds: dict
    optimizer: dict
    diagnostics: dict
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not math.isclose(self.ev + self.ev_bar, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValidationError("ev + ev_bar must equal 1")
        for name in ("ev", "ev_bar", "se"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def result(self) -> dict:
        out = {f.name: _plain(getattr(self, f.name)) for f in fields(self) if f.name != "meta"}
        for key in _LOG_KEYS:
            if out[key] == -math.inf:
                out[key] = None
        return out

    @property
    def hash(self) -> str:
        return content_hash(self.result())

    def to_dict(self) -> dict:
        return {"result": self.result(), "hash": self.hash, "meta": _plain(self.meta)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "EvalReport":
        result = dict(doc["result"])
        for key in _LOG_KEYS:
            if result.get(key) is None:
                result[key] = -math.inf
        report = cls(**result, meta=dict(doc.get("meta", {})))
        if "hash" in doc and doc["hash"] != report.hash:
            raise ValidationError("report hash does not match its result section")
        return report

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def flat_rows(self) -> list[tuple[str, Any]]:
        """(key, value) pairs of the result section, nested keys dotted."""
        rows = []

        def walk(prefix, value):
            if isinstance(value, dict):
                for k in sorted(value):
                    walk(f"{prefix}.{k}" if prefix else k, value[k])
            elif isinstance(value, list):
                rows.append((prefix, " ".join(repr(v) for v in value)))
            else:
                rows.append((prefix, "" if value is None else value))

        walk("", self.result())
        return rows


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def rows_to_dicts(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> list[dict]:
    return [dict(zip(header, map(_plain, row))) for row in rows]


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory and rename over the destination."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def summary_dict(result: Mapping[str, Any], meta: Mapping[str, Any]) -> dict:
    """Wrap an arbitrary hashable result section with its hash and meta block."""
    result = _plain(result)
    return {"result": result, "hash": content_hash(result), "meta": _plain(meta)}

