"""Telemetry logging: JSON-lines files with a schema header.

The first line of a log is a header object (``kind: "header"``) carrying
the schema name, seed, configuration hash and channel layout; every
following line is one record sampled at the telemetry rate.  Floats are
serialized with Python's shortest round-trip ``repr``, so two runs of
the same seeded experiment produce byte-identical files -- which is what
:func:`replay_check` verifies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional

SCHEMA = "uamsim-telemetry/1"

RECORD_FIELDS = (
    "t", "phase", "p", "quat", "v", "w", "p_ref",
    "q", "q_ref", "f_ext", "f_d", "f_fb",
    "x_batt", "x_batt_ref", "thrust", "tilt", "saturated",
    "contact", "vacuum",
)
# Optional per-record extras: "events" (list of strings, only when
# non-empty) and "echo" (float, only when a reading was captured).

__all__ = ["SCHEMA", "RECORD_FIELDS", "TelemetryWriter", "read_log",
           "ReplayReport", "replay_check"]


class TelemetryWriter:
    """Append-only JSONL sink.  Owns the header; the caller owns cadence."""

    def __init__(self, stream: IO[str], *, seed: int, config_hash: str,
                 scenario: str = "", extra: Optional[dict] = None) -> None:
        self._stream = stream
        self.records_written = 0
        header = {
            "kind": "header",
            "schema": SCHEMA,
            "seed": seed,
            "config_hash": config_hash,
            "scenario": scenario,
            "fields": list(RECORD_FIELDS),
        }
        if extra:
            header.update(extra)
        self._write_line(header)

    def _write_line(self, obj: dict) -> None:
        self._stream.write(json.dumps(obj, separators=(",", ":")))
        self._stream.write("\n")

    def write_record(self, record: dict) -> None:
        self._write_line(record)
        self.records_written += 1

    def close(self) -> None:
        self._stream.flush()


def read_log(path: str) -> tuple[dict, list[dict]]:
    """Load a telemetry file; returns ``(header, records)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise ValueError(f"{path}: missing telemetry header line")
    return lines[0], lines[1:]


def iter_log(path: str) -> Iterator[dict]:
    """Stream a telemetry file line by line (header included)."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


@dataclass
class ReplayReport:
    equal: bool
    lines_compared: int = 0
    first_divergence: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.equal


def _values_match(a, b, tol: float) -> bool:
    if isinstance(a, float) and isinstance(b, (int, float)):
        if math.isnan(a) and isinstance(b, float) and math.isnan(b):
            return True
        return abs(a - float(b)) <= tol
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(
            _values_match(x, y, tol) for x, y in zip(a, b)
        )
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(
            _values_match(a[k], b[k], tol) for k in a
        )
    return a == b


def replay_check(path_a: str, path_b: str, tolerance: float = 0.0) -> ReplayReport:
    """Compare two telemetry files record by record.

    With the default zero tolerance the comparison is exact, which a
    deterministic replay must satisfy.  A positive tolerance loosens
    only numeric fields; structure and strings always compare exactly.
    """
    lines_a = list(iter_log(path_a))
    lines_b = list(iter_log(path_b))
    n = min(len(lines_a), len(lines_b))
    for i in range(n):
        if not _values_match(lines_a[i], lines_b[i], tolerance):
            return ReplayReport(
                equal=False, lines_compared=i, first_divergence=i + 1,
                detail=f"line {i + 1} differs",
            )
    if len(lines_a) != len(lines_b):
        return ReplayReport(
            equal=False, lines_compared=n, first_divergence=n + 1,
            detail=f"length mismatch: {len(lines_a)} vs {len(lines_b)} lines",
        )
    return ReplayReport(equal=True, lines_compared=n)
