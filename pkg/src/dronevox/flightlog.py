"""Flight log CSV: a commented parameter header followed by one row per 10 ms control tick."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flight import FlightRecord

BATTERY_VOLTAGE = 3.7  # placeholder; the model has no battery

LOG_COLUMNS = (
    ["t", "cmd_w1", "cmd_w2", "cmd_w3", "cmd_w4", "x", "y", "z", "roll", "pitch", "yaw",
     "battery_voltage", "control_method",
     "raw_x", "raw_y", "raw_z", "raw_roll", "raw_pitch", "raw_yaw",
     "w1", "w2", "w3", "w4"]
)


class FlightLogError(ValueError):
    pass


@dataclass
class FlightLog:
    columns: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    @property
    def control_method(self) -> np.ndarray:
        return self.columns["control_method"].astype(int)

    def matrix(self, names) -> np.ndarray:
        return np.column_stack([self.columns[n] for n in names])

    @classmethod
    def from_record(cls, rec: FlightRecord, meta: dict | None = None) -> FlightLog:
        n = rec.t.size
        cols = {"t": rec.t}
        for i in range(4):
            cols[f"cmd_w{i + 1}"] = rec.cmd_speeds[:, i]
        for i, k in enumerate("xyz"):
            cols[k] = rec.position[:, i]
        for i, k in enumerate(("roll", "pitch", "yaw")):
            cols[k] = rec.angles[:, i]
        cols["battery_voltage"] = np.full(n, BATTERY_VOLTAGE)
        cols["control_method"] = rec.control_method.astype(int)
        for i, k in enumerate("xyz"):
            cols[f"raw_{k}"] = rec.raw_position[:, i]
        for i, k in enumerate(("roll", "pitch", "yaw")):
            cols[f"raw_{k}"] = rec.raw_angles[:, i]
        for i in range(4):
            cols[f"w{i + 1}"] = rec.rotor_speeds[:, i]
        return cls(cols, dict(meta or {}))


def _fmt(name: str, v) -> str:
    if name == "control_method":
        return str(int(v))
    if name == "t":
        return f"{v:.2f}"
    return f"{v:.9g}"


def write_flight_log(log: FlightLog, path) -> Path:
    """Header lines start with ``#`` and hold ``key=json-value`` pairs; LF line endings."""
    path = Path(path)
    buf = io.StringIO()
    buf.write("# dronevox flight log\n")
    for k, v in log.meta.items():
        buf.write(f"# {k}={json.dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    data = [log.columns[c] for c in LOG_COLUMNS]
    for row in zip(*data):
        w.writerow([_fmt(c, v) for c, v in zip(LOG_COLUMNS, row)])
    path.write_text(buf.getvalue(), newline="")
    return path


def read_flight_log(path) -> FlightLog:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FlightLogError(f"cannot read {path}: {exc}") from exc
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if "=" in text:
                k, v = text.split("=", 1)
                try:
                    meta[k] = json.loads(v)
                except json.JSONDecodeError:
                    meta[k] = v
        elif line.strip():
            body.append(line)
    if not body:
        raise FlightLogError("log has no header row")
    reader = csv.reader(body)
    header = next(reader)
    missing = [c for c in ("t", "control_method") if c not in header]
    if missing:
        raise FlightLogError(f"log is missing column(s): {', '.join(missing)}")
    rows = list(reader)
    try:
        arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise FlightLogError(f"malformed log rows: {exc}") from exc
    cols = {h: arr[:, i] for i, h in enumerate(header)}
    t = cols["t"]
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise FlightLogError("log timestamps must be strictly increasing")
    return FlightLog(cols, meta)
