"""
Estimate records for rcmlab experiments.

Records are written as CSV (`experiment,q,<params>,estimate,std_err,
n_samples,seed,wall_ms`) or as a JSON list. Wall-clock time is written as 0
unless timing is enabled, so equal configurations give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from src.errors import ConfigError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")
LEADING = ["experiment", "q"]
TRAILING = ["estimate", "std_err", "n_samples", "seed", "wall_ms"]


@dataclass
class EstimateRecord:
    experiment: str
    q: float
    params: Dict[str, Any] = field(default_factory=dict)
    estimate: float = float("nan")
    std_err: float = float("nan")
    n_samples: int = 0
    seed: int = 0
    wall_ms: float = 0.0

    def row(self, param_keys: Sequence[str], record_timing: bool = False) -> List[str]:
        values = [self.experiment, _fmt(self.q)]
        values += [_fmt(self.params.get(k, "")) for k in param_keys]
        values += [_fmt(self.estimate), _fmt(self.std_err), str(int(self.n_samples)), str(int(self.seed)),
                   _fmt(round(self.wall_ms, 3) if record_timing else 0)]
        return values

    def to_json(self, record_timing: bool = False) -> dict:
        return {
            "experiment": self.experiment,
            "q": self.q,
            "params": dict(self.params),
            "estimate": _json_float(self.estimate),
            "std_err": _json_float(self.std_err),
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "wall_ms": round(self.wall_ms, 3) if record_timing else 0,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EstimateRecord":
        return cls(
            experiment=data["experiment"],
            q=float(data["q"]),
            params=dict(data.get("params", {})),
            estimate=_parse_float(data.get("estimate")),
            std_err=_parse_float(data.get("std_err")),
            n_samples=int(data.get("n_samples", 0)),
            seed=int(data.get("seed", 0)),
            wall_ms=float(data.get("wall_ms", 0.0)),
        )


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _json_float(value: float) -> Optional[float]:
    return None if value != value else float(value)


def _parse_float(value: Any) -> float:
    if value is None or value == "":
        return float("nan")
    return float(value)


def param_keys(records: Iterable[EstimateRecord]) -> List[str]:
    """Union of parameter names in order of first appearance."""
    keys: List[str] = []
    for rec in records:
        for k in rec.params:
            if k not in keys:
                keys.append(k)
    return keys


def records_to_csv(records: Sequence[EstimateRecord], record_timing: bool = False) -> str:
    keys = param_keys(records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LEADING + keys + TRAILING)
    for rec in records:
        writer.writerow(rec.row(keys, record_timing))
    return buf.getvalue()


def records_to_json(records: Sequence[EstimateRecord], record_timing: bool = False) -> str:
    return json.dumps([r.to_json(record_timing) for r in records], indent=2) + "\n"


def records_from_csv(text: str) -> List[EstimateRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    if header[:2] != LEADING or header[-len(TRAILING):] != TRAILING:
        raise ConfigError(f"unexpected record header: {','.join(header)}")
    keys = header[2:-len(TRAILING)]
    out = []
    for row in reader:
        if not row:
            continue
        params = {k: v for k, v in zip(keys, row[2:-len(TRAILING)]) if v != ""}
        est, err, n, seed, wall = row[-len(TRAILING):]
        out.append(EstimateRecord(experiment=row[0], q=float(row[1]), params=params,
                                  estimate=_parse_float(est), std_err=_parse_float(err),
                                  n_samples=int(n), seed=int(seed), wall_ms=float(wall)))
    return out


class RecordStore:
    """File-backed list of EstimateRecords; one file per experiment run."""

    def __init__(self, path: Path | str, fmt: Optional[str] = None, record_timing: bool = False) -> None:
        self.path = Path(path)
        self.fmt = (fmt or self.path.suffix.lstrip(".") or "csv").lower()
        if self.fmt not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}, got {self.fmt!r}")
        self.record_timing = record_timing

    def render(self, records: Sequence[EstimateRecord]) -> str:
        if self.fmt == "json":
            return records_to_json(records, self.record_timing)
        return records_to_csv(records, self.record_timing)

    def write(self, records: Sequence[EstimateRecord]) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(self.render(records), encoding="utf-8", newline="")
        logger.info(f"[records] Wrote {len(records)} records to {self.path}")
        return self.path

    def load(self) -> List[EstimateRecord]:
        """Read back the file; an unreadable file is backed up and treated as empty."""
        if not self.path.exists():
            return []
        try:
            text = self.path.read_text(encoding="utf-8-sig")
            if self.fmt == "json":
                return [EstimateRecord.from_json(d) for d in json.loads(text)]
            return records_from_csv(text)
        except (json.JSONDecodeError, ValueError, KeyError, TypeError, ConfigError) as e:
            logger.error(f"[records] Could not read {self.path.name}: {e}")
            self._handle_corrupted()
            return []

    def append(self, records: Sequence[EstimateRecord]) -> Path:
        existing = self.load()
        return self.write(existing + list(records))

    def _handle_corrupted(self) -> None:
        backup = self.path.with_suffix(self.path.suffix + ".corrupted")
        try:
            backup.unlink(missing_ok=True)
            self.path.rename(backup)
            logger.warning(f"[records] Corrupted file backed up to: {backup.name}")
        except OSError as e:
            logger.error(f"[records] Could not back up corrupted file: {e}")
            try:
                self.path.unlink()
            except OSError:
                pass
