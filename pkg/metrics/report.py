import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import jsonschema
import numpy as np
from django.conf import settings

from utils.canonical_json import read_json, write_json
from utils.exceptions import FileError

logger = logging.getLogger("avsem")

REPORT_VERSION = 1
BASELINE_METHOD = "Noisy Input"
METRIC_KEYS = ("stoi", "si_sdr_db", "si_sdr_improvement_db")


@dataclass(frozen=True)
class SceneMetrics:
    scene_id: str
    stoi: float
    si_sdr_db: float
    si_sdr_improvement_db: float
    noisy_stoi: float
    noisy_si_sdr_db: float

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "stoi": self.stoi,
            "si_sdr_db": self.si_sdr_db,
            "si_sdr_improvement_db": self.si_sdr_improvement_db,
            "noisy_stoi": self.noisy_stoi,
            "noisy_si_sdr_db": self.noisy_si_sdr_db,
        }


def _mean(values) -> Optional[float]:
    values = list(values)
    return float(np.mean(values)) if values else None


@dataclass(frozen=True)
class MetricsReport:
    """
    Per-scene rows for one method plus the noisy-input baseline measured in the same run.
    Aggregates are plain arithmetic means over the rows (None for an empty manifest).
    """
    method: str
    rows: Tuple[SceneMetrics, ...] = ()
    config: Dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def aggregate(self) -> Dict[str, Optional[float]]:
        return {key: _mean(getattr(row, key) for row in self.rows) for key in METRIC_KEYS}

    @property
    def baseline_aggregate(self) -> Dict[str, Optional[float]]:
        return {
            "stoi": _mean(row.noisy_stoi for row in self.rows),
            "si_sdr_db": _mean(row.noisy_si_sdr_db for row in self.rows),
            "si_sdr_improvement_db": 0.0 if self.rows else None,
        }

    @property
    def stoi_relative_improvement_pct(self) -> Optional[float]:
        method, noisy = self.aggregate["stoi"], self.baseline_aggregate["stoi"]
        if method is None or not noisy:
            return None
        return 100.0 * (method - noisy) / noisy

    def table_rows(self) -> Sequence[dict]:
        return [
            {"method": BASELINE_METHOD, **self.baseline_aggregate},
            {"method": self.method, **self.aggregate},
        ]

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "method": self.method,
            "config": self.config,
            "scenes": [row.to_dict() for row in self.rows],
            "aggregate": self.aggregate,
            "table": list(self.table_rows()),
            "stoi_relative_improvement_pct": self.stoi_relative_improvement_pct,
        }

    def to_table(self) -> str:
        """Method / metric columns, aligned for a terminal or a plain-text file."""
        header = ["Method", "STOI", "SI-SDR (dB)", "SI-SDRi (dB)"]
        lines = [header]
        for row in self.table_rows():
            lines.append([row["method"]] + [_fmt(row[key]) for key in METRIC_KEYS])
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        rendered = [
            "  ".join(cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(line))
            for line in lines
        ]
        rendered.insert(1, "  ".join("-" * w for w in widths))
        improvement = self.stoi_relative_improvement_pct
        if improvement is not None:
            rendered.append(f"STOI relative improvement over {BASELINE_METHOD}: {improvement:+.2f}%")
        return "\n".join(rendered) + "\n"


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def report_schema(path=None) -> dict:
    return read_json(path or settings.AVSM_REPORT_SCHEMA)


def validate_report(payload: dict, schema_path=None):
    """Raises jsonschema.ValidationError when `payload` does not match the shipped schema."""
    jsonschema.validate(instance=payload, schema=report_schema(schema_path))


def write_report(report: MetricsReport, out_path, schema_path=None) -> Path:
    """
    Validates and writes `out_path` (JSON) plus the text table next to it (`.txt`).

    Returns:
        Path of the JSON report.
    """
    out_path = Path(out_path)
    payload = report.to_dict()
    validate_report(payload, schema_path)
    try:
        write_json(out_path, payload)
        out_path.with_suffix(".txt").write_text(report.to_table(), encoding="utf-8")
    except OSError as exc:
        raise FileError(f"cannot write metrics report {out_path}: {exc}") from exc
    logger.info(f"metrics report for {len(report.rows)} scenes written to {out_path}")
    return out_path
