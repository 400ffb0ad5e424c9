"""Report model shared by every CLI command, and its JSON and CSV renderings"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator

import numpy as np

from channel_models.channel import Channel

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("n", "log2_M_beta", "rate", "normal_approx", "gap")


def fingerprint(channel: Channel) -> dict[str, Any]:
    """Dimensions and a sha256 of the canonical JSON form of a channel"""
    canonical = json.dumps(channel.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return {
        "inputs": channel.input_size,
        "outputs": channel.output_size,
        "sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
    }


def round_significant(value: float, digits: int = 12) -> float:
    """Float rounded to `digits` significant digits, the value written to reports"""
    if not np.isfinite(value):
        return float(value)
    return float(f"{value:.{digits}g}")


def render_value(value: Any, digits: int = 12) -> Any:
    """JSON ready copy of a result value

    Floats are rounded to `digits` significant digits, Fractions become "num/den" strings
    and numpy arrays become nested lists.
    """
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        rounded = round_significant(float(value), digits)
        if not np.isfinite(rounded):
            return str(rounded)
        return rounded
    if isinstance(value, np.ndarray):
        return [render_value(item, digits) for item in value.tolist()]
    if isinstance(value, dict):
        return {str(key): render_value(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [render_value(item, digits) for item in value]
    return value


@dataclass
class Report:
    """Outcome of one command

    command: the argv the command was run with
    channel: fingerprint of the input channel, None for commands without one
    results: named scalars and vectors in insertion order
    mode: float or exact, tolerance: the tolerance the results carry
    solver: iteration counts, duality gaps and backend names
    rows: table rows of sweeps, also the CSV body
    timing: wall clock seconds, the only field that changes between identical runs
    """

    command: list[str]
    mode: str = "float"
    tolerance: float = 1e-9
    channel: dict[str, Any] | None = None
    results: dict[str, Any] = field(default_factory=dict)
    solver: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    rows: list[dict[str, Any]] = field(default_factory=list)
    timing: float = 0.0

    def to_json_dict(self, digits: int = 12) -> dict[str, Any]:
        """Report as a JSON ready dict"""
        document: dict[str, Any] = {
            "command": self.command,
            "mode": self.mode,
            "tolerance": self.tolerance,
            "channel": self.channel,
            "results": render_value(self.results, digits),
        }
        if self.rows:
            document["rows"] = render_value(self.rows, digits)
        document["solver"] = render_value(self.solver, digits)
        document["warnings"] = list(self.warnings)
        document["timing"] = round(self.timing, 6)
        return document

    def to_json(self, digits: int = 12) -> str:
        """Indented JSON text"""
        return json.dumps(self.to_json_dict(digits), indent=2) + "\n"

    def to_csv(self, digits: int = 12) -> str:
        """CSV text, sweep rows under their column header or name,value pairs of the results"""
        buffer = io.StringIO()
        if self.rows:
            writer = csv.DictWriter(buffer, fieldnames=list(self.rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({key: _csv_cell(value, digits) for key, value in row.items()})
        else:
            writer_pairs = csv.writer(buffer, lineterminator="\n")
            writer_pairs.writerow(["name", "value"])
            for name, value in _flatten(self.results):
                writer_pairs.writerow([name, _csv_cell(value, digits)])
        return buffer.getvalue()

    def render(self, output_format: str, digits: int = 12) -> str:
        """JSON or CSV text"""
        if output_format == "csv":
            return self.to_csv(digits)
        return self.to_json(digits)


def _csv_cell(value: Any, digits: int) -> str:
    rendered = render_value(value, digits)
    if isinstance(rendered, float):
        return repr(rendered)
    return str(rendered)


def _flatten(results: dict[str, Any], prefix: str = "") -> Iterator[tuple[str, Any]]:
    for name, value in results.items():
        key = f"{prefix}{name}"
        if isinstance(value, dict):
            yield from _flatten(value, prefix=f"{key}.")
        elif isinstance(value, (list, tuple, np.ndarray)):
            for index, item in enumerate(np.asarray(value, dtype=object).reshape(-1)):
                yield f"{key}[{index}]", item
        else:
            yield key, value


def parse_sweep_csv(text: str) -> list[dict[str, Any]]:
    """Read back the rows of a sweep CSV, n as int and every other column as float"""
    reader = csv.DictReader(io.StringIO(text))
    return [
        {name: int(cell) if name == "n" else float(cell) for name, cell in row.items()}
        for row in reader
    ]


class WarningCollector(logging.Handler):
    """Logging handler that keeps the text of every WARNING or worse record"""

    def __init__(self) -> None:
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())
