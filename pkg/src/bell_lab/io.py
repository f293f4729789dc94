"""Counts CSV, report JSON and curve CSV formats."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Sequence

from .inequality import CoefficientVector, linear_combination
from .model import AnalyzerSettings, ModelKind, StateModel, lhv_probabilities, predict_probabilities
from .simulator import CountsRecord

COUNTS_HEADER = ("alpha_deg", "beta_deg", "n_pp", "n_pm", "n_mp", "n_mm")
CURVE_HEADER = ("delta_rad", "value")
SIGNIFICANT_DIGITS = 12


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class Dataset:
    records: list[CountsRecord]
    metadata: dict = field(default_factory=dict)


def format_number(x: float) -> str:
    text = format(float(x), f".{SIGNIFICANT_DIGITS}g")
    return "0" if text == "-0" else text


@contextmanager
def _open_text(target, mode: str) -> Iterator[IO[str]]:
    # "-" or None means stdin/stdout; file objects pass through untouched
    if target is None or target == "-":
        yield sys.stdin if "r" in mode else sys.stdout
    elif hasattr(target, "read") or hasattr(target, "write"):
        yield target
    else:
        with open(target, mode, encoding="utf-8", newline="") as fh:
            yield fh


def _parse_count(text: str, lineno: int, column: str) -> int:
    text = text.strip()
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"line {lineno}: {column} must be an integer, got {text!r}") from None
    if value < 0:
        raise DataError(f"line {lineno}: {column} must be non-negative, got {value}")
    return value


def _parse_angle(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise DataError(f"line {lineno}: {column} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: {column} must be finite, got {text!r}")
    return value


def parse_counts(text: str, strict: bool = False, source: str = "<string>") -> Dataset:
    """Parse counts CSV text.

    Rows sharing (alpha_deg, beta_deg) are merged by summing counts unless
    ``strict`` is set, in which case duplicates are an error.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [(i, row) for i, row in enumerate(reader, start=1) if any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{source}: empty file")
    header_line, header = rows[0]
    if tuple(cell.strip() for cell in header) != COUNTS_HEADER:
        raise DataError(f"line {header_line}: expected header {','.join(COUNTS_HEADER)}, got {','.join(header)!r}")
    if len(rows) == 1:
        raise DataError(f"{source}: no data rows")

    merged: dict[tuple[float, float], list] = {}
    first_line: dict[tuple[float, float], int] = {}
    for lineno, row in rows[1:]:
        if len(row) != len(COUNTS_HEADER):
            raise DataError(f"line {lineno}: expected {len(COUNTS_HEADER)} fields, got {len(row)}")
        alpha = _parse_angle(row[0], lineno, "alpha_deg")
        beta = _parse_angle(row[1], lineno, "beta_deg")
        counts = [_parse_count(cell, lineno, name) for cell, name in zip(row[2:], COUNTS_HEADER[2:])]
        key = (alpha, beta)
        if key in merged:
            if strict:
                raise DataError(f"line {lineno}: duplicate setting pair {key} (first seen on line {first_line[key]})")
            merged[key] = [a + b for a, b in zip(merged[key], counts)]
        else:
            merged[key] = counts
            first_line[key] = lineno

    records = []
    for (alpha, beta), counts in merged.items():
        if sum(counts) == 0:
            raise DataError(f"line {first_line[(alpha, beta)]}: setting pair has zero total counts")
        records.append(CountsRecord(AnalyzerSettings.from_degrees(alpha, beta), *counts))
    return Dataset(records, {"source": source, "rows": len(rows) - 1, "merged_duplicates": len(rows) - 1 - len(records)})


def load_dataset(path, strict: bool = False) -> Dataset:
    """Read a counts CSV from a path, an open file, or ``"-"`` for stdin."""
    if path in (None, "-"):
        source = "<stdin>"
    elif isinstance(path, (str, Path)):
        source = str(path)
    else:
        source = str(getattr(path, "name", "<stream>"))
    try:
        with _open_text(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc}") from exc
    return parse_counts(text, strict=strict, source=source)


def write_counts(records: Sequence[CountsRecord], target) -> None:
    with _open_text(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNTS_HEADER)
        for rec in records:
            writer.writerow(
                [format_number(rec.settings.alpha_deg), format_number(rec.settings.beta_deg), *rec.counts()]
            )


def _clean(value):
    # recursive 12-significant-digit rounding; keeps key order
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r} in report")
        rounded = float(format(value, f".{SIGNIFICANT_DIGITS}g"))
        return rounded + 0.0
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    raise TypeError(f"cannot serialize {type(value).__name__} in report")


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def emit_report(report: dict, target) -> None:
    text = dumps_report(report)
    try:
        with _open_text(target, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write report to {target}: {exc}") from exc


def curve_points(step: float) -> list[float]:
    """0..pi inclusive; an exact divisor of pi lands on pi without drift."""
    if not (step > 0.0 and math.isfinite(step)):
        raise ValueError("step must be positive")
    n = round(math.pi / step)
    if n >= 1 and abs(n * step - math.pi) < 1e-9:
        return [math.pi * k / n for k in range(n + 1)]
    points = [k * step for k in range(int(math.pi // step) + 1)]
    if points[-1] < math.pi:
        points.append(math.pi)
    return points


def curve_values(model: StateModel, c: CoefficientVector, step: float) -> list[tuple[float, float]]:
    """E_c along alpha = 0, beta = delta."""
    rows = []
    for delta in curve_points(step):
        settings = AnalyzerSettings(0.0, delta)
        if model.kind is ModelKind.LHV:
            quad = lhv_probabilities(settings)
        else:
            quad = predict_probabilities(model, settings)
        rows.append((delta, linear_combination(c, quad)))
    return rows


def emit_curve(model: StateModel, c: CoefficientVector, step: float, target) -> None:
    rows = curve_values(model, c, step)
    try:
        with _open_text(target, "w") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_HEADER)
            for delta, value in rows:
                writer.writerow([format_number(delta), format_number(value)])
    except OSError as exc:
        raise DataError(f"cannot write curve to {target}: {exc}") from exc


def read_settings_csv(path) -> list[AnalyzerSettings]:
    """Setting pairs from any CSV whose first two columns are alpha_deg, beta_deg."""
    with _open_text(path, "r") as fh:
        rows = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if not rows or [c.strip() for c in rows[0][:2]] != ["alpha_deg", "beta_deg"]:
        raise DataError(f"{path}: expected a header starting with alpha_deg,beta_deg")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        out.append(AnalyzerSettings.from_degrees(_parse_angle(row[0], lineno, "alpha_deg"),
                                                 _parse_angle(row[1], lineno, "beta_deg")))
    if not out:
        raise DataError(f"{path}: no setting pairs")
    return out
