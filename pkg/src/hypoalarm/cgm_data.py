"""CGM record files: parsing, validation, unit conversion, grid lookups.

The on-disk format is a five-column CSV (``Sample#,Date,Time,Meal,SensorBG``)
with ``D.Mon.YY`` dates, ``H:MM`` 24-hour times, ``.`` in the Meal column for
"no meal here" or a numeric reference BG marking a meal, and ``N/A`` for a
missing sensor reading. All glucose values are mmol/L once parsed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, time, timedelta

from .cart import CostMatrix

#: mg/dL per mmol/L (glucose molar mass 180.16 g/mol).
MG_PER_DL_PER_MMOL_L = 18.016

HYPO_THRESHOLD = 3.9    # mmol/L, boundary inclusive
SEVERE_THRESHOLD = 2.8  # mmol/L

BG_MAX = 40.0  # mmol/L; readings outside (0, 40] are rejected

CSV_COLUMNS = ("Sample#", "Date", "Time", "Meal", "SensorBG")
DM_TYPES = ("type1", "type2", "other")

_MONTH_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


class DataValidationError(ValueError):
    """An input file violates the ingestion contract."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


@dataclass(frozen=True)
class GlucoseSample:
    timestamp: datetime
    bg: float | None              # mmol/L, None when the sensor reported N/A
    meal_ref: float | None = None  # reference BG marking a meal at this time


@dataclass(frozen=True)
class PatientSeries:
    """One patient's ordered 5-min CGM trace; immutable once built."""

    patient_id: str
    samples: tuple[GlucoseSample, ...]
    dm_type: str = "other"
    sampling_period_min: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.dm_type not in DM_TYPES:
            raise ValueError(f"dm_type must be one of {DM_TYPES}, got {self.dm_type!r}")
        prev = None
        for s in self.samples:
            for value in (s.bg, s.meal_ref):
                if value is not None and not (math.isfinite(value) and 0.0 < value <= BG_MAX):
                    raise ValueError(f"BG out of range (0, {BG_MAX}]: {value!r} at {s.timestamp}")
            if prev is not None and s.timestamp <= prev:
                raise ValueError(f"timestamps not strictly increasing at {s.timestamp}")
            prev = s.timestamp

    @property
    def meal_times(self) -> tuple[datetime, ...]:
        return tuple(s.timestamp for s in self.samples if s.meal_ref is not None)

    @property
    def missing_count(self) -> int:
        return sum(1 for s in self.samples if s.bg is None)


@dataclass(frozen=True)
class PipelineConfig:
    """Fixed pipeline constants; everything downstream reads them from here.

    Decisions happen on a 15-min grid from 2 h to 3 h 30 m after a meal,
    each one asking whether any of the readings 15/20/25 min ahead will be
    at or under the alarm threshold.
    """

    hypo_threshold: float = HYPO_THRESHOLD
    lead_time_min: int = 15
    horizon_offsets_min: tuple[int, ...] = (15, 20, 25)
    peak_window_min: int = 120
    decision_offsets_min: tuple[int, ...] = (120, 135, 150, 165, 180, 195, 210)
    daytime_start: time = time(7, 0)
    daytime_end: time = time(23, 0)
    snap_tolerance_min: float = 2.5
    costs: CostMatrix = CostMatrix(15.0, 1.0)
    prune_depth: int = 3
    folds: int = 5
    allocations: int = 4

    def __post_init__(self):
        offs = self.horizon_offsets_min
        if not offs or list(offs) != sorted(set(offs)) or offs[0] != self.lead_time_min:
            raise ValueError("horizon offsets must increase strictly and start at the lead time")
        dec = self.decision_offsets_min
        if not dec or dec[0] != self.peak_window_min:
            raise ValueError("decision grid must start at the end of the peak window")
        if any(b - a != 15 for a, b in zip(dec, dec[1:])):
            raise ValueError("decision grid must step by 15 minutes")
        if self.snap_tolerance_min < 0:
            raise ValueError("snap tolerance must be >= 0")
        if self.prune_depth < 1 or self.folds < 2 or self.allocations < 1:
            raise ValueError("prune_depth >= 1, folds >= 2, allocations >= 1 required")


def to_mmol(value: float, unit: str) -> float:
    """Convert a BG reading to mmol/L; `unit` is "mmol" or "mg"."""
    if unit not in ("mmol", "mg"):
        raise ValueError(f"unknown unit {unit!r}, expected 'mmol' or 'mg'")
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"BG must be finite and positive, got {value!r}")
    return float(value) if unit == "mmol" else value / MG_PER_DL_PER_MMOL_L


def to_mg(value: float) -> float:
    """mmol/L to mg/dL, the inverse of `to_mmol(..., "mg")`."""
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"BG must be finite and positive, got {value!r}")
    return value * MG_PER_DL_PER_MMOL_L


def label_hypoglycemia(bg: float | None, threshold: float = HYPO_THRESHOLD) -> int | None:
    """1 when BG is at or under the threshold, 0 above, None when missing."""
    if bg is None:
        return None
    return 1 if bg <= threshold else 0


def sample_at(series: PatientSeries, nominal: datetime,
              tolerance_min: float) -> GlucoseSample | None:
    """Present-BG sample nearest to `nominal` within the tolerance.

    Ties break toward the earlier sample; returns None when no present
    reading falls inside `nominal` +/- tolerance.
    """
    if tolerance_min < 0:
        raise ValueError("tolerance must be >= 0")
    tol = timedelta(minutes=tolerance_min)
    best = None
    best_delta = None
    for s in series.samples:
        if s.bg is None:
            continue
        delta = abs(s.timestamp - nominal)
        if delta <= tol and (best is None or delta < best_delta):
            best, best_delta = s, delta
    return best


def _parse_timestamp(date_cell: str, time_cell: str, line: int) -> datetime:
    try:
        day_s, month_s, year_s = date_cell.split(".")
        hour_s, minute_s = time_cell.split(":")
        return datetime(2000 + int(year_s), _MONTH_NAMES.index(month_s) + 1,
                        int(day_s), int(hour_s), int(minute_s))
    except ValueError as exc:
        raise DataValidationError(
            f"malformed timestamp {date_cell!r} {time_cell!r}", row=line) from exc


def _parse_bg(cell: str, column: str, unit: str, line: int) -> float:
    try:
        raw = float(cell)
    except ValueError as exc:
        raise DataValidationError(f"{column} is not a number: {cell!r}", row=line) from exc
    if not math.isfinite(raw) or raw <= 0:
        raise DataValidationError(f"{column} must be positive, got {cell!r}", row=line)
    value = to_mmol(raw, unit)
    if value > BG_MAX:
        raise DataValidationError(
            f"{column} out of range (0, {BG_MAX}] mmol/L: {cell!r}", row=line)
    return value


def parse_cgm_file(text, patient_id: str = "unknown", dm_type: str = "other",
                   unit: str = "mmol") -> PatientSeries:
    """Parse one patient's CSV export into a validated PatientSeries.

    `text` may be a string or a file-like object. Malformed rows are
    rejected with their 1-based line number; `unit="mg"` converts both BG
    columns from mg/dL on the way in.
    """
    if hasattr(text, "read"):
        text = text.read()
    if unit not in ("mmol", "mg"):
        raise ValueError(f"unknown unit {unit!r}, expected 'mmol' or 'mg'")

    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(cell.strip() for cell in rows[0]) != CSV_COLUMNS:
        raise DataValidationError(
            f"expected header {','.join(CSV_COLUMNS)!r}", row=1)

    samples = []
    prev_ts = None
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 5:
            raise DataValidationError(f"expected 5 columns, got {len(row)}", row=line)
        sample_no, date_cell, time_cell, meal_cell, bg_cell = (c.strip() for c in row)
        try:
            int(sample_no)
        except ValueError as exc:
            raise DataValidationError(
                f"Sample# is not an integer: {sample_no!r}", row=line) from exc
        ts = _parse_timestamp(date_cell, time_cell, line)
        if prev_ts is not None and ts <= prev_ts:
            raise DataValidationError(
                f"timestamps not strictly increasing at {date_cell} {time_cell}", row=line)
        prev_ts = ts
        meal_ref = None if meal_cell == "." else _parse_bg(meal_cell, "Meal", unit, line)
        bg = None if bg_cell == "N/A" else _parse_bg(bg_cell, "SensorBG", unit, line)
        samples.append(GlucoseSample(timestamp=ts, bg=bg, meal_ref=meal_ref))

    return PatientSeries(patient_id=patient_id, samples=tuple(samples), dm_type=dm_type)


def series_to_csv(series: PatientSeries) -> str:
    """Render the ingestion CSV format; inverse of `parse_cgm_file`."""
    lines = [",".join(CSV_COLUMNS)]
    for i, s in enumerate(series.samples):
        ts = s.timestamp
        date_cell = f"{ts.day}.{_MONTH_NAMES[ts.month - 1]}.{ts.year % 100:02d}"
        time_cell = f"{ts.hour}:{ts.minute:02d}"
        meal_cell = "." if s.meal_ref is None else repr(float(s.meal_ref))
        bg_cell = "N/A" if s.bg is None else repr(float(s.bg))
        lines.append(f"{i},{date_cell},{time_cell},{meal_cell},{bg_cell}")
    return "\n".join(lines) + "\n"
