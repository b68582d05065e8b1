"""Two-predictor decision instances over the post-meal decision grid.

Each meal yields up to seven alarm decisions, 2 h to 3 h 30 m after the
meal on a 15-min grid. A decision at time t carries the current reading
x_t, the rate of decrease from the post-meal peak, and a binary label: 1
when any reading 15/20/25 min after t is at or under the alarm threshold.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .cgm_data import (
    DataValidationError,
    PatientSeries,
    PipelineConfig,
    sample_at,
)

_EPOCH = datetime(2000, 1, 1)
_TS_FORMAT = "%Y-%m-%dT%H:%M"

FEATURE_COLUMNS = ("patient_id", "meal_time", "peak_time", "peak_value",
                   "decision_time", "x_t", "rate", "ph_min_bg", "label")


@dataclass(frozen=True)
class MealEpisode:
    """One meal's peak and the decision times that survived filtering."""

    meal_time: datetime
    peak_time: datetime
    peak_value: float
    decision_times: tuple[datetime, ...]


@dataclass(frozen=True)
class DecisionInstance:
    """One alarm decision: the two predictors, the label, and audit fields."""

    patient_id: str
    meal_time: datetime
    peak_time: datetime
    peak_value: float
    decision_time: datetime
    x_t: float        # snapped reading at the decision time, mmol/L
    rate: float       # (peak - x_t) / minutes since the peak; positive = falling
    label: int        # 1 iff any horizon reading <= threshold
    ph_min_bg: float  # lowest present horizon reading, kept for severity analysis


def find_postprandial_peak(series: PatientSeries, meal_time: datetime,
                           cfg: PipelineConfig | None = None):
    """Highest present BG in [meal, meal + peak window]; earliest on ties.

    Returns (peak_time, peak_value) or None when the window holds no
    present reading.
    """
    cfg = cfg or PipelineConfig()
    window_end = meal_time + timedelta(minutes=cfg.peak_window_min)
    best = None
    for s in series.samples:
        if s.bg is None or s.timestamp < meal_time or s.timestamp > window_end:
            continue
        if best is None or s.bg > best[1]:
            best = (s.timestamp, s.bg)
    return best


def _horizon_in_daytime(t: datetime, cfg: PipelineConfig) -> bool:
    start = t + timedelta(minutes=cfg.horizon_offsets_min[0])
    end = t + timedelta(minutes=cfg.horizon_offsets_min[-1])
    if start.date() != end.date():
        return False
    return cfg.daytime_start <= start.time() and end.time() <= cfg.daytime_end


def decision_grid(meal_time: datetime, next_meal: datetime | None,
                  cfg: PipelineConfig | None = None) -> list[datetime]:
    """Nominal decision times for one meal.

    Drops times at or after the next meal, and times whose horizon does
    not sit fully inside daytime hours.
    """
    cfg = cfg or PipelineConfig()
    grid = []
    for offset in cfg.decision_offsets_min:
        t = meal_time + timedelta(minutes=offset)
        if next_meal is not None and t >= next_meal:
            continue
        if not _horizon_in_daytime(t, cfg):
            continue
        grid.append(t)
    return grid


def horizon_label(series: PatientSeries, t: datetime,
                  cfg: PipelineConfig | None = None):
    """(label, lowest horizon BG) for a decision at `t`.

    Label is 1 iff any present reading snapped to t+15/t+20/t+25 is at or
    under the threshold; None when all three are missing.
    """
    cfg = cfg or PipelineConfig()
    readings = []
    for offset in cfg.horizon_offsets_min:
        s = sample_at(series, t + timedelta(minutes=offset), cfg.snap_tolerance_min)
        if s is not None:
            readings.append(s.bg)
    if not readings:
        return None
    low = min(readings)
    return (1 if low <= cfg.hypo_threshold else 0, low)


def rate_of_decrease(peak_value: float, peak_time: datetime,
                     current_value: float, current_time: datetime) -> float:
    """(peak - current) / minutes elapsed; positive means BG is falling."""
    minutes = (current_time - peak_time).total_seconds() / 60.0
    if minutes <= 0:
        raise ValueError("decision time must come after the peak")
    return (peak_value - current_value) / minutes


def _minutes(ts: datetime) -> int:
    return int((ts - _EPOCH).total_seconds() // 60)


class _SeriesIndex:
    """Array view of a series for fast snapped lookups."""

    def __init__(self, series: PatientSeries):
        self.ts = np.array([_minutes(s.timestamp) for s in series.samples], dtype=np.int64)
        self.bg = np.array([math.nan if s.bg is None else s.bg for s in series.samples])

    def nearest_present(self, nominal: int, tol: float) -> int | None:
        lo = int(np.searchsorted(self.ts, nominal - tol, side="left"))
        hi = int(np.searchsorted(self.ts, nominal + tol, side="right"))
        best = None
        best_delta = None
        for i in range(lo, hi):
            if math.isnan(self.bg[i]):
                continue
            delta = abs(int(self.ts[i]) - nominal)
            if delta <= tol and (best is None or delta < best_delta):
                best, best_delta = i, delta
        return best

    def window_max(self, start: int, end: int) -> int | None:
        lo = int(np.searchsorted(self.ts, start, side="left"))
        hi = int(np.searchsorted(self.ts, end, side="right"))
        if lo >= hi or bool(np.isnan(self.bg[lo:hi]).all()):
            return None
        return lo + int(np.nanargmax(self.bg[lo:hi]))  # first index wins ties


def meal_episodes(series: PatientSeries,
                  cfg: PipelineConfig | None = None) -> list[MealEpisode]:
    """Per-meal peak and surviving decision grid, before sample snapping."""
    cfg = cfg or PipelineConfig()
    idx = _SeriesIndex(series)
    meals = series.meal_times
    episodes = []
    for k, meal in enumerate(meals):
        next_meal = meals[k + 1] if k + 1 < len(meals) else None
        peak_i = idx.window_max(_minutes(meal), _minutes(meal) + cfg.peak_window_min)
        if peak_i is None:
            continue
        episodes.append(MealEpisode(
            meal_time=meal,
            peak_time=series.samples[peak_i].timestamp,
            peak_value=float(idx.bg[peak_i]),
            decision_times=tuple(decision_grid(meal, next_meal, cfg)),
        ))
    return episodes


def build_instances(series: PatientSeries,
                    cfg: PipelineConfig | None = None) -> list[DecisionInstance]:
    """All alarm decision instances for one patient, ordered by (meal, t).

    A grid time is skipped when it has no snapped reading, when its whole
    horizon is missing, or when it falls within one sampling period of the
    peak (the rate would be ill-defined there).
    """
    cfg = cfg or PipelineConfig()
    idx = _SeriesIndex(series)
    instances = []
    for episode in meal_episodes(series, cfg):
        h_min = _minutes(episode.peak_time)
        for t in episode.decision_times:
            t_min = _minutes(t)
            if t_min - h_min < series.sampling_period_min:
                continue
            cur_i = idx.nearest_present(t_min, cfg.snap_tolerance_min)
            if cur_i is None:
                continue
            readings = []
            for offset in cfg.horizon_offsets_min:
                hz_i = idx.nearest_present(t_min + offset, cfg.snap_tolerance_min)
                if hz_i is not None:
                    readings.append(float(idx.bg[hz_i]))
            if not readings:
                continue
            low = min(readings)
            x_t = float(idx.bg[cur_i])
            instances.append(DecisionInstance(
                patient_id=series.patient_id,
                meal_time=episode.meal_time,
                peak_time=episode.peak_time,
                peak_value=episode.peak_value,
                decision_time=t,
                x_t=x_t,
                rate=rate_of_decrease(episode.peak_value, episode.peak_time, x_t, t),
                label=1 if low <= cfg.hypo_threshold else 0,
                ph_min_bg=low,
            ))
    return instances


def write_feature_csv(instances, path) -> None:
    """One instance per row, full float precision, LF line endings."""
    lines = [",".join(FEATURE_COLUMNS)]
    for inst in instances:
        lines.append(",".join([
            inst.patient_id,
            inst.meal_time.strftime(_TS_FORMAT),
            inst.peak_time.strftime(_TS_FORMAT),
            repr(float(inst.peak_value)),
            inst.decision_time.strftime(_TS_FORMAT),
            repr(float(inst.x_t)),
            repr(float(inst.rate)),
            repr(float(inst.ph_min_bg)),
            str(int(inst.label)),
        ]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


def read_feature_csv(path) -> list[DecisionInstance]:
    """Load a feature table written by `write_feature_csv`."""
    if hasattr(path, "read"):
        text = path.read()
    else:
        text = Path(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != FEATURE_COLUMNS:
        raise DataValidationError(f"expected header {','.join(FEATURE_COLUMNS)!r}", row=1)
    instances = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(FEATURE_COLUMNS):
            raise DataValidationError(
                f"expected {len(FEATURE_COLUMNS)} columns, got {len(row)}", row=line)
        try:
            label = int(row[8])
            if label not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {label}")
            instances.append(DecisionInstance(
                patient_id=row[0],
                meal_time=datetime.strptime(row[1], _TS_FORMAT),
                peak_time=datetime.strptime(row[2], _TS_FORMAT),
                peak_value=float(row[3]),
                decision_time=datetime.strptime(row[4], _TS_FORMAT),
                x_t=float(row[5]),
                rate=float(row[6]),
                ph_min_bg=float(row[7]),
                label=label,
            ))
        except ValueError as exc:
            raise DataValidationError(str(exc), row=line) from exc
    return instances
