"""Shared fixtures: hand-built series with known peaks, rates, and labels."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from hypoalarm import GlucoseSample, PatientSeries


def ts(hhmm: str, day: int = 7) -> datetime:
    hour, minute = hhmm.split(":")
    return datetime(2015, 9, day, int(hour), int(minute))


def series_from_anchors(anchors, meals=None, missing=None, start="7:02", end="22:57",
                        patient_id="anchored", dm_type="other") -> PatientSeries:
    """5-min series interpolating linearly between (H:MM, bg) anchors.

    `meals` maps H:MM to the reference BG recorded at that sample;
    `missing` lists H:MM samples whose sensor reading becomes N/A.
    """
    meals = meals or {}
    missing = set(missing or ())
    t_start, t_end = ts(start), ts(end)
    xp = [(ts(h) - t_start).total_seconds() / 60.0 for h, _ in anchors]
    fp = [v for _, v in anchors]
    n = int((t_end - t_start).total_seconds() // 60 // 5) + 1
    samples = []
    for i in range(n):
        t = t_start + timedelta(minutes=5 * i)
        key = f"{t.hour}:{t.minute:02d}"
        bg = None if key in missing else float(np.interp(5.0 * i, xp, fp))
        samples.append(GlucoseSample(timestamp=t, bg=bg, meal_ref=meals.get(key)))
    return PatientSeries(patient_id=patient_id, samples=tuple(samples), dm_type=dm_type)


# Two meals in one day. The morning meal decays into an afternoon low
# (label flips to 1 at the 11:12 decision); the evening meal stays high.
WORKED_ANCHORS = [
    ("7:02", 7.0),
    ("8:42", 7.0),
    ("9:17", 12.7),   # morning peak
    ("10:42", 6.6),
    ("10:57", 5.6),
    ("11:12", 4.8),
    ("11:27", 3.8),
    ("11:32", 3.6),
    ("11:37", 3.7),
    ("11:57", 4.4),
    ("12:37", 5.2),
    ("19:07", 9.0),
    ("19:32", 15.7),  # evening peak
    ("21:07", 8.0),
    ("21:22", 8.7),
    ("21:37", 8.4),
    ("22:57", 8.0),
]

WORKED_MEALS = {"8:42": 6.8, "19:07": 9.2}

# (decision time, expected x_t, expected rate, expected label); rates match
# the printed three-decimal values to within 5e-4
WORKED_ROWS = [
    ("21:07", 8.0, 0.081, 0),
    ("21:22", 8.7, 0.064, 0),
    ("21:37", 8.4, 0.058, 0),
    ("10:42", 6.6, 0.072, 0),
    ("10:57", 5.6, 0.071, 0),
    ("11:12", 4.8, 0.069, 1),
]


@pytest.fixture
def worked_series() -> PatientSeries:
    return series_from_anchors(WORKED_ANCHORS, WORKED_MEALS, patient_id="p-worked")
