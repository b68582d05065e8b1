"""From a day of CGM readings to alarm decision instances.

Each meal gets a decision grid 2h .. 3h30m after it, every 15 minutes.
A decision at time t asks: will any reading 15/20/25 min from now be at or
under 3.9 mmol/L? The two predictors are the current reading x_t and the
rate of decrease from the post-meal peak, (peak - x_t) / minutes.
"""

from datetime import datetime, timedelta

import numpy as np

from hypoalarm import GlucoseSample, PatientSeries, build_instances, find_postprandial_peak

# One synthetic day, two meals: dinner stays high, the morning meal decays
# into an early-afternoon low.
ANCHORS = [
    ("7:02", 7.0), ("8:42", 7.0), ("9:17", 12.7), ("10:42", 6.6),
    ("10:57", 5.6), ("11:12", 4.8), ("11:27", 3.8), ("11:32", 3.6),
    ("11:37", 3.7), ("11:57", 4.4), ("12:37", 5.2), ("19:07", 9.0),
    ("19:32", 15.7), ("21:07", 8.0), ("21:22", 8.7), ("21:37", 8.4),
    ("22:57", 8.0),
]
MEALS = {"8:42": 6.8, "19:07": 9.2}


def at(hhmm):
    hour, minute = hhmm.split(":")
    return datetime(2015, 9, 7, int(hour), int(minute))


start, end = at("7:02"), at("22:57")
xp = [(at(h) - start).total_seconds() / 60 for h, _ in ANCHORS]
fp = [v for _, v in ANCHORS]
samples = []
t = start
while t <= end:
    minutes = (t - start).total_seconds() / 60
    key = f"{t.hour}:{t.minute:02d}"
    samples.append(GlucoseSample(t, float(np.interp(minutes, xp, fp)), MEALS.get(key)))
    t += timedelta(minutes=5)
series = PatientSeries("demo", tuple(samples))

for meal in series.meal_times:
    peak_time, peak_value = find_postprandial_peak(series, meal)
    print(f"meal {meal:%H:%M}: peak {peak_value} mmol/L at {peak_time:%H:%M}")

print()
print("decision   x_t    rate      low-in-horizon  label")
for inst in build_instances(series):
    print(f"{inst.decision_time:%H:%M}      {inst.x_t:<6.3g} {inst.rate:<9.3f} "
          f"{inst.ph_min_bg:<15.3g} {inst.label}")
