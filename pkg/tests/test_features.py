import io
from datetime import timedelta

import pytest

from hypoalarm import (
    DataValidationError,
    PipelineConfig,
    build_instances,
    decision_grid,
    find_postprandial_peak,
    horizon_label,
    label_hypoglycemia,
    meal_episodes,
    rate_of_decrease,
    read_feature_csv,
    write_feature_csv,
)
from hypoalarm.synth import SynthConfig, generate_cohort

from conftest import WORKED_ROWS, series_from_anchors, ts


class TestPeak:
    def test_worked_evening_peak(self, worked_series):
        assert find_postprandial_peak(worked_series, ts("19:07")) == (ts("19:32"), 15.7)

    def test_worked_morning_peak(self, worked_series):
        assert find_postprandial_peak(worked_series, ts("8:42")) == (ts("9:17"), 12.7)

    def test_decreasing_bg_peaks_at_the_meal(self):
        series = series_from_anchors([("9:02", 11.0), ("12:02", 5.0)], {"9:02": 10.8},
                                     start="9:02", end="12:02")
        assert find_postprandial_peak(series, ts("9:02")) == (ts("9:02"), 11.0)

    def test_earliest_tie_wins(self):
        series = series_from_anchors(
            [("9:02", 10.0), ("9:27", 15.7), ("9:52", 15.7), ("11:02", 8.0)],
            start="9:02", end="11:02")
        # interpolation keeps the plateau at 15.7 between the two anchors
        assert find_postprandial_peak(series, ts("9:02")) == (ts("9:27"), 15.7)

    def test_empty_window_is_none(self):
        series = series_from_anchors([("9:02", 10.0), ("12:02", 10.0)],
                                     start="9:02", end="12:02",
                                     missing=[f"{h}:{m:02d}" for h in (9, 10, 11, 12)
                                              for m in (2, 7, 12, 17, 22, 27, 32, 37, 42, 47, 52, 57)])
        assert find_postprandial_peak(series, ts("9:02")) is None


class TestDecisionGrid:
    def test_first_three_evening_decisions(self):
        grid = decision_grid(ts("19:07"), None)
        assert grid[:3] == [ts("21:07"), ts("21:22"), ts("21:37")]

    def test_morning_rows(self):
        grid = decision_grid(ts("8:42"), None)
        assert ts("10:42") in grid and ts("10:57") in grid and ts("11:12") in grid
        assert len(grid) == 7

    def test_late_meal_truncates_at_daytime_end(self):
        # horizons must end by 23:00, so only the 20:30 meal's first decision survives
        grid = decision_grid(ts("20:30"), None)
        assert grid == [ts("22:30")]
        assert all(t + timedelta(minutes=25) <= ts("23:00") for t in grid)

    def test_early_meal_waits_for_daytime_start(self):
        grid = decision_grid(ts("4:00", day=8), None)
        assert all(t + timedelta(minutes=15) >= ts("7:00", day=8) for t in grid)
        assert ts("6:00", day=8) not in grid
        assert ts("6:45", day=8) in grid

    def test_next_meal_truncates(self):
        grid = decision_grid(ts("8:42"), ts("11:12"))
        assert grid == [ts("10:42"), ts("10:57")]

    def test_overnight_horizon_dropped(self):
        assert decision_grid(ts("22:00"), None) == []


class TestHorizonLabel:
    def _series(self, bgs, missing=()):
        anchors = [("9:00", bgs[0]), ("9:15", bgs[0]), ("9:20", bgs[1]), ("9:25", bgs[2])]
        return series_from_anchors(anchors, start="9:00", end="9:25", missing=missing)

    def test_any_low_reading_flags(self):
        series = self._series([4.1, 3.8, 4.0])
        assert horizon_label(series, ts("9:00")) == (1, 3.8)

    def test_all_high_readings_stay_zero(self):
        series = self._series([8.0, 7.7, 7.5])
        assert horizon_label(series, ts("9:00")) == (0, 7.5)

    def test_all_missing_is_none(self):
        series = self._series([8.0, 7.7, 7.5], missing=("9:15", "9:20", "9:25"))
        assert horizon_label(series, ts("9:00")) is None

    def test_partial_horizon_still_labels(self):
        series = self._series([8.0, 3.5, 7.5], missing=("9:20",))
        assert horizon_label(series, ts("9:00")) == (0, 7.5)


class TestRate:
    def test_worked_evening_rate(self):
        assert rate_of_decrease(15.7, ts("19:32"), 8.0, ts("21:07")) == pytest.approx(
            0.081, abs=5e-4)

    def test_worked_morning_rate(self):
        assert rate_of_decrease(12.7, ts("9:17"), 6.6, ts("10:42")) == pytest.approx(
            0.072, abs=5e-4)

    def test_no_net_change(self):
        assert rate_of_decrease(10.0, ts("9:00"), 10.0, ts("9:50")) == 0.0

    def test_negative_when_bg_rose_above_peak(self):
        assert rate_of_decrease(10.0, ts("9:00"), 11.0, ts("10:00")) < 0

    def test_degenerate_order_rejected(self):
        with pytest.raises(ValueError):
            rate_of_decrease(10.0, ts("9:00"), 9.0, ts("9:00"))
        with pytest.raises(ValueError):
            rate_of_decrease(10.0, ts("9:00"), 9.0, ts("8:55"))


class TestBuildInstances:
    def test_worked_rows(self, worked_series):
        instances = {i.decision_time: i for i in build_instances(worked_series)}
        for hhmm, x_t, rate, label in WORKED_ROWS:
            inst = instances[ts(hhmm)]
            assert inst.x_t == pytest.approx(x_t, abs=1e-9)
            assert inst.rate == pytest.approx(rate, abs=5e-4)
            assert inst.label == label

    def test_instance_counts_per_meal(self, worked_series):
        instances = build_instances(worked_series)
        morning = [i for i in instances if i.meal_time == ts("8:42")]
        evening = [i for i in instances if i.meal_time == ts("19:07")]
        assert len(morning) == 7   # full grid fits the day
        assert len(evening) == 6   # the 22:37 decision would see past 23:00

    def test_ordering(self, worked_series):
        instances = build_instances(worked_series)
        keys = [(i.meal_time, i.decision_time) for i in instances]
        assert keys == sorted(keys)

    def test_no_meals_means_no_instances(self):
        series = series_from_anchors([("9:02", 8.0), ("12:02", 8.0)],
                                     start="9:02", end="12:02")
        assert build_instances(series) == []

    def test_zero_meals_marker_required(self, worked_series):
        episodes = meal_episodes(worked_series)
        assert [e.meal_time for e in episodes] == [ts("8:42"), ts("19:07")]
        assert episodes[0].peak_value == 12.7

    def test_rate_times_dt_recovers_bg_drop(self, worked_series):
        for inst in build_instances(worked_series):
            dt = (inst.decision_time - inst.peak_time).total_seconds() / 60
            assert inst.rate * dt == pytest.approx(inst.peak_value - inst.x_t, abs=1e-9)

    def test_pipeline_invariants_on_synthetic_cohort(self):
        cfg = PipelineConfig()
        offsets = set(cfg.decision_offsets_min)
        for series in generate_cohort(SynthConfig(n_patients=6, seed=11)):
            meals = list(series.meal_times)
            instances = build_instances(series, cfg)
            for inst in instances:
                delta = (inst.decision_time - inst.meal_time).total_seconds() / 60
                assert delta in offsets
                gap = (inst.decision_time - inst.peak_time).total_seconds() / 60
                assert gap >= 5
                start = inst.decision_time + timedelta(minutes=15)
                end = inst.decision_time + timedelta(minutes=25)
                assert start.time() >= cfg.daytime_start
                assert end.time() <= cfg.daytime_end
                later = [m for m in meals if m > inst.meal_time]
                if later:
                    assert inst.decision_time < min(later)
                assert inst.label == label_hypoglycemia(inst.ph_min_bg)


class TestFeatureCsv:
    def test_round_trip(self, worked_series):
        instances = build_instances(worked_series)
        buf = io.StringIO()
        write_feature_csv(instances, buf)
        again = read_feature_csv(io.StringIO(buf.getvalue()))
        assert again == instances

    def test_bad_header_rejected(self):
        with pytest.raises(DataValidationError, match="header"):
            read_feature_csv(io.StringIO("a,b\n"))

    def test_bad_label_rejected(self, worked_series):
        instances = build_instances(worked_series)
        buf = io.StringIO()
        write_feature_csv(instances, buf)
        mangled = buf.getvalue().replace(",0\n", ",2\n", 1)
        with pytest.raises(DataValidationError, match="label"):
            read_feature_csv(io.StringIO(mangled))
