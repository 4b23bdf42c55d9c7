import numpy as np
import pytest

from oracles import naive_good_sections, naive_resample_mean
from wattsplit.errors import DataError, ParseError
from wattsplit.ingest import (
    PowerSeries,
    align,
    build_aggregate,
    fill_gaps,
    good_sections,
    parse_channel,
    parse_labels,
    resample_mean,
    serialize_channel,
)

# channel layout of a real six-house low_freq house-1 index
HOUSE1_LABELS = """1 mains
2 mains
3 oven
4 oven
5 refrigerator
6 dishwaser
7 kitchen_outlets
8 kitchen_outlets
9 lighting
10 washer_dryer
11 microwave
12 bathroom_gfi
13 electric_heat
14 stove
15 kitchen_outlets
16 kitchen_outlets
17 lighting
18 lighting
19 washer_dryer
20 washer_dryer
"""


class TestParseLabels:
    def test_empty_file(self):
        assert parse_labels("") == []

    def test_basic_lines(self):
        metas = parse_labels("1 mains\n2 mains\n5 refrigerator")
        assert [m.channel_id for m in metas] == [1, 2, 5]
        assert [m.label for m in metas] == ["mains", "mains", "refrigerator"]

    def test_twenty_line_index(self):
        metas = parse_labels(HOUSE1_LABELS, house_id=1)
        assert len(metas) == 20
        assert len({m.channel_id for m in metas}) == 20
        assert metas[4].label == "refrigerator"

    def test_malformed_line_names_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_labels("1 mains\nbogus line here")

    def test_non_integer_channel(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_labels("x mains")


class TestParseChannel:
    def test_single_line(self):
        times, watts = parse_channel("1303132929 245.5")
        assert times.tolist() == [1303132929]
        assert watts.tolist() == [245.5]

    def test_gap_preserved(self):
        times, watts = parse_channel("100 1.0\n103 2.0")
        assert (times[1] - times[0]) == 3

    def test_non_monotonic_rejected(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_channel("100 1.0\n100 2.0")

    def test_non_numeric_rejected(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_channel("100 watts")

    def test_round_trip_identity(self, rng):
        times = np.cumsum(rng.integers(1, 5, size=200)).astype(np.int64)
        watts = rng.uniform(0, 4000, size=200)
        text = serialize_channel(times, watts)
        t2, w2 = parse_channel(text)
        assert np.array_equal(t2, times)
        assert np.array_equal(w2, watts)
        assert serialize_channel(t2, w2) == text


class TestResampleMean:
    def test_constant_signal(self):
        times = np.arange(0, 600, 3, dtype=np.int64)
        series = resample_mean(times, np.full(len(times), 100.0), 60)
        assert len(series) == 10
        assert np.allclose(series.values, 100.0)

    def test_two_point_mean(self):
        series = resample_mean(np.array([10, 50]), np.array([100.0, 200.0]), 60)
        assert series.values.tolist() == [150.0]

    def test_empty_bucket_is_missing(self):
        series = resample_mean(np.array([10, 130]), np.array([1.0, 3.0]), 60)
        assert len(series) == 3
        assert np.isnan(series.values[1])

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            resample_mean(np.array([], dtype=np.int64), np.array([]), 60)

    def test_matches_naive_bucket_means(self, rng):
        for _ in range(50):
            n = rng.integers(1, 400)
            times = np.cumsum(rng.integers(1, 10, size=n)).astype(np.int64) + int(rng.integers(0, 1000))
            watts = rng.uniform(0, 500, size=n)
            got = resample_mean(times, watts, 60)
            start, expected = naive_resample_mean(times, watts, 60)
            assert got.start_time == start
            assert len(got) == len(expected)
            for g, e in zip(got.values, expected):
                if e is None:
                    assert np.isnan(g)
                else:
                    assert g == pytest.approx(e, rel=1e-5)

    def test_energy_preserved_on_uniform_spacing(self, rng):
        times = np.arange(0, 3600, 3, dtype=np.int64)
        watts = rng.uniform(50, 500, size=len(times))
        series = resample_mean(times, watts, 60)
        native_energy = watts.sum() * 3
        bucket_energy = np.nansum(series.values.astype(np.float64)) * 60
        assert bucket_energy == pytest.approx(native_energy, rel=0.01)


class TestGoodSections:
    def test_gapless(self, make_series):
        s = make_series(np.ones(100))
        secs = good_sections(s)
        assert [(g.start_index, g.length) for g in secs] == [(0, 100)]

    def test_single_missing_sample_splits(self, make_series):
        values = np.ones(100)
        values[50] = np.nan
        secs = good_sections(make_series(values))
        assert [(g.start_index, g.length) for g in secs] == [(0, 50), (51, 49)]

    def test_all_missing(self, make_series):
        assert good_sections(make_series([np.nan, np.nan])) == []

    def test_max_gap_bridges_short_runs(self, make_series):
        values = np.ones(10)
        values[4] = np.nan
        secs = good_sections(make_series(values), max_gap=120)
        assert [(g.start_index, g.length) for g in secs] == [(0, 10)]

    def test_matches_naive_scan(self, rng, make_series):
        for _ in range(100):
            n = int(rng.integers(1, 300))
            values = np.ones(n)
            values[rng.random(n) < 0.3] = np.nan
            max_gap = int(rng.choice([60, 120, 180, 300]))
            got = good_sections(make_series(values), max_gap)
            expected = naive_good_sections(np.isnan(values), 60, max_gap)
            assert [(g.start_index, g.length) for g in got] == expected

    def test_union_covers_valid_samples_exactly(self, rng, make_series):
        values = np.ones(200)
        values[rng.random(200) < 0.2] = np.nan
        covered = np.zeros(200, dtype=bool)
        for g in good_sections(make_series(values)):
            covered[g.start_index:g.start_index + g.length] = True
        assert np.array_equal(covered, ~np.isnan(values))


class TestFillGaps:
    def test_short_gap_filled(self, make_series):
        values = np.array([1.0, np.nan, np.nan, 4.0])
        filled = fill_gaps(make_series(values), max_fill=180)
        assert filled.values.tolist() == [1.0, 1.0, 1.0, 4.0]

    def test_long_gap_kept(self, make_series):
        values = np.array([1.0, np.nan, np.nan, np.nan, np.nan, 6.0])
        filled = fill_gaps(make_series(values), max_fill=180)
        assert np.isnan(filled.values[1:5]).all()

    def test_leading_gap_not_filled(self, make_series):
        filled = fill_gaps(make_series([np.nan, 2.0]), max_fill=600)
        assert np.isnan(filled.values[0])


class TestBuildAggregate:
    def test_sum_of_identical(self, make_series):
        s = make_series(np.full(100, 100.0))
        assert np.allclose(build_aggregate(s, s).values, 200.0)

    def test_missing_propagates(self, make_series):
        a = make_series([np.nan, np.nan, np.nan])
        b = make_series([1.0, 2.0, 3.0])
        assert np.isnan(build_aggregate(a, b).values).all()

    def test_shifted_ranges_intersect(self, make_series):
        a = make_series(np.arange(10.0), start=0)
        b = make_series(np.arange(8.0), start=240)
        combined = build_aggregate(a, b)
        assert combined.start_time == 240
        assert len(combined) == 6  # overlap [240, 600)

    def test_disjoint_ranges_rejected(self, make_series):
        a = make_series([1.0], start=0)
        b = make_series([1.0], start=6000)
        with pytest.raises(DataError, match="overlap"):
            build_aggregate(a, b)

    def test_period_mismatch_rejected(self, make_series):
        a = make_series([1.0, 2.0], period=60)
        b = make_series([1.0, 2.0], period=30)
        with pytest.raises(DataError, match="period"):
            align(a, b)
