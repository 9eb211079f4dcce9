import datetime as dt

import numpy as np
import pytest

from loadshapes.errors import (
    DuplicateRecordError,
    HeaderMismatchError,
    UnknownIndicatorError,
)
from loadshapes.ingest import (
    INDICATOR_VOCABULARY,
    HouseholdProfile,
    LoadDay,
    SeasonCalendar,
    WeatherDay,
    read_meter_corpus,
    read_survey,
    read_weather,
    write_meter_corpus,
    write_survey,
    write_weather,
)

D = dt.date


def wide_header():
    return "household_id,date," + ",".join(f"h{i}" for i in range(1, 25))


def wide_row(hid, date, values):
    return f"{hid},{date}," + ",".join(str(v) for v in values)


def test_wide_row_parses(tmp_path):
    path = tmp_path / "meter.csv"
    values = [0.3, 0.4] + [0.5] * 22
    path.write_text(wide_header() + "\n" + wide_row("H1", "2011-06-01", values) + "\n")
    days, diags = read_meter_corpus(path)
    assert diags == []
    assert len(days) == 1
    day = days[0]
    assert day.household_id == "H1"
    assert day.date == D(2011, 6, 1)
    assert np.array_equal(day.kwh, np.array(values))


def test_wide_row_with_23_values_rejected(tmp_path):
    path = tmp_path / "meter.csv"
    path.write_text(
        wide_header() + "\n" + wide_row("H1", "2011-06-01", [0.3] * 23) + "\n"
    )
    days, diags = read_meter_corpus(path)
    assert days == []
    assert len(diags) == 1
    assert diags[0].row == 2
    assert "expected 24 hourly columns" in diags[0].message


def test_malformed_cell_becomes_missing_not_zero(tmp_path):
    path = tmp_path / "meter.csv"
    values = ["0.3"] * 24
    values[12] = "oops"
    values[13] = ""
    values[14] = "-1.5"
    path.write_text(wide_header() + "\n" + wide_row("H1", "2011-06-01", values) + "\n")
    days, diags = read_meter_corpus(path)
    assert len(days) == 1
    kwh = days[0].kwh
    assert np.isnan(kwh[12]) and np.isnan(kwh[13]) and np.isnan(kwh[14])
    assert not np.any(kwh == 0.0)
    # malformed text and negative cells get diagnostics; an empty cell is
    # legitimate missing data
    assert len(diags) == 2


def test_duplicate_household_date_raises(tmp_path):
    path = tmp_path / "meter.csv"
    row = wide_row("H1", "2011-06-01", [0.3] * 24)
    path.write_text(wide_header() + "\n" + row + "\n" + row + "\n")
    with pytest.raises(DuplicateRecordError):
        read_meter_corpus(path)


def test_header_mismatch_raises(tmp_path):
    path = tmp_path / "meter.csv"
    path.write_text("household,date,h1\nH1,2011-06-01,0.3\n")
    with pytest.raises(HeaderMismatchError):
        read_meter_corpus(path)


def test_bad_date_rejected_with_row_number(tmp_path):
    path = tmp_path / "meter.csv"
    path.write_text(
        wide_header() + "\n"
        + wide_row("H1", "06/01/2011", [0.3] * 24) + "\n"
        + wide_row("H1", "2011-06-02", [0.3] * 24) + "\n"
    )
    days, diags = read_meter_corpus(path)
    assert len(days) == 1
    assert diags[0].row == 2 and "date" in diags[0].message


def test_long_reader_matches_wide_reader(tmp_path):
    # round-trip oracle: the same generated corpus written in both layouts
    # parses to identical LoadDays
    rng = np.random.default_rng(4)
    days = [
        LoadDay(f"H{i}", D(2011, 6, 1) + dt.timedelta(days=j),
                rng.uniform(0.1, 2.0, 24))
        for i in range(5)
        for j in range(4)
    ]
    wide = tmp_path / "wide.csv"
    long = tmp_path / "long.csv"
    write_meter_corpus(days, wide, "wide")
    write_meter_corpus(days, long, "long")
    wide_days, _ = read_meter_corpus(wide, "wide")
    long_days, _ = read_meter_corpus(long, "long")
    assert len(wide_days) == len(long_days) == len(days)
    by_key = {d.key: d for d in long_days}
    for day in wide_days:
        assert np.array_equal(day.kwh, by_key[day.key].kwh)


def test_long_reader_missing_hours_stay_missing(tmp_path):
    path = tmp_path / "long.csv"
    rows = ["household_id,date,hour,kwh"]
    for hour in (1, 2, 24):
        rows.append(f"H1,2011-06-01,{hour},0.5")
    path.write_text("\n".join(rows) + "\n")
    days, _ = read_meter_corpus(path, "long")
    assert len(days) == 1
    kwh = days[0].kwh
    assert kwh[0] == 0.5 and kwh[1] == 0.5 and kwh[23] == 0.5
    assert np.isnan(kwh[2:23]).all()


def test_long_duplicate_hour_raises(tmp_path):
    path = tmp_path / "long.csv"
    path.write_text(
        "household_id,date,hour,kwh\nH1,2011-06-01,3,0.5\nH1,2011-06-01,3,0.6\n"
    )
    with pytest.raises(DuplicateRecordError):
        read_meter_corpus(path, "long")


def test_meter_round_trip_preserves_values(tmp_path):
    rng = np.random.default_rng(11)
    kwh = rng.uniform(0, 3, 24)
    kwh[5] = np.nan
    days = [LoadDay("H9", D(2012, 1, 31), kwh)]
    path = tmp_path / "meter.csv"
    write_meter_corpus(days, path)
    back, _ = read_meter_corpus(path)
    assert back[0].key == days[0].key
    assert np.array_equal(back[0].kwh, kwh, equal_nan=True)


def test_loadday_requires_24_slots():
    with pytest.raises(ValueError):
        LoadDay("H1", D(2011, 6, 1), np.ones(23))


def test_weather_parses(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("date,avg_temp_f\n2011-07-04,78.2\n")
    records, diags = read_weather(path)
    assert diags == []
    assert records == [WeatherDay(D(2011, 7, 4), 78.2)]


def test_weather_empty_file_warns(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("date,avg_temp_f\n")
    with pytest.warns(UserWarning):
        records, _ = read_weather(path)
    assert records == []


def test_weather_non_numeric_rejected(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("date,avg_temp_f\n2011-07-04,warm\n2011-07-05,71.0\n")
    records, diags = read_weather(path)
    assert len(records) == 1
    assert diags[0].row == 2 and "non-numeric temperature" in diags[0].message


def test_weather_duplicate_date_raises(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("date,avg_temp_f\n2011-07-04,78.2\n2011-07-04,70.0\n")
    with pytest.raises(DuplicateRecordError):
        read_weather(path)


def test_weather_round_trip(tmp_path):
    records = [WeatherDay(D(2011, 6, 1) + dt.timedelta(days=i), 60.0 + i / 3)
               for i in range(10)]
    path = tmp_path / "weather.csv"
    write_weather(records, path)
    back, _ = read_weather(path)
    assert back == records


def test_survey_cell_mapping(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text(
        "household_id,elderly,low_income,chronically_ill\nH1,1,0,\n"
    )
    profiles, diags = read_survey(path)
    assert diags == []
    prof = profiles[0]
    assert prof.flag("elderly") is True
    assert prof.flag("low_income") is False
    assert prof.flag("chronically_ill") is None


def test_survey_unknown_column_lists_vocabulary(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text("household_id,owns_pool\nH1,1\n")
    with pytest.raises(UnknownIndicatorError) as err:
        read_survey(path)
    assert "owns_pool" in str(err.value)
    assert "low_income" in str(err.value)


def test_survey_duplicate_household_raises(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text("household_id,elderly\nH1,1\nH1,0\n")
    with pytest.raises(DuplicateRecordError):
        read_survey(path)


def test_survey_bad_cell_treated_unknown_with_diagnostic(tmp_path):
    path = tmp_path / "survey.csv"
    path.write_text("household_id,elderly\nH1,yes\n")
    profiles, diags = read_survey(path)
    assert profiles[0].flag("elderly") is None
    assert len(diags) == 1


def test_survey_participant_count_round_trip(tmp_path):
    # the study's survey had 6413 participants; parsing a corpus of that
    # size must preserve the distinct id count
    profiles = [
        HouseholdProfile(f"H{i:05d}", {"elderly": bool(i % 2)})
        for i in range(6413)
    ]
    path = tmp_path / "survey.csv"
    write_survey(profiles, path)
    back, _ = read_survey(path)
    assert len({p.household_id for p in back}) == 6413


def test_season_boundaries():
    assert SeasonCalendar.season(D(2011, 6, 1)) == "summer"
    assert SeasonCalendar.season(D(2011, 8, 31)) == "summer"
    assert SeasonCalendar.season(D(2011, 9, 1)) == "autumn"
    assert SeasonCalendar.season(D(2011, 12, 1)) == "winter"
    assert SeasonCalendar.season(D(2012, 2, 29)) == "winter"
    assert SeasonCalendar.season(D(2012, 3, 1)) == "spring"
    assert SeasonCalendar.season(D(2012, 5, 31)) == "spring"


def test_day_type_weekend_rule():
    assert SeasonCalendar.day_type(D(2011, 6, 4)) == "weekend"  # Saturday
    assert SeasonCalendar.day_type(D(2011, 6, 5)) == "weekend"  # Sunday
    assert SeasonCalendar.day_type(D(2011, 6, 6)) == "weekday"  # Monday
    # holidays are not treated as weekends (July 4th 2011 was a Monday)
    assert SeasonCalendar.day_type(D(2011, 7, 4)) == "weekday"


def test_indicator_vocabulary_is_closed():
    assert len(INDICATOR_VOCABULARY) == 12
    prof = HouseholdProfile("H1", {})
    with pytest.raises(UnknownIndicatorError):
        prof.flag("owns_pool")
