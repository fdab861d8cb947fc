from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demandshift.errors import IngestError, SpanError
from demandshift.ingest import (
    DemandSeries,
    RawEvent,
    RejectLog,
    Schema,
    aggregate_hourly,
    decompose_slot,
    ingest_sources,
    parse_events,
    read_demand_csv,
    recompose_slot,
    write_demand_csv,
)
from demandshift.modes import MODE_INDEX

T0 = datetime(2019, 1, 7)


def test_parse_three_car_rows():
    text = "timestamp,mode\n2019-01-07 08:05:00,car\n2019-01-07 08:20:00,car\n2019-01-07 09:00:00,car\n"
    log = RejectLog()
    events = parse_events(text, Schema(), log)
    assert len(events) == 3 and len(log) == 0
    assert [e.mode for e in events] == ["car"] * 3
    assert events[0].timestamp == datetime(2019, 1, 7, 8, 5)


def test_parse_header_only():
    assert parse_events("timestamp,mode\n", Schema()) == []


def test_unknown_mode_rejected_with_line_number():
    rows = ["timestamp,mode"] + [f"2019-01-07 0{i}:00:00,bus" for i in range(9)] + ["2019-01-07 09:00:00,boat"]
    log = RejectLog()
    events = parse_events("\n".join(rows) + "\n", Schema(), log)
    assert len(events) == 9
    assert log.lines() == ["11\tunknown mode 'boat'"]


def test_reject_threshold_is_hard_failure():
    text = "timestamp,mode\n2019-01-07 08:00:00,bus\nnot-a-date,bus\n"
    with pytest.raises(IngestError):
        parse_events(text, Schema())


def test_fixed_mode_and_custom_format():
    schema = Schema(timestamp_column="t", mode="car", mode_column=None, timestamp_format="%d/%m/%Y %H:%M",
                    delimiter=";", source_id_column="vid")
    events = parse_events("vid;t\nA;07/01/2019 08:30\nB;07/01/2019 09:10\n", schema)
    assert [(e.mode, e.source_id, e.timestamp.hour) for e in events] == [("car", "A", 8), ("car", "B", 9)]


def test_count_column_and_tz_offsets_merge_into_wall_clock_slot():
    text = ("timestamp,mode,count\n"
            "2019-10-27T02:00:00+02:00,bus,3\n"
            "2019-10-27T02:00:00+01:00,bus,4\n")
    events = parse_events(text, Schema(count_column="count"))
    series = aggregate_hourly(events, (datetime(2019, 10, 27, 2), datetime(2019, 10, 27, 2)))
    assert series.count("bus", datetime(2019, 10, 27, 2)) == 7


def test_hour_truncation_counts():
    ev = [RawEvent("car", T0 + timedelta(hours=8, minutes=m)) for m in (5, 20, 59)]
    s = aggregate_hourly(ev, (T0, T0 + timedelta(hours=23)))
    assert s.count("car", T0 + timedelta(hours=8)) == 3


def test_truncation_boundary():
    ev = [RawEvent("bus", datetime(2019, 1, 7, 8, 59, 59)), RawEvent("bus", datetime(2019, 1, 7, 9, 0, 0))]
    s = aggregate_hourly(ev, (datetime(2019, 1, 7, 8), datetime(2019, 1, 7, 9)))
    assert s.count("bus", datetime(2019, 1, 7, 8)) == 1
    assert s.count("bus", datetime(2019, 1, 7, 9)) == 1


def test_no_events_all_missing():
    s = aggregate_hourly([], (T0, T0 + timedelta(hours=5)))
    assert s.missing.all() and s.n_hours == 6


def test_partial_zero_modes_are_not_missing():
    ev = [RawEvent("bike", T0), RawEvent("bike", T0 + timedelta(hours=2))]
    s = aggregate_hourly(ev, (T0, T0 + timedelta(hours=2)))
    assert s.missing.tolist() == [False, True, False]
    assert s.counts[0].tolist() == [0, 0, 0, 1, 0]


def test_out_of_span_event_rejected():
    ev = [RawEvent("bus", T0 + timedelta(hours=h), line=h + 2) for h in range(20)]
    ev.append(RawEvent("bus", T0 - timedelta(hours=1), line=99))
    log = RejectLog()
    s = aggregate_hourly(ev, (T0, T0 + timedelta(hours=19)), log)
    assert s.counts.sum() == 20
    assert log.entries[0][0] == 99


def test_out_of_span_threshold():
    ev = [RawEvent("bus", T0), RawEvent("bus", T0 + timedelta(days=3))]
    with pytest.raises(IngestError):
        aggregate_hourly(ev, (T0, T0 + timedelta(hours=3)))


def test_empty_span_is_an_error():
    with pytest.raises(SpanError):
        aggregate_hourly([], (T0 + timedelta(hours=1), T0))


@pytest.mark.parametrize(
    "slot, expected",
    [
        (datetime(2019, 1, 7, 5), (0, 0, 5)),
        (datetime(2019, 1, 13, 23), (0, 6, 23)),
        (datetime(2019, 1, 15, 0), (1, 1, 0)),
    ],
)
def test_decompose_examples(slot, expected):
    assert decompose_slot(slot, datetime(2019, 1, 7)) == expected


def test_decompose_before_span():
    with pytest.raises(SpanError):
        decompose_slot(datetime(2019, 1, 6, 23), datetime(2019, 1, 7))


def test_decompose_mid_week_start_uses_iso_week():
    # span starts on a Thursday: that week is week 0, the following Monday is week 1
    start = datetime(2019, 1, 10, 13)
    assert decompose_slot(datetime(2019, 1, 10, 13), start) == (0, 3, 13)
    assert decompose_slot(datetime(2019, 1, 14, 0), start) == (1, 0, 0)


@settings(max_examples=200, deadline=None)
@given(
    start=st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 1, 1)),
    offset=st.integers(min_value=0, max_value=24 * 7 * 60),
)
def test_decompose_recompose_roundtrip(start, offset):
    start = start.replace(minute=0, second=0, microsecond=0)
    slot = start + timedelta(hours=offset)
    m, d, h = decompose_slot(slot, start)
    assert recompose_slot(m, d, h, start) == slot
    assert 0 <= d < 7 and 0 <= h < 24 and m >= 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(list(MODE_INDEX)), st.integers(0, 3 * 24 * 3600 - 1)), max_size=60),
       st.randoms(use_true_random=False))
def test_conservation_and_permutation_invariance(raw, rnd):
    events = [RawEvent(m, T0 + timedelta(seconds=s)) for m, s in raw]
    span = (T0, T0 + timedelta(hours=71))
    a = aggregate_hourly(events, span)
    shuffled = list(events)
    rnd.shuffle(shuffled)
    b = aggregate_hourly(shuffled, span)
    assert a == b
    assert a.counts.sum() == len(events)


def test_demand_csv_roundtrip(tmp_path, series_factory):
    s = series_factory(1, weeks=2, missing_rate=0.05)
    write_demand_csv(s, tmp_path / "d.csv")
    assert read_demand_csv(tmp_path / "d.csv") == s


def test_demand_series_rejects_negative_counts():
    with pytest.raises(ValueError):
        DemandSeries(np.datetime64("2019-01-07T00", "h"), -np.ones((2, 5)), np.zeros(2, bool))


def test_ingest_sources_thread_count_independent(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for k, mode in enumerate(["bus", "metro", "car"]):
        p = tmp_path / f"src{k}.csv"
        secs = np.sort(rng.integers(0, 14 * 24 * 3600, size=500))
        p.write_text("timestamp,mode\n" + "".join(
            f"{(T0 + timedelta(seconds=int(s))).isoformat(sep=' ')},{mode}\n" for s in secs))
        paths.append((p, Schema()))
    a, logs_a = ingest_sources(paths, threads=1)
    b, logs_b = ingest_sources(paths, threads=8)
    assert a == b
    assert a.counts.sum() == 1500
    assert [len(x) for x in logs_a] == [len(x) for x in logs_b] == [0, 0, 0]
