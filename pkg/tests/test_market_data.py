import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigmove.market_data import (
    DataError,
    PriceSeries,
    parse_price_csv,
    validate_series,
    write_price_csv,
)


def write(tmp_path, text, name="ACME.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_minimal_file(tmp_path):
    s = parse_price_csv(write(tmp_path, "date,adj_close\n2009-01-02,100.0\n2009-01-05,105.0\n"))
    assert len(s) == 2
    assert s.ticker == "ACME"
    assert s.dates == (dt.date(2009, 1, 2), dt.date(2009, 1, 5))
    np.testing.assert_array_equal(s.closes, [100.0, 105.0])


def test_ticker_override_and_no_trailing_newline(tmp_path):
    s = parse_price_csv(write(tmp_path, "date,adj_close\n2009-01-02,1\n2009-01-05,2"), ticker="XYZ")
    assert s.ticker == "XYZ" and len(s) == 2


@pytest.mark.parametrize("body, message", [
    ("2009-01-05,100\n2009-01-02,101\n", "dates not strictly increasing at row 2"),
    ("2009-01-02,100\n2009-01-05,-3.1\n", "non-positive price at row 2"),
    ("2009-01-02,0\n2009-01-05,1\n", "non-positive price at row 1"),
    ("2009-01-02,100\n2009-01-02,101\n", "dates not strictly increasing at row 2"),
    ("2009-01-02,100\n01/05/2009,101\n", "unparsable date '01/05/2009' at row 2"),
    ("2009-01-02,100\n2009-01-05,abc\n", "unparsable number 'abc' at row 2"),
    ("2009-01-02,100\n2009-01-05,nan\n", "non-finite price at row 2"),
    ("2009-01-02,100\n", "need at least 2 data rows"),
])
def test_parse_errors_name_the_row(tmp_path, body, message):
    with pytest.raises(DataError, match=message):
        parse_price_csv(write(tmp_path, "date,adj_close\n" + body))


@pytest.mark.parametrize("header", ["date,close", "adj_close,date", "date,adj_close,volume", ""])
def test_malformed_header(tmp_path, header):
    with pytest.raises(DataError, match="header"):
        parse_price_csv(write(tmp_path, header + "\n2009-01-02,1\n2009-01-05,2\n"))


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="missing file"):
        parse_price_csv(tmp_path / "nope.csv")


def series(closes, dates=None):
    dates = dates or [dt.date(2009, 1, 1) + dt.timedelta(days=i) for i in range(len(closes))]
    return PriceSeries("T", dates, closes)


def test_validate_valid_series():
    rep = validate_series(series([1.0, 2.0]))
    assert rep.ok and rep.errors == [] and rep.row_count == 2


def test_validate_duplicate_date():
    d = dt.date(2009, 1, 2)
    rep = validate_series(series([1.0, 2.0, 3.0], [d, d + dt.timedelta(1), d + dt.timedelta(1)]))
    assert not rep.ok
    assert [e.kind for e in rep.errors] == ["duplicate_date"]


def test_validate_zero_price_references_index():
    rep = validate_series(series([1.0, 2.0, 3.0, 0.0, 5.0]))
    assert len(rep.errors) == 1
    assert rep.errors[0].row == 3
    assert "index 3" in rep.errors[0].message


def test_validate_collects_every_problem():
    d = dt.date(2009, 1, 5)
    rep = validate_series(series([1.0, -1.0, float("inf")], [d, d - dt.timedelta(1), d + dt.timedelta(3)]))
    assert {e.kind for e in rep.errors} == {"non_positive_price", "non_finite_price", "non_increasing_date"}


def test_validate_length_mismatch_and_short():
    rep = validate_series(PriceSeries("T", (dt.date(2009, 1, 2),), [1.0, 2.0]))
    assert {e.kind for e in rep.errors} == {"length_mismatch", "too_short"}


def test_series_is_immutable():
    s = series([1.0, 2.0])
    with pytest.raises(ValueError):
        s.closes[0] = 5.0


prices = st.lists(st.floats(1e-6, 1e9, allow_nan=False, allow_infinity=False), min_size=2, max_size=40)


@settings(max_examples=60, deadline=None)
@given(prices, st.lists(st.integers(1, 5), min_size=40, max_size=40))
def test_roundtrip_and_parser_validator_agree(tmp_path_factory, closes, gaps):
    days, d = [], dt.date(2000, 1, 3)
    for g in gaps[:len(closes)]:
        days.append(d)
        d += dt.timedelta(days=g)
    s = PriceSeries("RT", days, closes)
    path = tmp_path_factory.mktemp("rt") / "RT.csv"
    write_price_csv(s, path)
    back = parse_price_csv(path)
    assert back == s
    assert validate_series(back).ok
