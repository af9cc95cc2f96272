import datetime as dt

import numpy as np
import pytest

from sigmove.harness.synthetic import generate_synthetic
from sigmove.market_data import PriceSeries

PLANTED_SEED = 0
GAUSSIAN_SEED = 0


def make_series(closes, ticker="T", start=dt.date(2009, 1, 2)):
    days = tuple(start + dt.timedelta(days=i) for i in range(len(closes)))
    return PriceSeries(ticker, days, np.asarray(closes, dtype=float))


@pytest.fixture(scope="session")
def planted_5000():
    return generate_synthetic("planted", 5000, PLANTED_SEED, "PLANTED")


@pytest.fixture(scope="session")
def gaussian_10000():
    return generate_synthetic("gaussian", 10_000, GAUSSIAN_SEED, "GAUSS")


# -- acceptance summary ----------------------------------------------------------
# test_acceptance.py records one verdict per criterion; they are printed
# together at the end of the run regardless of output capturing.

ACCEPTANCE_VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_VERDICTS):
        terminalreporter.write_line(ACCEPTANCE_VERDICTS[n])
