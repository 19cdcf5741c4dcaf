from pathlib import Path

import pytest

from murmur.arith import build_factor_table
from murmur.quadforms import build_hurwitz_table
from murmur.traces import TraceContext

DATA = Path(__file__).resolve().parents[1] / "src" / "murmur" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def factor_table():
    return build_factor_table(200_000)


@pytest.fixture(scope="session")
def hurwitz_table():
    return build_hurwitz_table(100_000)


@pytest.fixture(scope="session")
def ctx(factor_table, hurwitz_table):
    return TraceContext(factor_table, hurwitz_table)
