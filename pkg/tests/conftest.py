import math

import pytest

from heisenberg_iet.bundle import build_skew_product
from heisenberg_iet.iet import IetMap, validate_iet

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def genus_example_spec():
    return validate_iet("ABC", "ABC", "BCA", ["2/5", "3/10", "3/10"])


def genus_example_skew(b=(0.7, 0.4, 0.0)):
    spec = validate_iet("ABC", "ABC", "BCA", [0.4, 0.3, 0.3])
    return build_skew_product(IetMap.from_spec(spec), [2.0, 2.0, 2.0], list(b))


def golden_map():
    return IetMap.from_spec(validate_iet("AB", "AB", "BA", [1.0 - GOLDEN, GOLDEN]))


def golden_skew(h=(1.0, 1.0), b=(0.0, 0.0)):
    return build_skew_product(golden_map(), list(h), list(b))


@pytest.fixture
def d3_spec():
    return genus_example_spec()


@pytest.fixture
def d3_skew():
    return genus_example_skew()


@pytest.fixture
def golden():
    return golden_skew()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
