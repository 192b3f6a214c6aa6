import time
import warnings

import pytest

from lubrex.constants import universal_constants
from lubrex.errors import ValidityWarning
from lubrex.fields import BoundaryData, EvalContext
from lubrex.geometry import moments, parse_shape


# wall-clock seconds of the session-scoped table builds
BUILD_SECONDS = {}


def _timed(name, fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    BUILD_SECONDS[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def exact_tables():
    return _timed("exact", universal_constants, 10, "exact")


@pytest.fixture(scope="session")
def float_tables():
    return _timed("float", universal_constants, 25, "float")


@pytest.fixture(scope="session")
def sine02():
    return parse_shape("sine:a=0.2")


@pytest.fixture(scope="session")
def sine001():
    return parse_shape("sine:a=0.01")


@pytest.fixture(scope="session")
def const1():
    return parse_shape("const:c=1")


@pytest.fixture(scope="session")
def boundary():
    return BoundaryData()


@pytest.fixture(scope="session")
def ctx02(sine02):
    """Expansion context to order 2k = 10 on the a = 1/5 sine shape."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return EvalContext(sine02, 5, eps=0.1)


@pytest.fixture(scope="session")
def mom02(sine02):
    return moments(sine02, 10)


@pytest.fixture(scope="session")
def build_seconds():
    return BUILD_SECONDS
