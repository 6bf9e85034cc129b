import pytest

from model import model_rule
from presets import get_preset


@pytest.fixture
def m1():
    return get_preset("M1")


@pytest.fixture
def m3():
    return get_preset("M3")


@pytest.fixture
def mf():
    return get_preset("MF")


@pytest.fixture
def mr():
    return get_preset("MR")


@pytest.fixture
def small_rule():
    """Rule small enough for the dense two-photon truncation."""
    def _rule(model, panels=4, order=6):
        return model_rule(model, panels, order)
    return _rule
