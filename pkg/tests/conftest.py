"""Shared fixtures for all tests."""

from pathlib import Path

import pytest

from app.core import netgraph
from app.core.qstate import ghz_state, noisy_ghz, pure_state
from app.observability.logging import setup_logging

NETWORKS_DIR = Path(__file__).parent.parent / "data" / "networks"


@pytest.fixture(autouse=True)
def quiet_logging():
    """Warnings only, written to the stderr of the running test."""
    setup_logging("WARNING", "development")


@pytest.fixture
def networks_dir():
    return NETWORKS_DIR


@pytest.fixture
def ghz3():
    return ghz_state(2, 3)


@pytest.fixture
def reference_state():
    """0.8 GHZ(4,3) + 0.2 1/64."""
    return noisy_ghz(4, 3, 0.8)


@pytest.fixture
def triangle():
    return netgraph.triangle()


@pytest.fixture
def line3():
    return netgraph.line(3)


@pytest.fixture
def bell_and_zero():
    """|Phi+>_{01} ⊗ |0>_2, a single network state of L_3."""
    vector = [0.0] * 8
    vector[0] = vector[6] = 1.0
    return pure_state(vector, (2, 2, 2))
