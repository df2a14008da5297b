"""
Felles fixtures for PM-QCC-testene.

Kjør: pytest tests/ -v          (fra backend/)
Raske tester: pytest tests/ -m "not slow"
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import pytest

from app.core.dataset import load_dataset
from app.models.config import reset_settings
from app.models.schemas import PartySource, ProtocolConfig, StarChannel


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo og optimering (sekunder til minutter)")


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    """Innstillinger leses på nytt i hver test, uten lekkasje fra miljøet."""
    for var in ("PMQCC_THREADS", "PMQCC_LOG_LEVEL", "PMQCC_DATASET"):
        monkeypatch.delenv(var, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture(scope="session")
def dataset():
    return load_dataset()


@pytest.fixture(scope="session")
def records(dataset):
    return {r.name: r for r in dataset.records}


@pytest.fixture(scope="session")
def record_25(records):
    return records["{25,25,25}"]


@pytest.fixture
def sources_25(record_25):
    return record_25.sources


@pytest.fixture
def channel_25(record_25, dataset):
    """Publiserte transmittanser; eta_A inkluderer Alices splitter."""
    return record_25.channel(dataset.constants)


@pytest.fixture
def simple_source():
    return PartySource(mu=0.1, nu=0.05, omega=0.002, p_mu=0.8, p_nu=0.1, p_omega=0.1)


@pytest.fixture
def ideal_channel():
    """Ingen tap, ingen mørketellinger, ingen feiljustering."""
    return StarChannel(eta_A=1.0, eta_B=1.0, eta_C=1.0, eta_d=1.0, p_d=0.0, e_d=0.0, D=16)


@pytest.fixture
def config_1e13():
    return ProtocolConfig(N=10**13, f=1.06, epsilon=1e-10)
