import sys
from pathlib import Path

import pytest

from cycleval.domain import RunConfig
from cycleval.providers.sim import SimWorld, make_synthetic_dataset, sim_provider_set
from cycleval.store import FileCache

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def noiseless_world() -> SimWorld:
    return SimWorld(seed=42, dim=256, caption_noise=0.0, generation_noise=0.0, quantization_bits=16)


@pytest.fixture
def noisy_world() -> SimWorld:
    return SimWorld(seed=42, dim=256, caption_noise=0.05, generation_noise=0.05, quantization_bits=16)


@pytest.fixture
def cache(tmp_path) -> FileCache:
    return FileCache(tmp_path / "cache")


@pytest.fixture
def run_config(tmp_path):
    def make(**overrides) -> RunConfig:
        kwargs = {"seed": 42, "cache_dir": tmp_path / "cache"}
        kwargs.update(overrides)
        return RunConfig(**kwargs)

    return make


@pytest.fixture
def sim_setup(noiseless_world, tmp_path):
    """Noiseless world, its providers, and a 10-image dataset."""
    providers = sim_provider_set(noiseless_world)
    dataset = make_synthetic_dataset(noiseless_world, 10)
    config = RunConfig(seed=42, cache_dir=tmp_path / "cache")
    return noiseless_world, providers, dataset, config


def pytest_runtest_logreport(report):
    # One visible line per acceptance criterion, independent of -v.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.passed:
        status = "PASS"
    elif report.skipped:
        status = "SKIP"
    else:
        status = "FAIL"
    sys.stderr.write(f"[acceptance] {name}: {status}\n")
