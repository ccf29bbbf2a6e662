import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from src.geometry.construct import build_germ, mtilde0
from src.series.codec import write_series
from src.series.holo import HoloSeries

settings.register_profile(
    "crflat",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("crflat")


@pytest.fixture(autouse=True)
def release_crflat_handlers():
    """Drop handlers installed by setup_logger so later tests log into a clean root."""
    yield
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "crflat_owned", False)]:
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def model_germ():
    """The model germ at the reference order 12."""
    return mtilde0(12)


@pytest.fixture(scope="session")
def small_model():
    return mtilde0(8)


@pytest.fixture(scope="session")
def disk_pipeline():
    """Pipeline output for rho = z2 and seed 1 at order 12."""
    return build_germ(HoloSeries([0, 1]), HoloSeries([1]), 12)


@pytest.fixture(scope="session")
def random_pipeline():
    """Pipeline output for a fixed generic input at order 8."""
    rho = HoloSeries([0.2 - 0.1j, 0.7 + 0.2j, 0.1j, -0.05])
    seed = HoloSeries([0.4 + 0.3j, -0.5j, 0.2])
    return build_germ(rho, seed, 8)


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "mtilde0.json"
    write_series(path, mtilde0(8).F)
    return path
