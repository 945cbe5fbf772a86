import functools
import warnings

import pytest
from hypothesis import HealthCheck, settings

from biphoton.config import ScenarioConfig
from biphoton.jsa import SpanWarning, build_jsa
from biphoton.poling import apodized_duty_cycle, uniform_poling
from biphoton.scenarios import make_model
from biphoton.spectral import PumpSpectrum, build_grid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def apodized():
    return apodized_duty_cycle()


@pytest.fixture(scope="session")
def uniform():
    return uniform_poling()


@pytest.fixture(scope="session")
def model(cfg):
    """Dispersion calibrated to a 2.2 nm DFG width on the apodized crystal."""
    return make_model(cfg)


@pytest.fixture(scope="session")
def jsa_factory(apodized, uniform, model):
    @functools.lru_cache(maxsize=None)
    def make(pump_nm, span_nm=20.0, points=512, kind="apodized", phase_matching="exact"):
        poling = apodized if kind == "apodized" else uniform
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpanWarning)
            return build_jsa(PumpSpectrum(pump_nm), poling, model,
                             build_grid(1582.0, span_nm, points), phase_matching)
    return make
