import numpy as np
import pytest

from sr3_toolkit.linops import make_dense, make_gaussian_random
from sr3_toolkit.problems import diag_illposed
from sr3_toolkit.settings import get_settings


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch, tmp_path):
    """Each test sees default settings and writes default outputs under tmp_path"""
    for name in ('SR3_LOG_LEVEL', 'SR3_SEED', 'SR3_MAX_WORKERS'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv('SR3_OUTPUT_DIR', str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def random_operator():
    """Factory for seeded Gaussian operators scaled by 1/sqrt(m)"""
    def build(m, n, seed=0):
        gaussian = make_gaussian_random(m, n, seed)
        return make_dense(gaussian.matrix / np.sqrt(m))
    return build


@pytest.fixture
def diag_problem():
    return diag_illposed(10)
