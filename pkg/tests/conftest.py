import numpy as np
import pytest
from hypothesis import settings

from leoical.channel import build_stat_csi
from leoical.config import desk_profile
from leoical.scenario import sample_scenario

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def small_stat(seed=0, kappa=None, **overrides):
    cfg = desk_profile(**overrides)
    return build_stat_csi(sample_scenario(cfg, seed), cfg, kappa=kappa)


def random_precoder(rng, stat, power=None):
    N, Nt, K = stat.num_subcarriers, stat.num_antennas, stat.num_uts
    W = rng.standard_normal((N, Nt, K)) + 1j * rng.standard_normal((N, Nt, K))
    if power is not None:
        W *= np.sqrt(power / (np.abs(W) ** 2).sum())
    return W


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk_stat():
    return small_stat(0)
