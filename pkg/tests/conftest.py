import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iscc.comm import Device, DeviceTask, Scenario

settings.register_profile(
    "repo", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def rate_device(v, c, t, r):
    """Device with a prescribed uplink rate (no link budget)."""
    return Device(DeviceTask(v, c, t), None, r)


@pytest.fixture
def one_device():
    # V=1e6 bits, C=500 cycles/bit, T=0.4 s, R=1e7 bit/s
    return Scenario((rate_device(1e6, 500, 0.4, 1e7),), 4e10, 0)


def random_small_scenario(rng, n=None, f_edge=4e10):
    n = n or int(rng.integers(1, 4))
    devs = [
        rate_device(rng.uniform(0.3e6, 1e6), rng.uniform(400, 1000), 0.4,
                    10 ** rng.uniform(7, 8))
        for _ in range(n)
    ]
    return Scenario(tuple(devs), f_edge, 0)


def direct_set(mu, sig, prior):
    """Class set whose band-power mean and spread are exactly ``mu`` and ``sig``.

    The estimation noise is made negligible and the noise energy zero, so the
    rate-independent spread carries the whole variance.
    """
    from iscc.sensing import ClassSet, ClassStats, SensingParams

    sp = SensingParams(sigma2=1e-300)
    cs = ClassSet(tuple(ClassStats(m, 0.0, s * s, p) for m, s, p in zip(mu, sig, prior)))
    return cs, sp


def const_alpha(a):
    from iscc.sensing import AlphaModel

    return AlphaModel(table=((0.0, a), (1e9, a)))
