import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iscc.comm import (Device, DeviceTask, Link, Scenario, ScenarioParams, computation_delay,
                       data_rate, generate_scenario, pathloss_db, task_delay, transmission_delay)
from iscc.errors import DomainError, InfiniteDelay


def _link_for_snr(snr_db, bandwidth=4e6):
    noise_dbm = -174.0 + 10 * math.log10(bandwidth)
    return Link(bandwidth, noise_dbm + snr_db, -174.0, 0.0, 1.0)


def test_rate_at_unit_snr():
    assert data_rate(_link_for_snr(0.0)) == pytest.approx(4e6, rel=1e-12)


def test_rate_without_fading_gain():
    assert data_rate(Link(fading_gain=0.0, pathloss_db=100.0)) == 0.0


def test_link_budget_example():
    pl = pathloss_db(0.3)
    assert pl == pytest.approx(108.44, abs=5e-3)
    link = Link(4e6, 24.0, -174.0, pl, 1.0)
    assert 10 * math.log10(link.snr()) == pytest.approx(23.54, abs=5e-3)
    assert data_rate(link) == pytest.approx(3.13e7, rel=2e-3)


@given(g1=st.floats(1e-6, 10), ratio=st.floats(1.001, 100))
def test_rate_increases_with_fading(g1, ratio):
    a = Link(pathloss_db=110.0, fading_gain=g1)
    b = Link(pathloss_db=110.0, fading_gain=g1 * ratio)
    assert data_rate(b) > data_rate(a)


@given(b1=st.floats(1e5, 1e8), ratio=st.floats(1.001, 10), snr_db=st.floats(-10, 40))
def test_rate_grows_with_bandwidth_at_fixed_snr(b1, ratio, snr_db):
    r1 = data_rate(_link_for_snr(snr_db, b1))
    r2 = data_rate(_link_for_snr(snr_db, b1 * ratio))
    assert r2 == pytest.approx(r1 * ratio, rel=1e-9)
    assert r2 > r1


def test_link_validation():
    with pytest.raises(DomainError):
        Link(bandwidth_hz=0.0)
    with pytest.raises(DomainError):
        Link(fading_gain=-1.0)
    with pytest.raises(DomainError):
        DeviceTask(0.0, 500, 0.4)


def test_task_delay_example():
    t = DeviceTask(1e6, 500, 0.4)
    assert task_delay(t, 0.5, 2.5e9, 1e7) == pytest.approx(0.4, rel=1e-15)
    assert transmission_delay(t, 0.5, 1e7) == pytest.approx(0.2, rel=1e-15)
    assert computation_delay(t, 2.5e9) == pytest.approx(0.2, rel=1e-15)


def test_task_delay_vanishes_with_tiny_task():
    assert task_delay(DeviceTask(1e-30, 500, 0.4), 0.5, 2.5e9, 1e7) < 1e-35


@given(v=st.floats(1e3, 1e7), c=st.floats(10, 2000), tau=st.floats(1e-3, 1),
       f=st.floats(1e6, 1e11), r=st.floats(1e5, 1e9))
def test_task_delay_homogeneity_and_additivity(v, c, tau, f, r):
    t = DeviceTask(v, c, 0.4)
    d = task_delay(t, tau, f, r)
    assert d == pytest.approx(transmission_delay(t, tau, r) + computation_delay(t, f), rel=1e-15)
    assert task_delay(t, tau, 2 * f, 2 * r) == pytest.approx(d / 2, rel=1e-12)


@pytest.mark.parametrize("tau, f, r", [(0.0, 1e9, 1e7), (0.5, 0.0, 1e7), (0.5, 1e9, 0.0)])
def test_zero_allocation_is_infinite_delay(tau, f, r):
    with pytest.raises(InfiniteDelay):
        task_delay(DeviceTask(1e6, 500, 0.4), tau, f, r)


def test_scenario_is_reproducible():
    a = generate_scenario(15, seed=42)
    b = generate_scenario(15, seed=42)
    assert a == b
    assert a != generate_scenario(15, seed=43)


def test_default_scenario_structure():
    s = generate_scenario(15, 0.3, seed=1)
    v, c, t, r = s.arrays()
    assert s.n == 15 and s.f_edge_hz == ScenarioParams().f_edge_hz
    assert np.all(np.isfinite(r)) and np.all(r > 0)
    assert np.all((v >= 0.3e6) & (v <= 1e6))
    assert np.all((c >= 400) & (c <= 1000))
    assert np.all(t == 0.4)
    for d in s.devices:
        assert d.link.pathloss_db >= pathloss_db(0.001)
        assert d.link.pathloss_db <= pathloss_db(0.3) + 1e-9


def test_smaller_scenarios_are_prefixes():
    big = generate_scenario(10, seed=3)
    assert generate_scenario(4, seed=3).devices == big.devices[:4]


def test_task_size_mean():
    v = np.concatenate([generate_scenario(1, seed=k).arrays()[0] for k in range(10_000)])
    se = v.std(ddof=1) / math.sqrt(len(v))
    assert abs(v.mean() - 0.65e6) <= 3 * se


def test_placement_is_uniform_over_disc():
    d = np.array([10 ** ((generate_scenario(1, seed=k).devices[0].link.pathloss_db - 128.1) / 37.6)
                  for k in range(4000)])
    # radius of a uniform point in a disc has P(d <= x) = (x / R)^2
    assert np.mean(d <= 0.15) == pytest.approx(0.25, abs=0.03)


def test_scenario_json_round_trip(tmp_path):
    s = generate_scenario(5, seed=7)
    s.save(tmp_path / "s.json")
    assert Scenario.load(tmp_path / "s.json") == s
    first = (tmp_path / "s.json").read_bytes()
    Scenario.load(tmp_path / "s.json").save(tmp_path / "t.json")
    assert (tmp_path / "t.json").read_bytes() == first


def test_scenario_loader_validates(tmp_path):
    doc = generate_scenario(2, seed=7).to_dict()
    doc["devices"][0]["rate"] *= 1.5
    with pytest.raises(DomainError):
        Scenario.from_dict(doc)
    doc = generate_scenario(2, seed=7).to_dict()
    doc["devices"][1]["task"]["t_max"] = -1
    with pytest.raises(DomainError):
        Scenario.from_dict(json.loads(json.dumps(doc)))
    with pytest.raises(DomainError):
        Scenario((), 1e9)


def test_rate_only_devices_round_trip():
    s = Scenario((Device(DeviceTask(1e6, 500, 0.4), None, 1e7),), 4e9, 0)
    assert Scenario.from_dict(s.to_dict()) == s
