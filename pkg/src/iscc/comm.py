"""Device tasks, uplink rates, offloading delay and random scenarios."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InfiniteDelay


@dataclass(frozen=True)
class DeviceTask:
    v_bits: float
    c_intensity: float  # CPU cycles per bit
    t_max: float  # s

    def __post_init__(self):
        for name in ("v_bits", "c_intensity", "t_max"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class Link:
    bandwidth_hz: float = 4e6
    tx_power_dbm: float = 24.0
    noise_dbm_per_hz: float = -174.0
    pathloss_db: float = 0.0
    fading_gain: float = 1.0  # Rayleigh power gain, unit mean

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth_hz!r}")
        if not self.fading_gain >= 0:
            raise DomainError(f"fading gain must be >= 0, got {self.fading_gain!r}")

    def snr(self) -> float:
        noise_dbm = self.noise_dbm_per_hz + 10.0 * math.log10(self.bandwidth_hz)
        return self.fading_gain * 10.0 ** ((self.tx_power_dbm - self.pathloss_db - noise_dbm) / 10.0)


def data_rate(link: Link) -> float:
    """Shannon rate in bit/s."""
    return link.bandwidth_hz * math.log2(1.0 + link.snr())


def pathloss_db(d_km: float) -> float:
    return 128.1 + 37.6 * math.log10(d_km)


def task_delay(t: DeviceTask, tau_c: float, f_n: float, r: float) -> float:
    """Upload plus edge-compute time for one task."""
    if tau_c <= 0 or f_n <= 0 or r <= 0:
        raise InfiniteDelay(f"zero allocation (tau_c={tau_c!r}, f_n={f_n!r}, rate={r!r})")
    return transmission_delay(t, tau_c, r) + computation_delay(t, f_n)


def transmission_delay(t: DeviceTask, tau_c: float, r: float) -> float:
    if tau_c <= 0 or r <= 0:
        raise InfiniteDelay(f"zero bandwidth share (tau_c={tau_c!r}, rate={r!r})")
    return t.v_bits / (tau_c * r)


def computation_delay(t: DeviceTask, f_n: float) -> float:
    if f_n <= 0:
        raise InfiniteDelay(f"zero compute (f_n={f_n!r})")
    return t.v_bits * t.c_intensity / f_n


@dataclass(frozen=True)
class Device:
    task: DeviceTask
    link: Optional[Link]
    rate: float

    def __post_init__(self):
        if not self.rate >= 0 or not math.isfinite(self.rate):
            raise DomainError(f"rate must be finite and >= 0, got {self.rate!r}")

    @classmethod
    def from_link(cls, task: DeviceTask, link: Link) -> "Device":
        return cls(task, link, data_rate(link))


@dataclass(frozen=True)
class Scenario:
    devices: tuple[Device, ...]
    f_edge_hz: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if not self.devices:
            raise DomainError("a scenario needs at least one device")
        if not self.f_edge_hz > 0:
            raise DomainError(f"edge compute must be positive, got {self.f_edge_hz!r}")

    @property
    def n(self) -> int:
        return len(self.devices)

    def arrays(self):
        """``(V, C, T_max, R)`` as numpy arrays."""
        v = np.array([d.task.v_bits for d in self.devices])
        c = np.array([d.task.c_intensity for d in self.devices])
        t = np.array([d.task.t_max for d in self.devices])
        r = np.array([d.rate for d in self.devices])
        return v, c, t, r

    def with_edge(self, f_edge_hz: float) -> "Scenario":
        return Scenario(self.devices, f_edge_hz, self.seed)

    def with_devices(self, n: int) -> "Scenario":
        return Scenario(self.devices[:n], self.f_edge_hz, self.seed)

    def to_dict(self) -> dict:
        return {
            "f_edge_hz": self.f_edge_hz,
            "seed": self.seed,
            "devices": [
                {"task": asdict(d.task), "link": asdict(d.link) if d.link else None, "rate": d.rate}
                for d in self.devices
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        devices = []
        for k, d in enumerate(doc["devices"]):
            task = DeviceTask(**d["task"])
            link = Link(**d["link"]) if d.get("link") else None
            rate = float(d["rate"])
            expect = data_rate(link) if link else rate
            if not math.isclose(rate, expect, rel_tol=1e-9):
                raise DomainError(f"device {k}: stored rate {rate!r} disagrees with link ({expect!r})")
            devices.append(Device(task, link, rate))
        return cls(tuple(devices), float(doc["f_edge_hz"]), int(doc.get("seed", 0)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ScenarioParams:
    radius_km: float = 0.3
    min_dist_km: float = 0.001
    bandwidth_hz: float = 4e6
    tx_power_dbm: float = 24.0
    noise_dbm_per_hz: float = -174.0
    v_range_bits: tuple[float, float] = (0.3e6, 1.0e6)
    c_range: tuple[float, float] = (400.0, 1000.0)
    t_max: float = 0.4
    f_edge_hz: float = 40e9

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioParams":
        d = dict(d)
        for k in ("v_range_bits", "c_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def generate_scenario(n_devices: int, radius_km: float = None, params: ScenarioParams = None,
                      seed: int = 0) -> Scenario:
    """Random cell with ``n_devices`` users.

    Each device draws from its own stream keyed by ``(seed, index)``, so the
    first ``k`` devices of a larger scenario equal a ``k``-device scenario
    with the same seed.
    """
    if n_devices < 1:
        raise DomainError(f"need at least one device, got {n_devices!r}")
    params = params or ScenarioParams()
    radius = params.radius_km if radius_km is None else radius_km
    devices = []
    for k in range(n_devices):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        d_km = max(radius * math.sqrt(rng.random()), params.min_dist_km)
        fading = float(rng.exponential(1.0))
        v = float(rng.uniform(*params.v_range_bits))
        c = float(rng.uniform(*params.c_range))
        link = Link(params.bandwidth_hz, params.tx_power_dbm, params.noise_dbm_per_hz,
                    pathloss_db(d_km), fading)
        devices.append(Device.from_link(DeviceTask(v, c, params.t_max), link))
    return Scenario(tuple(devices), params.f_edge_hz, seed)
