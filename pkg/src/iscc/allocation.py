"""Minimum-compute allocation of uplink time and edge CPU to device tasks.

For a fixed sensing share of airtime the device subproblem is convex and
its KKT system has a closed form: every task finishes exactly at its
deadline, the airtime budget is used up, and each device's CPU share is its
airtime share times ``sqrt(mu * R_n * C_n)`` for a single multiplier ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comm import Scenario
from .errors import BoundError, DomainError, InfeasibleError


@dataclass(frozen=True)
class CommBudget:
    sensing_fraction: float  # airtime taken by sensing, tau_s * F_s

    def __post_init__(self):
        if not 0.0 <= self.sensing_fraction < 1.0:
            raise DomainError(f"sensing fraction must lie in [0, 1), got {self.sensing_fraction!r}")

    @classmethod
    def for_rate(cls, tau_s: float, f_s: float) -> "CommBudget":
        return cls(tau_s * f_s)


@dataclass(frozen=True)
class DeviceAllocation:
    tau_c: tuple[float, ...]
    f_n: tuple[float, ...]
    mu_star: float

    @property
    def total_compute(self) -> float:
        return math.fsum(self.f_n)

    def to_dict(self) -> dict:
        mu = None if math.isnan(self.mu_star) else self.mu_star  # keep the JSON strict
        return {"tau_c": list(self.tau_c), "f_n": list(self.f_n), "mu_star": mu}

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceAllocation":
        mu = d.get("mu_star")
        return cls(tuple(d["tau_c"]), tuple(d["f_n"]), math.nan if mu is None else float(mu))


def comm_margin(s: Scenario, budget: CommBudget) -> float:
    """Airtime left once sensing and the bare upload times are paid for."""
    v, _, t, r = s.arrays()
    return 1.0 - budget.sensing_fraction - math.fsum(v / (t * r))


def comm_feasible(s: Scenario, budget: CommBudget) -> bool:
    return comm_margin(s, budget) > 0.0


def allocate(s: Scenario, budget: CommBudget) -> DeviceAllocation:
    """Closed-form minimiser of total device compute.

    The printed multiplier expression is the square root of the multiplier
    that appears in the allocation formulas; squaring it is what makes the
    airtime constraint tight.
    """
    margin = comm_margin(s, budget)
    if not margin > 0.0:
        raise InfeasibleError("communication", -margin)
    v, c, t, r = s.arrays()
    load = v / t
    sqrt_mu = math.fsum(load * np.sqrt(c / r)) / margin
    mu = sqrt_mu**2
    tau = load * (1.0 / r + np.sqrt(c / r) / sqrt_mu)
    f = load * (c + sqrt_mu * np.sqrt(c / r))
    return DeviceAllocation(tuple(tau.tolist()), tuple(f.tolist()), mu)


def device_compute_total(s: Scenario, sensing_fraction) -> np.ndarray:
    """Total CPU the optimal allocation hands to devices, vectorised over budgets.

    Entries where the airtime budget is exhausted come back as ``inf``.
    """
    v, c, t, r = s.arrays()
    load = v / t
    base = math.fsum(load * c)
    spread = math.fsum(load * np.sqrt(c / r))
    margin = 1.0 - np.asarray(sensing_fraction, dtype=float) - math.fsum(load / r)
    with np.errstate(divide="ignore"):
        return np.where(margin > 0.0, base + spread**2 / np.where(margin > 0, margin, 1.0), np.inf)


def fs_upper_bound(s: Scenario, tau_s: float, rate_pick: str = "max") -> int:
    """Largest sampling rate at which the device tasks can still be served.

    Assumes every device is as light as the lightest task and has the best
    channel, and hands it the whole edge CPU split evenly; no real allocation
    can need less airtime, so no feasible plan runs faster than the bound.
    ``rate_pick="min"`` reproduces the printed formula, which uses the worst
    channel and is not a valid bound when rates differ.
    """
    if tau_s <= 0:
        raise DomainError(f"tau_s must be positive, got {tau_s!r}")
    if rate_pick not in ("max", "min"):
        raise DomainError(f"rate_pick must be 'max' or 'min', got {rate_pick!r}")
    v, c, t, r = s.arrays()
    n = s.n
    fe = s.f_edge_hz
    denom = t.max() * fe - n * v.min() * c.min()
    if not denom > 0:
        raise BoundError(f"edge CPU {fe:.6g} Hz cannot serve {n} tasks within their deadlines")
    rate = r.max() if rate_pick == "max" else r.min()
    share = n * v.min() * fe / rate / denom
    return max(0, math.floor((1.0 - share) / tau_s))


# --- validation oracle ----------------------------------------------------------


def _min_compute_for(v, c, t, r, tau):
    """CPU a device needs to hit its deadline with airtime share ``tau``."""
    slack = t - v / (tau * r)
    return v * c / slack


def oracle_allocate(s: Scenario, budget: CommBudget, grid_tol: float = 1e-12) -> DeviceAllocation:
    """Numerical minimiser of total device compute, for cross-checking.

    Uses the convex per-device cost of airtime (CPU needed to still meet the
    deadline) and equalises marginal costs: an outer bisection on the common
    marginal value, an inner bisection per device for its airtime. No closed
    form is used.
    """
    margin = comm_margin(s, budget)
    if not margin > 0.0:
        raise InfeasibleError("communication", -margin)
    v, c, t, r = s.arrays()
    avail = 1.0 - budget.sensing_fraction
    tau_min = v / (t * r)

    def neg_slope(k, tau):
        # -(d/dtau) of v c / (t - v / (tau r))
        a = v[k] / r[k]
        return v[k] * c[k] * a / (tau**2 * (t[k] - a / tau) ** 2)

    def tau_at(k, nu):
        lo, hi = tau_min[k], tau_min[k] + avail
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi or hi - lo <= grid_tol * tau_min[k]:
                break
            if neg_slope(k, mid) > nu:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def used(nu):
        return math.fsum(tau_at(k, nu) for k in range(s.n))

    lo_nu, hi_nu = 1.0, 1.0
    while used(lo_nu) < avail:
        lo_nu *= 0.5
    while used(hi_nu) > avail:
        hi_nu *= 2.0
    lo_nu = min(lo_nu, hi_nu)
    for _ in range(200):
        mid = math.sqrt(lo_nu * hi_nu)
        if used(mid) > avail:
            lo_nu = mid
        else:
            hi_nu = mid
        if hi_nu / lo_nu - 1.0 <= grid_tol:
            break
    nu = hi_nu
    tau = np.array([tau_at(k, nu) for k in range(s.n)])
    f = _min_compute_for(v, c, t, r, tau)
    return DeviceAllocation(tuple(tau.tolist()), tuple(f.tolist()), nu)
