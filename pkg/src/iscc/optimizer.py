"""Joint choice of sampling rate, threshold and resource split.

For each candidate sampling rate the device tasks get the least CPU that
meets their deadlines, the remainder goes to sensing, and the threshold is
chosen for that remainder. The outer search over sampling rates is either
exhaustive or, in the low-complexity variant, a binary search for the
fastest feasible rate. Benchmark schemes fix some of these choices.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import kernels
from .allocation import (CommBudget, DeviceAllocation, allocate, device_compute_total,
                         fs_upper_bound)
from .comm import Scenario
from .errors import BoundError, ConfigError, InfeasibleError
from .sensing import (AlphaModel, ClassSet, SensingParams, class_arrays, cnn_accuracy,
                      cnn_delay_coef)
from .threshold import DEFAULT_SEGMENTS, DEFAULT_TOL_REL, MAX_ITER, select_threshold

SCHEMES = ("proposed", "low_complexity", "conventional", "avg_compute", "avg_comm", "fixed_threshold")


@dataclass(frozen=True)
class AllocationPlan:
    f_s: Optional[int]
    eta: Optional[float]
    f_sense: Optional[float]
    device_alloc: Optional[DeviceAllocation]
    accuracy: float
    sensing_delay: Optional[float]
    feasible: bool
    scheme: str
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "f_s": self.f_s,
            "eta": self.eta,
            "f_sense": self.f_sense,
            "device_alloc": self.device_alloc.to_dict() if self.device_alloc else None,
            "accuracy": self.accuracy,
            "sensing_delay": self.sensing_delay,
            "feasible": self.feasible,
            "scheme": self.scheme,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationPlan":
        d = dict(d)
        if d.get("device_alloc") is not None:
            d["device_alloc"] = DeviceAllocation.from_dict(d["device_alloc"])
        return cls(**d)


def infeasible_plan(cs: ClassSet, scheme: str, reason: str = "", f_s: Optional[int] = None) -> AllocationPlan:
    """Random-guess floor reported when nothing meets the constraints."""
    return AllocationPlan(f_s, None, None, None, 1.0 / len(cs), None, False, scheme, reason)


def parse_scheme(label: str) -> tuple[str, Optional[float]]:
    """Split ``"fixed_threshold:0.4"`` / ``"fixed_threshold(0.4)"`` into name and ratio."""
    m = re.fullmatch(r"fixed_threshold(?:[:(]\s*([0-9.eE+-]+)\s*\)?)?", label.strip())
    if m:
        if m.group(1) is None:
            raise ConfigError("fixed_threshold needs a ratio, e.g. 'fixed_threshold:0.5'")
        ratio = float(m.group(1))
        if not 0.0 <= ratio <= 1.0:
            raise ConfigError(f"threshold ratio must lie in [0, 1], got {ratio!r}")
        return "fixed_threshold", ratio
    if label in SCHEMES:
        return label, None
    raise ConfigError(f"unknown scheme {label!r}; expected one of {', '.join(SCHEMES)}")


# --- grid evaluation --------------------------------------------------------------


@dataclass
class _Grid:
    """Per-rate outcome of one scheme over a vector of sampling rates."""

    fs: np.ndarray
    f_sense: np.ndarray
    feasible: np.ndarray
    accuracy: np.ndarray
    eta: np.ndarray
    delay: np.ndarray

    def best(self) -> Optional[int]:
        if not self.feasible.any():
            return None
        acc = np.where(self.feasible, self.accuracy, -np.inf)
        return int(np.argmax(acc))  # first maximum, i.e. the smallest rate


def _empty_grid(fs, f_sense):
    n = len(fs)
    return _Grid(fs, f_sense, np.zeros(n, bool), np.full(n, np.nan), np.full(n, np.nan),
                 np.full(n, np.nan))


def _select_grid(cs, sp, am, fs, f_sense, m_segments, tol_rel):
    fs = np.asarray(fs, dtype=float)
    f_sense = np.broadcast_to(np.asarray(f_sense, dtype=float), fs.shape).copy()
    g = _empty_grid(fs, f_sense)
    ok = np.isfinite(f_sense) & (f_sense > 0)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return g
    mu, sig = class_arrays(cs, sp, fs[idx])
    alpha = np.atleast_1d(cnn_accuracy(am, fs[idx]))
    coef = sp.c_s * sp.k_sub * sp.t_win * fs[idx] / f_sense[idx]
    status, eta, _, _, acc, delay = kernels.select_many(
        mu, sig, cs.priors, alpha, coef, sp.t_sense_max, m_segments, tol_rel, MAX_ITER)
    good = status == kernels.OK
    g.feasible[idx] = good
    g.accuracy[idx] = acc
    g.eta[idx] = eta
    g.delay[idx] = delay
    return g


def _fixed_eta_grid(cs, sp, am, fs, f_sense, ratio):
    fs = np.asarray(fs, dtype=float)
    f_sense = np.broadcast_to(np.asarray(f_sense, dtype=float), fs.shape).copy()
    g = _empty_grid(fs, f_sense)
    ok = np.isfinite(f_sense) & (f_sense > 0)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return g
    mu, sig = class_arrays(cs, sp, fs[idx])
    alpha = np.atleast_1d(cnn_accuracy(am, fs[idx]))
    coef = sp.c_s * sp.k_sub * sp.t_win * fs[idx] / f_sense[idx]
    p = cs.priors
    for j, k in enumerate(idx):
        eta = ratio * float(mu[j, 1:].min())
        delay = kernels.pass_prob(eta, mu[j], sig[j], p) * coef[j]
        g.eta[k] = eta
        g.delay[k] = delay
        g.accuracy[k] = kernels.accuracy(eta, mu[j], sig[j], p, float(alpha[j]))
        g.feasible[k] = delay <= sp.t_sense_max
    return g


def _rate_grid(s: Scenario, sp: SensingParams, step: int):
    if step < 1:
        raise ConfigError(f"step must be >= 1, got {step!r}")
    try:
        f_u = fs_upper_bound(s, sp.tau_s)
    except BoundError as exc:
        return None, str(exc)
    if f_u < step:
        return None, f"sampling-rate bound {f_u} Hz below the first candidate"
    return np.arange(step, f_u + 1, step, dtype=float), ""


def _sensing_cpu(s: Scenario, sp: SensingParams, fs):
    return s.f_edge_hz - device_compute_total(s, sp.tau_s * np.asarray(fs, dtype=float))


def _plan_from_grid(s, sp, cs, g: _Grid, scheme: str, alloc_fn, reason="no feasible sampling rate"):
    k = g.best()
    if k is None:
        return infeasible_plan(cs, scheme, reason)
    f_s = int(g.fs[k])
    return AllocationPlan(f_s, float(g.eta[k]), float(g.f_sense[k]), alloc_fn(f_s),
                          float(g.accuracy[k]), float(g.delay[k]), True, scheme)


def _theorem_alloc(s, sp):
    return lambda f_s: allocate(s, CommBudget.for_rate(sp.tau_s, f_s))


# --- public solvers ---------------------------------------------------------------------


def evaluate_fixed_fs(s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel, f_s: int,
                      m_segments: int = DEFAULT_SEGMENTS, scheme: str = "proposed",
                      tol_rel: float = DEFAULT_TOL_REL) -> AllocationPlan:
    """Best plan at one sampling rate; infeasibility is reported in the plan."""
    if f_s < 1:
        raise ConfigError(f"sampling rate must be a positive integer, got {f_s!r}")
    frac = sp.tau_s * f_s
    if frac >= 1.0:
        return infeasible_plan(cs, scheme, "sensing airtime exceeds the frame", f_s)
    budget = CommBudget(frac)
    try:
        alloc = allocate(s, budget)
    except InfeasibleError as exc:
        return infeasible_plan(cs, scheme, str(exc), f_s)
    f_sense = s.f_edge_hz - alloc.total_compute
    if not f_sense > 0:
        return infeasible_plan(cs, scheme, f"computation infeasible (deficit {-f_sense:.6g} Hz)", f_s)
    try:
        sol = select_threshold(cs, sp, am, f_s, f_sense, m_segments, tol_rel)
    except InfeasibleError as exc:
        return infeasible_plan(cs, scheme, str(exc), f_s)
    return AllocationPlan(int(f_s), sol.eta_star, f_sense, alloc, sol.accuracy, sol.delay, True, scheme)


def solve_exhaustive(s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel, step: int = 1,
                     m_segments: int = DEFAULT_SEGMENTS, tol_rel: float = DEFAULT_TOL_REL,
                     scheme: str = "proposed") -> AllocationPlan:
    """Scan ``step, 2*step, ...`` up to the sampling-rate bound; keep the most accurate."""
    fs, reason = _rate_grid(s, sp, step)
    if fs is None:
        return infeasible_plan(cs, scheme, reason)
    g = _select_grid(cs, sp, am, fs, _sensing_cpu(s, sp, fs), m_segments, tol_rel)
    return _plan_from_grid(s, sp, cs, g, scheme, _theorem_alloc(s, sp))


def fs_feasible(s: Scenario, sp: SensingParams, cs: ClassSet, f_s: int) -> bool:
    """Whether some threshold meets every constraint at this sampling rate."""
    frac = sp.tau_s * f_s
    if frac >= 1.0:
        return False
    f_sense = float(_sensing_cpu(s, sp, f_s))
    if not f_sense > 0:
        return False
    mu, sig = class_arrays(cs, sp, f_s)
    floor = kernels.pass_prob(float(mu[1:].min()), mu, sig, cs.priors)
    return floor * cnn_delay_coef(sp, f_s, f_sense) <= sp.t_sense_max


def solve_low_complexity(s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel,
                         tol_rel: float = DEFAULT_TOL_REL) -> AllocationPlan:
    """Binary-search the fastest feasible sampling rate, then one-piece threshold search."""
    scheme = "low_complexity"
    try:
        f_u = fs_upper_bound(s, sp.tau_s)
    except BoundError as exc:
        return infeasible_plan(cs, scheme, str(exc))
    if f_u < 1 or not fs_feasible(s, sp, cs, 1):
        return infeasible_plan(cs, scheme, "no feasible sampling rate")
    lo, hi = 1, f_u
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fs_feasible(s, sp, cs, mid):
            lo = mid
        else:
            hi = mid - 1
    return evaluate_fixed_fs(s, sp, cs, am, lo, m_segments=1, scheme=scheme, tol_rel=tol_rel)


def _avg_compute(s, sp, cs, am, step, m_segments, tol_rel, scheme, fs=None):
    v, c, t, r = s.arrays()
    share = s.f_edge_hz / (s.n + 1)
    slack = t - v * c / share
    if np.any(slack <= 0):
        return infeasible_plan(cs, scheme, "equal CPU share misses a device deadline")
    tau = v / (r * slack)
    left = 1.0 - math.fsum(tau)
    f_max = math.floor(left / sp.tau_s) if left > 0 else 0
    if f_max >= 1 and left - sp.tau_s * f_max <= 0:  # airtime must not be overcommitted
        f_max -= 1
    grid = np.arange(step, f_max + 1, step, dtype=float) if fs is None else np.array(
        [fs] if fs <= f_max else [], dtype=float)
    if grid.size == 0:
        return infeasible_plan(cs, scheme, "no airtime left for sensing")
    g = _select_grid(cs, sp, am, grid, share, m_segments, tol_rel)
    alloc = DeviceAllocation(tuple(tau.tolist()), (share,) * s.n, math.nan)
    return _plan_from_grid(s, sp, cs, g, scheme, lambda f_s: alloc)


def _avg_comm(s, sp, cs, am, m_segments, tol_rel, scheme, fs=None):
    v, c, t, r = s.arrays()
    tau = 1.0 / (s.n + 1)
    f_s = math.floor(1.0 / ((s.n + 1) * sp.tau_s)) if fs is None else int(fs)
    if f_s < 1 or sp.tau_s * f_s > tau * (1 + 1e-12):
        return infeasible_plan(cs, scheme, "equal airtime share leaves no sensing slot", f_s)
    slack = t - v / (tau * r)
    if np.any(slack <= 0):
        return infeasible_plan(cs, scheme, "equal airtime share misses a device deadline", f_s)
    f_n = v * c / slack
    f_sense = s.f_edge_hz - math.fsum(f_n)
    if not f_sense > 0:
        return infeasible_plan(cs, scheme, "no CPU left for sensing", f_s)
    try:
        sol = select_threshold(cs, sp, am, f_s, f_sense, m_segments, tol_rel)
    except InfeasibleError as exc:
        return infeasible_plan(cs, scheme, str(exc), f_s)
    alloc = DeviceAllocation((tau,) * s.n, tuple(f_n.tolist()), math.nan)
    return AllocationPlan(f_s, sol.eta_star, f_sense, alloc, sol.accuracy, sol.delay, True, scheme)


def _fixed_ratio(s, sp, cs, am, ratio, step, scheme, fs=None):
    if fs is None:
        grid, reason = _rate_grid(s, sp, step)
        if grid is None:
            return infeasible_plan(cs, scheme, reason)
    else:
        grid = np.array([fs], dtype=float)
        if sp.tau_s * fs >= 1.0:
            return infeasible_plan(cs, scheme, "sensing airtime exceeds the frame", int(fs))
    g = _fixed_eta_grid(cs, sp, am, grid, _sensing_cpu(s, sp, grid), ratio)
    return _plan_from_grid(s, sp, cs, g, scheme, _theorem_alloc(s, sp))


def run_benchmark(scheme: str, s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel,
                  step: int = 1, m_segments: int = DEFAULT_SEGMENTS,
                  tol_rel: float = DEFAULT_TOL_REL) -> AllocationPlan:
    """Comparison schemes.

    ``conventional`` never gates (threshold 0); ``avg_compute`` splits the
    edge CPU evenly over devices and sensing; ``avg_comm`` splits airtime
    evenly, which also fixes the sampling rate; ``fixed_threshold:<r>`` pins
    the threshold at ``r`` times its upper limit. Everything not fixed by
    the scheme is optimised as in the proposed solver.
    """
    name, ratio = parse_scheme(scheme)
    if name == "conventional":
        return _fixed_ratio(s, sp, cs, am, 0.0, step, scheme)
    if name == "fixed_threshold":
        return _fixed_ratio(s, sp, cs, am, ratio, step, scheme)
    if name == "avg_compute":
        return _avg_compute(s, sp, cs, am, step, m_segments, tol_rel, scheme)
    if name == "avg_comm":
        return _avg_comm(s, sp, cs, am, m_segments, tol_rel, scheme)
    raise ConfigError(f"{scheme!r} is not a benchmark scheme")


def solve(scheme: str, s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel, step: int = 1,
          m_segments: int = DEFAULT_SEGMENTS, tol_rel: float = DEFAULT_TOL_REL) -> AllocationPlan:
    """Dispatch any scheme label, including the proposed solvers."""
    name, _ = parse_scheme(scheme)
    if name == "proposed":
        return solve_exhaustive(s, sp, cs, am, step, m_segments, tol_rel)
    if name == "low_complexity":
        return solve_low_complexity(s, sp, cs, am, tol_rel)
    return run_benchmark(scheme, s, sp, cs, am, step, m_segments, tol_rel)


def solve_at_fs(scheme: str, s: Scenario, sp: SensingParams, cs: ClassSet, am: AlphaModel, f_s: int,
                m_segments: int = DEFAULT_SEGMENTS, tol_rel: float = DEFAULT_TOL_REL) -> AllocationPlan:
    """Any scheme with the sampling rate pinned to ``f_s``."""
    name, ratio = parse_scheme(scheme)
    if name == "proposed":
        return evaluate_fixed_fs(s, sp, cs, am, f_s, m_segments, scheme, tol_rel)
    if name == "low_complexity":
        return evaluate_fixed_fs(s, sp, cs, am, f_s, 1, scheme, tol_rel)
    if name in ("conventional", "fixed_threshold"):
        return _fixed_ratio(s, sp, cs, am, ratio or 0.0, 1, scheme, fs=f_s)
    if name == "avg_compute":
        return _avg_compute(s, sp, cs, am, 1, m_segments, tol_rel, scheme, fs=f_s)
    return _avg_comm(s, sp, cs, am, m_segments, tol_rel, scheme, fs=f_s)


# --- gain realisation ---------------------------------------------------------------


def min_sensing_compute(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float, target: float,
                        gated: bool = True, rel_tol: float = 1e-10) -> float:
    """Least sensing CPU that reaches ``target`` accuracy within the delay budget.

    Found by bisection (in log space) on the CPU; ``gated=False`` pins the
    threshold at zero, i.e. every window goes through the CNN.
    """

    def reaches(f):
        if gated:
            try:
                return select_threshold(cs, sp, am, f_s, f).accuracy >= target - 1e-12
            except InfeasibleError:
                return False
        mu, sig = class_arrays(cs, sp, f_s)
        p = cs.priors
        acc = kernels.accuracy(0.0, mu, sig, p, cnn_accuracy(am, f_s))
        delay = kernels.pass_prob(0.0, mu, sig, p) * cnn_delay_coef(sp, f_s, f)
        return acc >= target - 1e-12 and delay <= sp.t_sense_max

    hi = sp.c_s * sp.k_sub * sp.t_win * f_s / sp.t_sense_max * 1.001
    if not reaches(hi):
        raise InfeasibleError("accuracy", target, f"target {target!r} unreachable at f_s={f_s!r}")
    lo = hi * 1e-9
    if reaches(lo):
        return lo
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    return hi
