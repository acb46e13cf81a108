"""Analytical model of the gated recognizer.

A band-power detector decides whether a CSI window shows motion; only windows
it flags reach the CNN stage. Per-class band power is modelled as Gaussian
with a mean and variance that shrink with the sampling rate, which gives
closed forms for miss / false-positive rates, overall accuracy, the chance a
window reaches the CNN and the resulting average compute delay.

Class index 0 of a :class:`ClassSet` is always the static state.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import DomainError, NoGainError
from .numerics import Tolerance, bisect_monotone, golden_section_max


@dataclass(frozen=True)
class ClassStats:
    lambda_i: float  # in-band signal power
    r_i: float  # noise energy in band (noise variance x bin count)
    sigma_d2_i: float  # instance-to-instance power variance
    prior_i: float

    def __post_init__(self):
        for name in ("lambda_i", "r_i", "sigma_d2_i"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be finite and >= 0, got {v!r}")
        if not 0.0 <= self.prior_i <= 1.0:
            raise DomainError(f"prior_i must lie in [0, 1], got {self.prior_i!r}")


@dataclass(frozen=True)
class ClassSet:
    classes: tuple[ClassStats, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < 2:
            raise DomainError("a class set needs the static class and at least one action")
        total = sum(c.prior_i for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"class priors must sum to 1, got {total!r}")

    @property
    def static(self) -> ClassStats:
        return self.classes[0]

    @property
    def actions(self) -> tuple[ClassStats, ...]:
        return self.classes[1:]

    @property
    def priors(self) -> np.ndarray:
        return np.array([c.prior_i for c in self.classes])

    def __len__(self):
        return len(self.classes)

    def with_static_prior(self, p_static: float) -> "ClassSet":
        """Same statistics with the static prior set to ``p_static``.

        Action priors are rescaled to keep their relative weights.
        """
        if not 0.0 <= p_static <= 1.0:
            raise DomainError(f"p_static must lie in [0, 1], got {p_static!r}")
        rest = sum(c.prior_i for c in self.actions)
        n_act = len(self.actions)
        scaled = [
            replace(c, prior_i=(1.0 - p_static) * (c.prior_i / rest if rest > 0 else 1.0 / n_act))
            for c in self.actions
        ]
        return ClassSet((replace(self.static, prior_i=p_static), *scaled))

    def to_dict(self) -> dict:
        return {"classes": [asdict(c) for c in self.classes]}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSet":
        return cls(tuple(ClassStats(**c) for c in d["classes"]))


@dataclass(frozen=True)
class SensingParams:
    t_win: float = 3.0  # window length, s
    f_lo: float = 10.0  # band edges, Hz
    f_hi: float = 20.0
    sigma2: float = 0.004  # estimation-noise variance (per quadrature)
    k_sub: int = 64
    c_s: float = 51562.5  # CPU cycles per CNN input element
    tau_s: float = 2.56e-4  # sensing slot + guard slot, s
    t_sense_max: float = 0.1  # average sensing delay budget, s

    def __post_init__(self):
        if not 0.0 < self.f_lo < self.f_hi:
            raise DomainError(f"need 0 < f_lo < f_hi, got {self.f_lo!r}, {self.f_hi!r}")
        for name in ("t_win", "sigma2", "k_sub", "c_s", "tau_s", "t_sense_max"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def band_bins(self) -> int:
        """Number of DFT bins summed into the band power."""
        lo, hi = band_bin_range(self.f_lo, self.f_hi, self.t_win)
        return hi - lo + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SensingParams":
        return cls(**d)


def band_bin_range(f_lo: float, f_hi: float, t_win: float) -> tuple[int, int]:
    # round first so 10 * 3.0000000001 does not spill into an extra bin
    lo = math.floor(round(f_lo * t_win, 9))
    hi = math.ceil(round(f_hi * t_win, 9))
    return lo, hi


@dataclass(frozen=True)
class AlphaModel:
    """CNN-stage accuracy as a function of sampling rate.

    Saturating exponential ``a_max * (1 - exp(-F / kappa))`` unless ``table``
    is given, in which case ``(F, accuracy)`` points are linearly
    interpolated (clamped at the ends).
    """

    a_max: float = 0.99
    kappa: float = 15.0
    table: Optional[tuple[tuple[float, float], ...]] = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.a_max <= 1.0:
            raise DomainError(f"a_max must lie in (0, 1], got {self.a_max!r}")
        if not self.kappa > 0.0:
            raise DomainError(f"kappa must be positive, got {self.kappa!r}")
        if self.table is not None:
            pts = tuple((float(f), float(a)) for f, a in self.table)
            fs = [p[0] for p in pts]
            acc = [p[1] for p in pts]
            if len(pts) < 2 or any(b <= a for a, b in zip(fs, fs[1:])):
                raise DomainError("alpha table needs >= 2 points with increasing rates")
            if any(b < a for a, b in zip(acc, acc[1:])) or not all(0.0 <= a <= 1.0 for a in acc):
                raise DomainError("alpha table accuracies must be non-decreasing in [0, 1]")
            object.__setattr__(self, "table", pts)

    def __call__(self, f_s):
        return cnn_accuracy(self, f_s)

    def to_dict(self) -> dict:
        d = {"a_max": self.a_max, "kappa": self.kappa}
        if self.table is not None:
            d["table"] = [list(p) for p in self.table]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AlphaModel":
        table = d.get("table")
        return cls(d.get("a_max", 0.99), d.get("kappa", 15.0),
                   tuple(tuple(p) for p in table) if table else None)


def default_class_set(p_static: float = 0.5) -> ClassSet:
    """Eight synthetic classes: static plus seven actions of rising power.

    Noise energy is matched to the default :class:`SensingParams` (``r = 2 *
    sigma2 * band_bins``) so the set can drive the CSI simulator directly.
    The static class keeps some in-band drift power just below the weakest
    action, so the detector is unreliable at low sampling rates.
    """
    sp = SensingParams()
    r = 2.0 * sp.sigma2 * sp.band_bins
    lams = (0.27, 0.30, 0.34, 0.40, 0.48, 0.60, 0.78, 1.00)
    p_act = (1.0 - p_static) / (len(lams) - 1)
    return ClassSet(tuple(
        ClassStats(lam, r, (0.01 * lam) ** 2, p_static if k == 0 else p_act)
        for k, lam in enumerate(lams)
    ))


def save_json(path, cs: ClassSet, sp: Optional[SensingParams] = None):
    doc = {"class_set": cs.to_dict()}
    if sp is not None:
        doc["sensing_params"] = sp.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_json(path) -> tuple[ClassSet, Optional[SensingParams]]:
    doc = json.loads(Path(path).read_text())
    cs = ClassSet.from_dict(doc["class_set"])
    sp = SensingParams.from_dict(doc["sensing_params"]) if "sensing_params" in doc else None
    return cs, sp


# --- per-class power statistics -------------------------------------------------


def _check_rate(f_s):
    if np.any(np.asarray(f_s) <= 0):
        raise DomainError(f"sampling rate must be positive, got {f_s!r}")


def power_stats(c: ClassStats, sp: SensingParams, f_s: float) -> tuple[float, float]:
    """Mean and standard deviation of the band power at sampling rate ``f_s``."""
    _check_rate(f_s)
    n = sp.t_win * f_s
    mu = c.lambda_i + c.r_i / n
    var = 4.0 * sp.sigma2 * c.lambda_i / n + 2.0 * sp.sigma2 * c.r_i / n**2 + c.sigma_d2_i
    return mu, math.sqrt(var)


def class_arrays(cs: ClassSet, sp: SensingParams, f_s):
    """Means and deviations for every class.

    Scalar ``f_s`` gives 1-D arrays of length ``I``; an array of rates gives
    ``(len(f_s), I)`` arrays.
    """
    _check_rate(f_s)
    f = np.asarray(f_s, dtype=float)
    lam = np.array([c.lambda_i for c in cs.classes])
    r = np.array([c.r_i for c in cs.classes])
    sd2 = np.array([c.sigma_d2_i for c in cs.classes])
    n = sp.t_win * f[..., None]
    mu = lam + r / n
    sig = np.sqrt(4.0 * sp.sigma2 * lam / n + 2.0 * sp.sigma2 * r / n**2 + sd2)
    return mu, sig


def miss_rate(c: ClassStats, sp: SensingParams, f_s: float, eta: float) -> float:
    """Chance an action window's band power stays at or below ``eta``."""
    mu, sig = power_stats(c, sp, f_s)
    return kernels.tail(mu - eta, sig)


def false_positive_rate(c: ClassStats, sp: SensingParams, f_s: float, eta: float) -> float:
    """Chance a static window's band power exceeds ``eta``."""
    mu, sig = power_stats(c, sp, f_s)
    return kernels.tail(eta - mu, sig)


def cnn_accuracy(am: AlphaModel, f_s):
    if np.any(np.asarray(f_s) < 0):
        raise DomainError(f"sampling rate must be >= 0, got {f_s!r}")
    if am.table is not None:
        fs, acc = zip(*am.table)
        out = np.interp(f_s, fs, acc)
    else:
        out = am.a_max * -np.expm1(-np.asarray(f_s, dtype=float) / am.kappa)
    return float(out) if np.ndim(out) == 0 else out


def overall_accuracy(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float, eta: float) -> float:
    if eta < 0:
        raise DomainError(f"threshold must be >= 0, got {eta!r}")
    mu, sig = class_arrays(cs, sp, f_s)
    return kernels.accuracy(eta, mu, sig, cs.priors, cnn_accuracy(am, f_s))


def cnn_pass_probability(cs: ClassSet, sp: SensingParams, f_s: float, eta: float) -> float:
    mu, sig = class_arrays(cs, sp, f_s)
    return kernels.pass_prob(eta, mu, sig, cs.priors)


def cnn_delay_coef(sp: SensingParams, f_s: float, f_sense: float) -> float:
    """Seconds the CNN takes on one window (before gating)."""
    if not f_sense > 0:
        raise DomainError(f"sensing compute must be positive, got {f_sense!r}")
    return sp.c_s * sp.k_sub * sp.t_win * f_s / f_sense


def avg_sensing_delay(cs: ClassSet, sp: SensingParams, f_s: float, eta: float, f_sense: float) -> float:
    return cnn_pass_probability(cs, sp, f_s, eta) * cnn_delay_coef(sp, f_s, f_sense)


def eta_upper(cs: ClassSet, sp: SensingParams, f_s: float) -> float:
    """Largest admissible threshold: the smallest action-class mean."""
    if len(cs.actions) == 0:
        raise DomainError("no action classes")
    mu, _ = class_arrays(cs, sp, f_s)
    return float(mu[1:].min())


# --- gain analysis ---------------------------------------------------------------


@dataclass(frozen=True)
class GainCondition:
    """Whether accuracy rises as the threshold leaves zero.

    Truthiness is ``holds``. ``margin`` is the left-hand side of the test
    (positive when it holds); ``reason`` is ``"ok"`` or names the degenerate
    input that forced a false verdict.
    """

    holds: bool
    margin: float
    reason: str = "ok"

    def __bool__(self):
        return self.holds


def gain_condition(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float) -> GainCondition:
    p1 = cs.static.prior_i
    alpha = cnn_accuracy(am, f_s)
    if p1 <= 0.0:
        return GainCondition(False, -math.inf, "no_static_prior")
    if alpha >= 1.0:
        return GainCondition(False, -math.inf, "alpha_saturated")
    mu, sig = class_arrays(cs, sp, f_s)
    if np.any(sig <= 0.0):
        return GainCondition(False, math.nan, "zero_variance")
    p = cs.priors
    # log of each subtracted term, summed with log-sum-exp to dodge overflow
    with np.errstate(divide="ignore"):
        logs = (
            np.log(p[1:] * alpha * sig[0])
            - np.log(p1 * (1.0 - alpha) * sig[1:])
            + mu[0] ** 2 / (2.0 * sig[0] ** 2)
            - mu[1:] ** 2 / (2.0 * sig[1:] ** 2)
        )
    top = logs.max()
    if top == -math.inf:
        return GainCondition(True, 1.0)
    lse = top + math.log(np.exp(logs - top).sum())
    margin = 1.0 - math.exp(lse) if lse < 700 else -math.inf
    return GainCondition(margin > 0.0, margin)


@dataclass(frozen=True)
class GainBreakdown:
    rho: float
    root_branch: Optional[float]  # static share of accuracy at the A = alpha root
    upper_branch: float  # 1 - p_cnn at the upper threshold
    eta_root: Optional[float]


def gain_breakdown(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float,
                   tol: Tolerance = Tolerance(1e-12, 200)) -> GainBreakdown:
    """Both candidate compute-saving ratios and the one that applies.

    The root branch exists when accuracy, after rising from the ungated
    value, falls back to the CNN accuracy inside ``(0, eta_u]``.
    """
    cond = gain_condition(cs, sp, am, f_s)
    if not cond:
        raise NoGainError(f"no gain regime at f_s={f_s!r} ({cond.reason}, margin {cond.margin:.6g})")
    alpha = cnn_accuracy(am, f_s)
    mu, sig = class_arrays(cs, sp, f_s)
    p = cs.priors
    eta_u = float(mu[1:].min())
    upper = 1.0 - kernels.pass_prob(eta_u, mu, sig, p)

    def excess(e):
        return kernels.accuracy(e, mu, sig, p, alpha) - alpha

    root = None
    branch = None
    if excess(eta_u) < 0.0 and eta_u > 0.0:
        peak = golden_section_max(excess, 0.0, eta_u, Tolerance(1e-9 * eta_u, 200))
        if peak.fx > 0.0:
            e = bisect_monotone(excess, 0.0, peak.x, eta_u,
                                Tolerance(max(tol.abs_tol * eta_u, 1e-300), tol.max_iter))
            # a step (zero-variance) class can jump over alpha without a root
            if abs(excess(e)) <= 1e-9:
                root = e
                pl = kernels.tail(e - mu[0], sig[0])
                branch = p[0] * (1.0 - pl) / kernels.accuracy(e, mu, sig, p, alpha)
    rho = upper if branch is None else min(branch, upper)
    return GainBreakdown(max(0.0, rho), branch, upper, root)


def performance_gain(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float) -> float:
    """Fraction of CNN compute the gate saves at equal accuracy."""
    return gain_breakdown(cs, sp, am, f_s).rho
