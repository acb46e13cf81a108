"""Detection-threshold choice at a fixed sampling rate and sensing CPU.

Raising the threshold lowers the chance a window reaches the CNN, so the
delay budget turns into a lower limit on the threshold. Accuracy is
maximised separately and the final threshold is the larger of the two.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from ._backend import kernels
from .errors import DomainError, InfeasibleError
from .sensing import (AlphaModel, ClassSet, SensingParams, class_arrays, cnn_accuracy,
                      cnn_delay_coef)

DEFAULT_SEGMENTS = 8
DEFAULT_TOL_REL = 1e-6
MAX_ITER = 200


@dataclass(frozen=True)
class ThresholdSolution:
    eta_star: float
    eta_T: float
    eta_A: float
    accuracy: float
    delay: float
    limited_by_delay: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _inputs(cs, sp, f_s):
    mu, sig = class_arrays(cs, sp, f_s)
    return mu, sig, cs.priors


def eta_delay_bound(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float,
                    f_sense: float) -> Optional[float]:
    """Smallest threshold whose average CNN delay fits the budget.

    ``0.0`` when even the ungated detector is fast enough; ``None`` when no
    admissible threshold is.
    """
    mu, sig, p = _inputs(cs, sp, f_s)
    coef = cnn_delay_coef(sp, f_s, f_sense)
    scale = float(mu[1:].min()) or 1.0
    status, eta = kernels.delay_bound(mu, sig, p, coef, sp.t_sense_max, 1e-13 * scale, MAX_ITER)
    return None if status != kernels.OK else eta


def eta_accuracy_max(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float,
                     m_segments: int = DEFAULT_SEGMENTS, tol_rel: float = DEFAULT_TOL_REL,
                     lo: float = 0.0) -> float:
    """Accuracy-maximising threshold in ``[lo, eta_u]`` (piecewise-chord search)."""
    if m_segments < 1:
        raise DomainError(f"m_segments must be >= 1, got {m_segments!r}")
    mu, sig, p = _inputs(cs, sp, f_s)
    scale = float(mu[1:].min()) or 1.0
    return kernels.accuracy_argmax(mu, sig, p, cnn_accuracy(am, f_s), lo, m_segments,
                                   tol_rel * scale, MAX_ITER)


def select_threshold(cs: ClassSet, sp: SensingParams, am: AlphaModel, f_s: float, f_sense: float,
                     m_segments: int = DEFAULT_SEGMENTS,
                     tol_rel: float = DEFAULT_TOL_REL) -> ThresholdSolution:
    """Best delay-feasible threshold.

    Raises :class:`InfeasibleError` (constraint ``"sensing_delay"``) when no
    admissible threshold meets the delay budget.
    """
    if m_segments < 1:
        raise DomainError(f"m_segments must be >= 1, got {m_segments!r}")
    mu, sig, p = _inputs(cs, sp, f_s)
    coef = cnn_delay_coef(sp, f_s, f_sense)
    status, eta, eta_t, eta_a, acc, delay = kernels.select(
        mu, sig, p, cnn_accuracy(am, f_s), coef, sp.t_sense_max, m_segments, tol_rel, MAX_ITER)
    if status != kernels.OK:
        floor = kernels.pass_prob(float(mu[1:].min()), mu, sig, p) * coef
        raise InfeasibleError("sensing_delay", floor - sp.t_sense_max)
    return ThresholdSolution(eta, eta_t, eta_a, acc, delay, eta_t > eta_a)
