"""Scalar special functions and one-dimensional search primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .errors import BracketError, DomainError

# beyond this the upper tail underflows to subnormals; snap to {0, 1}
Q_SATURATION = 38.0

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/golden ratio


def q(x: float) -> float:
    """Gaussian upper-tail probability Q(x) = P[Z > x] for standard normal Z."""
    if not math.isfinite(x):
        raise DomainError(f"q() needs a finite argument, got {x!r}")
    if x > Q_SATURATION:
        return 0.0
    if x < -Q_SATURATION:
        return 1.0
    # erfc keeps full relative precision deep into the upper tail
    return min(1.0, max(0.0, 0.5 * math.erfc(x / math.sqrt(2.0))))


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0.0):
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol!r}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter!r}")


class ScalarMax(NamedTuple):
    x: float
    fx: float
    converged: bool


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: Tolerance = Tolerance()
) -> ScalarMax:
    """Maximise a unimodal ``f`` on ``[lo, hi]`` by golden-section search.

    The bracket shrinks by the inverse golden ratio per step until its width
    is at most ``tol.abs_tol``; the midpoint of the final bracket is returned.
    If ``tol.max_iter`` runs out first the best point so far comes back with
    ``converged=False``.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo!r}, {hi!r}]")
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol.abs_tol:
        if it >= tol.max_iter:
            x, fx = (x1, f1) if f1 >= f2 else (x2, f2)
            return ScalarMax(x, fx, False)
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        it += 1
    x = 0.5 * (a + b)
    return ScalarMax(x, f(x), True)


def bisect_monotone(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: Tolerance = Tolerance(),
    keep: str = "mid",
) -> float:
    """Locate ``x`` in ``[lo, hi]`` with ``f(x) = target`` for monotone ``f``.

    ``keep`` picks which end of the final bracket to return: ``"mid"`` for
    the midpoint, ``"lo"``/``"hi"`` to stay on a known side of the root
    (useful when one side is the feasible one).
    """
    if keep not in ("mid", "lo", "hi"):
        raise DomainError(f"keep must be 'mid', 'lo' or 'hi', got {keep!r}")
    glo = f(lo) - target
    ghi = f(hi) - target
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if (glo > 0.0) == (ghi > 0.0):
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: f-target = {glo:.6g}, {ghi:.6g}"
        )
    a, b = lo, hi
    for _ in range(tol.max_iter):
        if b - a <= tol.abs_tol:
            break
        m = 0.5 * (a + b)
        if m <= a or m >= b:  # bracket at float resolution
            break
        gm = f(m) - target
        if gm == 0.0:
            return m
        if (gm > 0.0) == (glo > 0.0):
            a, glo = m, gm
        else:
            b = m
    if keep == "lo":
        return a
    if keep == "hi":
        return b
    return 0.5 * (a + b)
