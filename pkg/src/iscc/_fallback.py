"""Pure-Python implementation of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; ``iscc._backend`` picks one
at import. Class arrays are ordered static class first. All functions work
at one fixed sampling rate, so ``mu``/``sig`` are the per-class power mean
and standard deviation already evaluated there.
"""

import math

import numpy as np

from .numerics import Tolerance, bisect_monotone, golden_section_max, q

OK = 0
DELAY_INFEASIBLE = 1


def tail(d, s):
    """Q(d/s), read as a hard step when ``s`` is zero."""
    if s > 0.0:
        return q(d / s)
    if d > 0.0:
        return 0.0
    if d < 0.0:
        return 1.0
    return 0.5


def accuracy(eta, mu, sig, prior, alpha):
    pl = tail(eta - mu[0], sig[0])
    acc = prior[0] * (tail(mu[0] - eta, sig[0]) + pl * alpha)
    for i in range(1, len(mu)):
        # 1 - miss rate, written as the mirrored tail to avoid cancellation
        acc += prior[i] * tail(eta - mu[i], sig[i]) * alpha
    return acc


def pass_prob(eta, mu, sig, prior):
    p = prior[0] * tail(eta - mu[0], sig[0])
    for i in range(1, len(mu)):
        p += prior[i] * tail(eta - mu[i], sig[i])
    return p


def delay_bound(mu, sig, prior, coef, t_max, tol_abs, max_iter):
    """Smallest threshold meeting the sensing delay budget.

    Returns ``(status, eta)``; status is ``DELAY_INFEASIBLE`` when even the
    upper threshold limit misses the budget.
    """
    eta_u = min(mu[1:])
    if pass_prob(0.0, mu, sig, prior) * coef <= t_max:
        return OK, 0.0
    if pass_prob(eta_u, mu, sig, prior) * coef > t_max:
        return DELAY_INFEASIBLE, math.nan
    eta = bisect_monotone(
        lambda e: pass_prob(e, mu, sig, prior) * coef,
        t_max,
        0.0,
        eta_u,
        Tolerance(tol_abs, max_iter),
        keep="hi",
    )
    return OK, eta


def accuracy_argmax(mu, sig, prior, alpha, lo, m_segments, tol_abs, max_iter):
    """Threshold in ``[lo, eta_u]`` maximising accuracy.

    Below the static-class mean the false-positive curve is replaced by its
    chord on each of ``m_segments`` equal pieces, which makes the surrogate
    concave there; above it the true accuracy is already concave. Every
    candidate (search optima and piece endpoints) is re-scored on the true
    accuracy, the winner is polished with one more golden-section pass on the
    true curve, and ties go to the larger threshold.
    """
    hi = min(mu[1:])
    if hi <= lo:
        return hi if hi > 0.0 else 0.0
    tol = Tolerance(tol_abs, max_iter)

    def acc(e):
        return accuracy(e, mu, sig, prior, alpha)

    best = [hi, acc(hi)]

    def consider(e):
        a = acc(e)
        if a > best[1] or (a == best[1] and e > best[0]):
            best[0], best[1] = e, a

    def search(f, a, b):
        if b - a <= tol_abs:
            return 0.5 * (a + b)
        return golden_section_max(f, a, b, tol).x

    consider(lo)
    split = min(mu[0], hi)
    width = 0.0
    if split > lo:
        width = (split - lo) / m_segments
        act = [(prior[i], mu[i], sig[i]) for i in range(1, len(mu))]
        p0, mu0, s0 = prior[0], mu[0], sig[0]
        for k in range(m_segments):
            a = lo + k * width
            b = split if k == m_segments - 1 else lo + (k + 1) * width
            pla = tail(a - mu0, s0)
            slope = (tail(b - mu0, s0) - pla) / (b - a) if b > a else 0.0

            def surrogate(e, a=a, pla=pla, slope=slope):
                s = 0.0
                for p, m, sd in act:
                    s += p * tail(e - m, sd)
                return alpha * s + p0 * (1.0 - (1.0 - alpha) * (pla + slope * (e - a)))

            consider(a)
            consider(search(surrogate, a, b))
        consider(split)
    if split < hi:
        consider(search(acc, max(split, lo), hi))
    if width > 0.0 and best[0] <= split:
        a = max(lo, best[0] - width)
        b = min(split, best[0] + width)
        if b > a:
            consider(search(acc, a, b))
    return best[0]


def select(mu, sig, prior, alpha, coef, t_max, m_segments, tol_rel, max_iter):
    """Delay-aware threshold choice at one sampling rate.

    Returns ``(status, eta_star, eta_T, eta_A, accuracy, delay)``.
    """
    mu = [float(v) for v in mu]
    sig = [float(v) for v in sig]
    prior = [float(v) for v in prior]
    eta_u = min(mu[1:])
    scale = eta_u if eta_u > 0.0 else 1.0
    status, eta_t = delay_bound(mu, sig, prior, coef, t_max, 1e-13 * scale, max_iter)
    if status != OK:
        return status, math.nan, math.nan, math.nan, math.nan, math.nan
    tol_abs = tol_rel * scale
    eta_a = accuracy_argmax(mu, sig, prior, alpha, 0.0, m_segments, tol_abs, max_iter)
    if eta_a >= eta_t:
        eta_star = eta_a
    else:
        eta_star = accuracy_argmax(mu, sig, prior, alpha, eta_t, m_segments, tol_abs, max_iter)
    acc = accuracy(eta_star, mu, sig, prior, alpha)
    delay = pass_prob(eta_star, mu, sig, prior) * coef
    return OK, eta_star, eta_t, eta_a, acc, delay


def select_many(mu, sig, prior, alpha, coef, t_max, m_segments, tol_rel, max_iter):
    """``select`` over rows of ``mu``/``sig`` (one row per sampling rate)."""
    n = len(alpha)
    status = np.zeros(n, dtype=np.int64)
    out = np.full((5, n), np.nan)
    for k in range(n):
        res = select(mu[k], sig[k], prior, float(alpha[k]), float(coef[k]),
                     t_max, m_segments, tol_rel, max_iter)
        status[k] = res[0]
        out[:, k] = res[1:]
    return status, out[0], out[1], out[2], out[3], out[4]
