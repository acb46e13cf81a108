# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""

from libc.math cimport erfc, sqrt, NAN

import numpy as np

DEF Q_SAT = 38.0
DEF INV_PHI = 0.6180339887498949

OK = 0
DELAY_INFEASIBLE = 1


cdef inline double _q(double x) nogil:
    cdef double v
    if x > Q_SAT:
        return 0.0
    if x < -Q_SAT:
        return 1.0
    v = 0.5 * erfc(x / sqrt(2.0))
    if v > 1.0:
        return 1.0
    if v < 0.0:
        return 0.0
    return v


cdef inline double _tail(double d, double s) nogil:
    if s > 0.0:
        return _q(d / s)
    if d > 0.0:
        return 0.0
    if d < 0.0:
        return 1.0
    return 0.5


cdef double _accuracy(double eta, double[:] mu, double[:] sig, double[:] prior,
                      double alpha) nogil:
    cdef Py_ssize_t i
    cdef double pl = _tail(eta - mu[0], sig[0])
    cdef double acc = prior[0] * (_tail(mu[0] - eta, sig[0]) + pl * alpha)
    for i in range(1, mu.shape[0]):
        acc += prior[i] * _tail(eta - mu[i], sig[i]) * alpha
    return acc


cdef double _pass_prob(double eta, double[:] mu, double[:] sig, double[:] prior) nogil:
    cdef Py_ssize_t i
    cdef double p = prior[0] * _tail(eta - mu[0], sig[0])
    for i in range(1, mu.shape[0]):
        p += prior[i] * _tail(eta - mu[i], sig[i])
    return p


cdef double _eta_upper(double[:] mu) nogil:
    cdef Py_ssize_t i
    cdef double m = mu[1]
    for i in range(2, mu.shape[0]):
        if mu[i] < m:
            m = mu[i]
    return m


cdef struct Objective:
    # mode 0: true accuracy; mode 1: chord surrogate on one piece
    int mode
    double alpha
    double a
    double pla
    double slope


cdef double _eval(Objective* ob, double e, double[:] mu, double[:] sig,
                  double[:] prior) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    if ob.mode == 0:
        return _accuracy(e, mu, sig, prior, ob.alpha)
    for i in range(1, mu.shape[0]):
        s += prior[i] * _tail(e - mu[i], sig[i])
    return ob.alpha * s + prior[0] * (1.0 - (1.0 - ob.alpha) * (ob.pla + ob.slope * (e - ob.a)))


cdef double _golden(Objective* ob, double lo, double hi, double tol, int max_iter,
                    double[:] mu, double[:] sig, double[:] prior) nogil:
    cdef double a = lo, b = hi
    cdef double x1 = b - INV_PHI * (b - a)
    cdef double x2 = a + INV_PHI * (b - a)
    cdef double f1 = _eval(ob, x1, mu, sig, prior)
    cdef double f2 = _eval(ob, x2, mu, sig, prior)
    cdef int it = 0
    if b - a <= tol:
        return 0.5 * (a + b)
    while b - a > tol:
        if it >= max_iter:
            return x1 if f1 >= f2 else x2
        if f1 < f2:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + INV_PHI * (b - a)
            f2 = _eval(ob, x2, mu, sig, prior)
        else:
            b = x2
            x2 = x1
            f2 = f1
            x1 = b - INV_PHI * (b - a)
            f1 = _eval(ob, x1, mu, sig, prior)
        it += 1
    return 0.5 * (a + b)


cdef inline void _consider(double e, double* best_e, double* best_a, double[:] mu,
                           double[:] sig, double[:] prior, double alpha) nogil:
    cdef double a = _accuracy(e, mu, sig, prior, alpha)
    if a > best_a[0] or (a == best_a[0] and e > best_e[0]):
        best_e[0] = e
        best_a[0] = a


cdef double _argmax(double[:] mu, double[:] sig, double[:] prior, double alpha,
                    double lo, int m_segments, double tol, int max_iter) nogil:
    cdef double hi = _eta_upper(mu)
    cdef double best_e, best_a, split, width = 0.0, a, b, pla
    cdef int k
    cdef Objective ob
    if hi <= lo:
        return hi if hi > 0.0 else 0.0
    ob.alpha = alpha
    best_e = hi
    best_a = _accuracy(hi, mu, sig, prior, alpha)
    _consider(lo, &best_e, &best_a, mu, sig, prior, alpha)
    split = mu[0] if mu[0] < hi else hi
    if split > lo:
        width = (split - lo) / m_segments
        ob.mode = 1
        for k in range(m_segments):
            a = lo + k * width
            b = split if k == m_segments - 1 else lo + (k + 1) * width
            pla = _tail(a - mu[0], sig[0])
            ob.a = a
            ob.pla = pla
            ob.slope = (_tail(b - mu[0], sig[0]) - pla) / (b - a) if b > a else 0.0
            _consider(a, &best_e, &best_a, mu, sig, prior, alpha)
            _consider(_golden(&ob, a, b, tol, max_iter, mu, sig, prior),
                      &best_e, &best_a, mu, sig, prior, alpha)
        _consider(split, &best_e, &best_a, mu, sig, prior, alpha)
    ob.mode = 0
    if split < hi:
        a = split if split > lo else lo
        _consider(_golden(&ob, a, hi, tol, max_iter, mu, sig, prior),
                  &best_e, &best_a, mu, sig, prior, alpha)
    if width > 0.0 and best_e <= split:
        a = best_e - width
        if a < lo:
            a = lo
        b = best_e + width
        if b > split:
            b = split
        if b > a:
            _consider(_golden(&ob, a, b, tol, max_iter, mu, sig, prior),
                      &best_e, &best_a, mu, sig, prior, alpha)
    return best_e


cdef int _delay_bound(double[:] mu, double[:] sig, double[:] prior, double coef,
                      double t_max, double tol, int max_iter, double* eta) nogil:
    cdef double eta_u = _eta_upper(mu)
    cdef double a, b, m, g
    cdef int it
    if _pass_prob(0.0, mu, sig, prior) * coef <= t_max:
        eta[0] = 0.0
        return 0
    if _pass_prob(eta_u, mu, sig, prior) * coef > t_max:
        eta[0] = NAN
        return 1
    if _pass_prob(eta_u, mu, sig, prior) * coef == t_max:
        eta[0] = eta_u
        return 0
    a = 0.0
    b = eta_u
    for it in range(max_iter):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        g = _pass_prob(m, mu, sig, prior) * coef - t_max
        if g == 0.0:
            eta[0] = m
            return 0
        if g > 0.0:
            a = m
        else:
            b = m
    eta[0] = b
    return 0


cdef int _select(double[:] mu, double[:] sig, double[:] prior, double alpha,
                 double coef, double t_max, int m_segments, double tol_rel,
                 int max_iter, double* out) nogil:
    cdef double eta_u = _eta_upper(mu)
    cdef double scale = eta_u if eta_u > 0.0 else 1.0
    cdef double eta_t, eta_a, eta_star
    cdef int k
    if _delay_bound(mu, sig, prior, coef, t_max, 1e-13 * scale, max_iter, &eta_t) != 0:
        for k in range(5):
            out[k] = NAN
        return 1
    eta_a = _argmax(mu, sig, prior, alpha, 0.0, m_segments, tol_rel * scale, max_iter)
    if eta_a >= eta_t:
        eta_star = eta_a
    else:
        eta_star = _argmax(mu, sig, prior, alpha, eta_t, m_segments, tol_rel * scale, max_iter)
    out[0] = eta_star
    out[1] = eta_t
    out[2] = eta_a
    out[3] = _accuracy(eta_star, mu, sig, prior, alpha)
    out[4] = _pass_prob(eta_star, mu, sig, prior) * coef
    return 0


def _vec(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def tail(double d, double s):
    return _tail(d, s)


def accuracy(double eta, mu, sig, prior, double alpha):
    return _accuracy(eta, _vec(mu), _vec(sig), _vec(prior), alpha)


def pass_prob(double eta, mu, sig, prior):
    return _pass_prob(eta, _vec(mu), _vec(sig), _vec(prior))


def delay_bound(mu, sig, prior, double coef, double t_max, double tol_abs, int max_iter):
    cdef double eta
    cdef int status = _delay_bound(_vec(mu), _vec(sig), _vec(prior), coef, t_max,
                                   tol_abs, max_iter, &eta)
    return status, eta


def accuracy_argmax(mu, sig, prior, double alpha, double lo, int m_segments,
                    double tol_abs, int max_iter):
    return _argmax(_vec(mu), _vec(sig), _vec(prior), alpha, lo, m_segments,
                   tol_abs, max_iter)


def select(mu, sig, prior, double alpha, double coef, double t_max, int m_segments,
           double tol_rel, int max_iter):
    cdef double out[5]
    cdef int status = _select(_vec(mu), _vec(sig), _vec(prior), alpha, coef, t_max,
                              m_segments, tol_rel, max_iter, out)
    return status, out[0], out[1], out[2], out[3], out[4]


def select_many(mu, sig, prior, alpha, coef, double t_max, int m_segments,
                double tol_rel, int max_iter):
    cdef double[:, :] mu2 = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[:, :] sig2 = np.ascontiguousarray(sig, dtype=np.float64)
    cdef double[:] pr = _vec(prior)
    cdef double[:] al = _vec(alpha)
    cdef double[:] cf = _vec(coef)
    cdef Py_ssize_t n = al.shape[0], k
    status_arr = np.zeros(n, dtype=np.int64)
    res_arr = np.full((5, n), np.nan)
    cdef long long[:] status = status_arr
    cdef double[:, :] res = res_arr
    cdef double out[5]
    cdef int j
    with nogil:
        for k in range(n):
            status[k] = _select(mu2[k], sig2[k], pr, al[k], cf[k], t_max, m_segments,
                                tol_rel, max_iter, out)
            if status[k] == 0:
                for j in range(5):
                    res[j, k] = out[j]
    return status_arr, res_arr[0], res_arr[1], res_arr[2], res_arr[3], res_arr[4]
