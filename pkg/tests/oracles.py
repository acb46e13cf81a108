"""Independent reference computations used by the tests.

Nothing here calls into the package's numerics: Gaussian tails come from
numerical integration or scipy, DFTs are summed directly, and optima are
found on dense grids.
"""

import math

import numpy as np
from scipy import integrate
from scipy.stats import norm


def q_integral(x):
    """Upper Gaussian tail by adaptive quadrature."""
    pdf = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    # the integrand is below 1e-300 beyond 40 sigma, so a finite span suffices
    a = abs(x)
    val, _ = integrate.quad(pdf, a, a + 40.0, epsabs=0.0, epsrel=2e-14, limit=200)
    return val if x >= 0 else 1.0 - val


def tail(d, s):
    """P(X > d-offset) with the step convention at zero spread."""
    if s == 0:
        return 1.0 if d < 0 else (0.0 if d > 0 else 0.5)
    return float(norm.sf(d / s))


def moments(lam, r, sd2, sigma2, t_win, f_s):
    n = t_win * f_s
    mu = lam + r / n
    var = 4 * sigma2 * lam / n + 2 * sigma2 * r / n**2 + sd2
    return mu, math.sqrt(var)


def accuracy(eta, mu, sig, prior, alpha):
    """Overall accuracy from per-class means/deviations (class 0 static)."""
    acc = 0.0
    for i in range(1, len(mu)):
        miss = tail(mu[i] - eta, sig[i])
        acc += prior[i] * (1 - miss) * alpha
    fp = tail(eta - mu[0], sig[0])
    return acc + prior[0] * ((1 - fp) + fp * alpha)


def pass_prob(eta, mu, sig, prior):
    p = 0.0
    for i in range(1, len(mu)):
        p += prior[i] * (1 - tail(mu[i] - eta, sig[i]))
    return p + prior[0] * tail(eta - mu[0], sig[0])


def naive_dft(x):
    n = len(x)
    m = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * l * m / n)) for l in range(n)]) / math.sqrt(n)


def grid_curves(etas, mu, sig, prior, alpha):
    """Accuracy and CNN pass probability on a threshold grid (all spreads > 0)."""
    etas = np.asarray(etas, dtype=float)[:, None]
    mu, sig, prior = (np.asarray(a, dtype=float) for a in (mu, sig, prior))
    passes = norm.sf((etas - mu) / sig)  # P(P > eta) for every class
    fp = passes[:, 0]
    detected = passes[:, 1:] @ prior[1:]
    acc = detected * alpha + prior[0] * ((1 - fp) + fp * alpha)
    return acc, detected + prior[0] * fp


def constrained_grid_max(mu, sig, prior, alpha, coef, t_max, points=10_000):
    """Best accuracy over a uniform threshold grid on [0, eta_u] meeting the delay budget."""
    etas = np.linspace(0.0, float(np.min(mu[1:])), points)
    acc, pcnn = grid_curves(etas, mu, sig, prior, alpha)
    ok = pcnn * coef <= t_max
    if not ok.any():
        return None, None
    k = int(np.argmax(np.where(ok, acc, -np.inf)))
    return float(acc[k]), float(etas[k])


def accuracy_increment(h, mu, sig, prior, alpha):
    """A(h) - A(0) summed term by term so small steps do not cancel.

    Raising the threshold from 0 to h loses actions that fall below it and
    recovers static windows that no longer pass the gate.
    """
    lost = sum(prior[i] * (norm.sf((mu[i] - h) / sig[i]) - norm.sf(mu[i] / sig[i]))
               for i in range(1, len(mu)))
    gained = norm.sf((mu[0] - h) / sig[0]) - norm.sf(mu[0] / sig[0])
    return prior[0] * (1 - alpha) * gained - alpha * lost


def random_detection_draw(rng, min_ratio=4.0, max_ratio=10.0):
    """Random class means/spreads (static first, lowest mean), priors and alpha."""
    n = int(rng.integers(2, 9))
    sig = rng.uniform(0.05, 0.5, n)
    ratio = rng.uniform(min_ratio, max_ratio, n)
    mu = ratio * sig
    k = int(np.argmin(mu))
    mu[[0, k]] = mu[[k, 0]]
    sig[[0, k]] = sig[[k, 0]]
    prior = rng.dirichlet(np.ones(n))
    alpha = float(rng.uniform(0.5, 0.99))
    return mu, sig, prior, alpha


def random_delay_coef(rng, mu, sig, prior, t_max):
    """Per-window CNN delay giving budgets from slightly infeasible to slack."""
    lo = pass_prob(float(np.min(mu[1:])), mu, sig, prior)
    hi = pass_prob(0.0, mu, sig, prior)
    u = rng.uniform(-0.1, 1.3)
    target = lo * (1 + u) if u < 0 else lo + u * (hi - lo)
    return t_max / target
