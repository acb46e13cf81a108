"""Synthetic CSI windows, the band-power detector and fitting of class statistics.

Windows are built from a complex baseline, a few in-band tones that share a
random per-window gain, and circular complex Gaussian noise. The detector
takes a unitary DFT, averages the squared magnitude over the positive bins
of the motion band and compares it with a threshold.

Monte Carlo batches are split into fixed-size chunks, each seeded from
``SeedSequence(seed, spawn_key=(chunk,))``, so results do not depend on how
chunks are scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AliasingError, ConfigError, DomainError, FitError
from .sensing import ClassStats, SensingParams, band_bin_range

CHUNK = 2048
POWER_CSV_HEADER = "# iscc-powers v1"
POWER_CSV_COLUMNS = ("class", "f_s", "trial", "P")
JITTER_LAWS = ("lognormal", "normal")


@dataclass(frozen=True)
class SyntheticClassSpec:
    """Recipe for windows of one class.

    ``amp_jitter`` sets the per-window tone power gain, which has mean one.
    Under ``jitter_law="lognormal"`` it is the standard deviation of the log
    of the amplitude gain; under ``"normal"`` it is the standard deviation
    of the power gain itself (clipped at zero), which keeps the band power
    close to Gaussian when the spread is large.
    ``noise_sigma2`` is the total (both quadratures) noise variance.
    """

    tones: tuple[tuple[float, float], ...] = ()
    amp_jitter: float = 0.0
    dc_level: complex = 1.0 + 0.0j
    noise_sigma2: float = 0.0
    static: bool = False
    jitter_law: str = "lognormal"

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple((float(f), float(a)) for f, a in self.tones))
        object.__setattr__(self, "dc_level", complex(self.dc_level))
        if self.amp_jitter < 0 or self.noise_sigma2 < 0:
            raise DomainError("amp_jitter and noise_sigma2 must be non-negative")
        if any(f <= 0 for f, _ in self.tones):
            raise DomainError("tone frequencies must be positive")
        if self.jitter_law not in JITTER_LAWS:
            raise DomainError(f"jitter_law must be one of {JITTER_LAWS}, got {self.jitter_law!r}")

    @property
    def band_power(self) -> float:
        """Mean in-band signal power contributed by the tones."""
        return sum(a * a for _, a in self.tones)

    def to_dict(self) -> dict:
        return {
            "tones": [list(t) for t in self.tones],
            "amp_jitter": self.amp_jitter,
            "dc_level": [self.dc_level.real, self.dc_level.imag],
            "noise_sigma2": self.noise_sigma2,
            "static": self.static,
            "jitter_law": self.jitter_law,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticClassSpec":
        d = dict(d)
        if "dc_level" in d:
            re, im = d["dc_level"]
            d["dc_level"] = complex(re, im)
        return cls(**d)


@dataclass(frozen=True)
class CsiWindow:
    samples: np.ndarray
    f_s: float
    t_win: float

    def __post_init__(self):
        n = window_length(self.f_s, self.t_win)
        if self.samples.shape[-1] != n:
            raise DomainError(f"expected {n} samples, got {self.samples.shape[-1]}")


def window_length(f_s: float, t_win: float) -> int:
    n = int(round(f_s * t_win))
    if n < 2:
        raise DomainError(f"window holds {n} samples; need at least 2")
    return n


def jitter_sigma(lambda_i: float, sigma_d2_i: float, law: str = "lognormal") -> float:
    """``amp_jitter`` giving band-power variance ``sigma_d2_i`` under ``law``."""
    if sigma_d2_i == 0.0:
        return 0.0
    if lambda_i <= 0.0:
        raise DomainError("instance diversity needs a positive in-band power")
    if law == "normal":
        return math.sqrt(sigma_d2_i) / lambda_i
    return math.sqrt(math.log1p(sigma_d2_i / lambda_i**2) / 4.0)


def matched_spec(c: ClassStats, sp: SensingParams, static: bool = False,
                 tone_hz: Optional[float] = None, jitter_law: str = "lognormal") -> SyntheticClassSpec:
    """Spec whose band-power moments equal the model's for ``c``.

    One tone carries all of ``lambda_i``; it sits on a DFT bin (mid-band by
    default) so no energy leaks. The noise energy must be consistent with
    ``sp.sigma2``, otherwise the variance model could not match.
    """
    bins = sp.band_bins
    noise = c.r_i / bins
    if not math.isclose(noise, 2.0 * sp.sigma2, rel_tol=1e-9, abs_tol=1e-15):
        raise DomainError(
            f"noise energy {c.r_i!r} does not equal 2 * sigma2 * {bins} bins for sigma2={sp.sigma2!r}")
    lo, hi = band_bin_range(sp.f_lo, sp.f_hi, sp.t_win)
    if tone_hz is None:
        tone_hz = round((lo + hi) / 2) / sp.t_win
    tones = ((tone_hz, math.sqrt(c.lambda_i)),) if c.lambda_i > 0 else ()
    jit = jitter_sigma(c.lambda_i, c.sigma_d2_i, jitter_law)
    return SyntheticClassSpec(tones, jit, 1.0 + 0.0j, noise, static, jitter_law)


# --- generation ----------------------------------------------------------------------


def _check_nyquist(spec: SyntheticClassSpec, f_s: float):
    for f, _ in spec.tones:
        if f >= f_s / 2:
            raise AliasingError(f"tone at {f!r} Hz aliases at f_s={f_s!r} Hz")


_DTYPES = {"double": (np.float64, np.complex128), "single": (np.float32, np.complex64)}


def _draw(spec: SyntheticClassSpec, n_win: int, n: int, f_s: float, rng: np.random.Generator,
          precision: str = "double"):
    real, cplx = _DTYPES[precision]
    if spec.noise_sigma2 > 0:
        w = rng.standard_normal((n_win, n, 2), dtype=real)
        w *= real(math.sqrt(spec.noise_sigma2 / 2.0))
        out = w.view(cplx)[..., 0]
    else:
        out = np.zeros((n_win, n), dtype=cplx)
    out += cplx(spec.dc_level)
    if spec.tones:
        m = np.arange(n)
        freq = np.array([f for f, _ in spec.tones])
        amp = np.array([a for _, a in spec.tones])
        a = spec.amp_jitter
        z = rng.standard_normal(n_win)
        if spec.jitter_law == "normal":
            gain = np.sqrt(np.maximum(1.0 + a * z, 0.0))
        else:
            gain = np.exp(a * z - a * a)
        phase = rng.uniform(0.0, 2.0 * np.pi, (n_win, len(freq)))
        coef = (gain[:, None] * amp * np.exp(1j * phase)).astype(cplx)
        out += coef @ np.exp(2j * np.pi * np.outer(freq, m) / f_s).astype(cplx)
    return out


def generate_csi(spec: SyntheticClassSpec, f_s: float, t_win: float, seed: int) -> CsiWindow:
    """One window; identical for identical ``(spec, f_s, t_win, seed)``."""
    _check_nyquist(spec, f_s)
    n = window_length(f_s, t_win)
    rng = np.random.default_rng(seed)
    return CsiWindow(_draw(spec, 1, n, f_s, rng)[0], float(f_s), float(t_win))


def generate_batch(spec: SyntheticClassSpec, f_s: float, t_win: float, trials: int,
                   seed: int, precision: str = "double") -> Iterable[np.ndarray]:
    """Yield ``(k, N)`` blocks of windows, :data:`CHUNK` per block.

    ``precision="single"`` draws and stores in 32-bit floats, which is
    plenty for rate and moment estimates and markedly faster.
    """
    if precision not in _DTYPES:
        raise DomainError(f"precision must be 'double' or 'single', got {precision!r}")
    _check_nyquist(spec, f_s)
    n = window_length(f_s, t_win)
    for k in range(-(-trials // CHUNK)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        size = min(CHUNK, trials - k * CHUNK)
        yield _draw(spec, size, n, f_s, rng, precision)


# --- detector ----------------------------------------------------------------------


def dft(samples: np.ndarray) -> np.ndarray:
    """Unitary DFT along the last axis (0-based sample index)."""
    return np.fft.fft(samples, axis=-1) / math.sqrt(samples.shape[-1])


@lru_cache(maxsize=32)
def _band_basis(n: int, lo: int, hi: int) -> np.ndarray:
    # exact integer phase index keeps the basis accurate for long windows
    idx = np.outer(np.arange(n), np.arange(lo, hi + 1)) % n
    basis = np.exp(-2j * np.pi * idx / n) / math.sqrt(n)
    basis.setflags(write=False)
    return basis


def band_power(samples: np.ndarray, f_s: float, t_win: float, f_lo: float, f_hi: float) -> np.ndarray:
    """Band power of one window or a stack of windows (last axis is time).

    Only the band's DFT bins are formed, as a product with a cached basis;
    this equals the FFT route but costs ``O(N * bins)``.
    """
    if not 0 < f_lo < f_hi:
        raise DomainError(f"need 0 < f_lo < f_hi, got {f_lo!r}, {f_hi!r}")
    if f_hi >= f_s / 2:
        raise DomainError(f"band top {f_hi!r} Hz is not below Nyquist at f_s={f_s!r}")
    n = samples.shape[-1]
    lo, hi = band_bin_range(f_lo, f_hi, t_win)
    basis = _band_basis(n, lo, hi)
    if samples.dtype == np.complex64:
        basis = basis.astype(np.complex64)
    d = samples @ basis
    return np.sum(d.real**2 + d.imag**2, axis=-1, dtype=np.float64) / n


def highfreq_power(w: CsiWindow, f_lo: float, f_hi: float) -> float:
    return float(band_power(w.samples, w.f_s, w.t_win, f_lo, f_hi))


def detect_action(p, eta):
    """Action verdict; a tie counts as static."""
    return np.greater(p, eta) if np.ndim(p) or np.ndim(eta) else bool(p > eta)


SIM_METHODS = ("full", "band")


def _band_powers(spec: SyntheticClassSpec, sp: SensingParams, f_s: float, trials: int,
                 seed: int) -> np.ndarray:
    # A unitary DFT maps white noise to white noise, so the band bins of the
    # noise are i.i.d. complex normals; only the deterministic part needs the basis.
    n = window_length(f_s, sp.t_win)
    lo, hi = band_bin_range(sp.f_lo, sp.f_hi, sp.t_win)
    basis = _band_basis(n, lo, hi)
    bins = basis.shape[1]
    base = spec.dc_level * basis.sum(axis=0)
    if spec.tones:
        m = np.arange(n)
        freq = np.array([f for f, _ in spec.tones])
        amp = np.array([a for _, a in spec.tones])
        tone_bins = np.exp(2j * np.pi * np.outer(freq, m) / f_s) @ basis
    out = np.empty(trials)
    for k in range(-(-trials // CHUNK)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        size = min(CHUNK, trials - k * CHUNK)
        d = np.broadcast_to(base, (size, bins)).copy()
        if spec.tones:
            a = spec.amp_jitter
            z = rng.standard_normal(size)
            if spec.jitter_law == "normal":
                gain = np.sqrt(np.maximum(1.0 + a * z, 0.0))
            else:
                gain = np.exp(a * z - a * a)
            phase = rng.uniform(0.0, 2.0 * np.pi, (size, len(freq)))
            d += (gain[:, None] * amp * np.exp(1j * phase)) @ tone_bins
        if spec.noise_sigma2 > 0:
            w = rng.standard_normal((size, bins, 2)) * math.sqrt(spec.noise_sigma2 / 2.0)
            d += w.view(np.complex128)[..., 0]
        out[k * CHUNK:k * CHUNK + size] = np.sum(d.real**2 + d.imag**2, axis=-1) / n
    return out


def simulate_powers(spec: SyntheticClassSpec, sp: SensingParams, f_s: float, trials: int,
                    seed: int, precision: str = "single", method: str = "full") -> np.ndarray:
    """Band power of ``trials`` independent windows.

    ``method="full"`` synthesises every window and runs the detector on it.
    ``method="band"`` draws the band bins directly, which has the same
    distribution at a cost independent of the window length (always double
    precision).
    """
    if method not in SIM_METHODS:
        raise DomainError(f"method must be one of {SIM_METHODS}, got {method!r}")
    if method == "band":
        if f_s <= 0 or sp.f_hi >= f_s / 2:
            raise DomainError(f"band top {sp.f_hi!r} Hz is not below Nyquist at f_s={f_s!r}")
        _check_nyquist(spec, f_s)
        return _band_powers(spec, sp, f_s, trials, seed)
    out = np.empty(trials)
    pos = 0
    for block in generate_batch(spec, f_s, sp.t_win, trials, seed, precision):
        k = len(block)
        out[pos:pos + k] = band_power(block, f_s, sp.t_win, sp.f_lo, sp.f_hi)
        pos += k
    return out


def error_rates(powers: np.ndarray, eta, static: bool):
    """Disagreement rate with ground truth and its binomial standard error."""
    eta = np.asarray(eta, dtype=float)
    p = np.sort(powers)
    n = len(p)
    # windows flagged as action are those with P > eta
    flagged = n - np.searchsorted(p, eta, side="right")
    wrong = flagged if static else n - flagged
    rate = wrong / n
    stderr = np.sqrt(rate * (1.0 - rate) / n)
    if rate.ndim == 0:
        return float(rate), float(stderr)
    return rate, stderr


def monte_carlo_rates(spec: SyntheticClassSpec, sp: SensingParams, f_s: float, eta, trials: int,
                      seed: int, precision: str = "single", method: str = "full"):
    """False-positive rate (static spec) or miss rate (action spec) by simulation.

    ``eta`` may be an array; all thresholds are scored on the same windows.
    """
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials!r}")
    return error_rates(simulate_powers(spec, sp, f_s, trials, seed, precision, method), eta,
                       spec.static)


# --- fitting ---------------------------------------------------------------------------


def fit_class_stats(powers: Sequence[tuple[float, np.ndarray]], sp: SensingParams,
                    prior: float = 1.0) -> ClassStats:
    """Fit band-power statistics from samples at several sampling rates.

    Means are regressed on ``1 / (t_win * f_s)`` to get the in-band power
    and noise energy; what remains of the sample variance after the
    rate-dependent noise terms is the instance diversity. All three are
    clamped at zero.
    """
    rates = [float(f) for f, _ in powers]
    if len(set(rates)) < 2:
        raise FitError("need samples at two or more distinct sampling rates")
    xs, means, variances = [], [], []
    for f, vals in powers:
        vals = np.asarray(vals, dtype=float)
        if vals.size < 30:
            raise FitError(f"need at least 30 samples per rate, got {vals.size} at f_s={f!r}")
        if not np.all(np.isfinite(vals)):
            raise FitError(f"non-finite sample at f_s={f!r}")
        xs.append(1.0 / (sp.t_win * float(f)))
        means.append(vals.mean())
        variances.append(vals.var(ddof=1))
    x = np.array(xs)
    design = np.column_stack([np.ones_like(x), x])
    (lam, r), *_ = np.linalg.lstsq(design, np.array(means), rcond=None)
    lam, r = max(float(lam), 0.0), max(float(r), 0.0)
    noise_var = 4.0 * sp.sigma2 * lam * x + 2.0 * sp.sigma2 * r * x**2
    sd2 = max(float(np.mean(np.array(variances) - noise_var)), 0.0)
    return ClassStats(lam, r, sd2, prior)


# --- CSV exchange --------------------------------------------------------------------


def write_power_csv(path, rows: Iterable[tuple[str, float, int, float]]):
    """Write ``(class, f_s, trial, P)`` rows under a versioned header."""
    with open(path, "w", newline="") as fh:
        fh.write(POWER_CSV_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_CSV_COLUMNS)
        for cls, f_s, trial, p in rows:
            w.writerow([cls, repr(float(f_s)), int(trial), repr(float(p))])


def power_rows(label: str, f_s: float, powers: np.ndarray):
    for k, p in enumerate(powers):
        yield label, f_s, k, p


def read_power_csv(path) -> dict[str, list[tuple[float, np.ndarray]]]:
    """Parse a power CSV into ``{class: [(f_s, samples), ...]}`` in file order.

    Schema problems raise :class:`ConfigError` naming the line.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != POWER_CSV_HEADER:
        raise ConfigError(f"{path}: line 1: expected header {POWER_CSV_HEADER!r}")
    reader = csv.reader(lines[1:])
    try:
        cols = next(reader)
    except StopIteration:
        raise ConfigError(f"{path}: line 2: missing column row") from None
    if tuple(c.strip() for c in cols) != POWER_CSV_COLUMNS:
        raise ConfigError(f"{path}: line 2: expected columns {','.join(POWER_CSV_COLUMNS)}")
    data: dict[str, dict[float, list[float]]] = {}
    for lineno, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != 4:
            raise ConfigError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
        cls, f_s, trial, p = row
        try:
            f = float(f_s)
            int(trial)
            val = float(p)
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: {exc}") from None
        if not (f > 0 and math.isfinite(val)):
            raise ConfigError(f"{path}: line {lineno}: f_s must be positive and P finite")
        data.setdefault(cls, {}).setdefault(f, []).append(val)
    if not data:
        raise ConfigError(f"{path}: no data rows")
    return {c: [(f, np.array(v)) for f, v in by_rate.items()] for c, by_rate in data.items()}
