"""Allan deviation, log-log fits and dB comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import chi2

from .errors import ConfigurationError, PreconditionError

MIN_SAMPLES = 4
# one-sigma two-sided chi-squared quantiles
_CI_LOW, _CI_HIGH = 0.5 - 0.3413447460685429, 0.5 + 0.3413447460685429


@dataclass(frozen=True, eq=False)
class FractionalSeries:
    """Fractional frequency samples ``y_k`` taken every ``sample_interval`` seconds."""

    samples: np.ndarray
    sample_interval: float

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=float)
        if y.ndim != 1 or y.size < MIN_SAMPLES:
            raise ConfigurationError(f"need a 1-D series of at least {MIN_SAMPLES} samples")
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("samples must be finite")
        if not self.sample_interval > 0:
            raise ConfigurationError("sample_interval must be positive", key="sample_interval")
        y.flags.writeable = False
        object.__setattr__(self, "samples", y)

    def __len__(self):
        return self.samples.size

    @classmethod
    def from_hz(cls, delta_nu_hz, sample_interval: float, nominal_frequency: float) -> FractionalSeries:
        return cls(np.asarray(delta_nu_hz, dtype=float) / nominal_frequency, sample_interval)


class AllanPoint(NamedTuple):
    tau: float
    adev: float
    ci_low: float
    ci_high: float
    edf: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def octave_taus(n: int, tau0: float) -> list[float]:
    """``tau0 * 2**k`` up to ``n * tau0 / 3``."""
    out, m = [], 1
    while m <= n / 3:
        out.append(m * tau0)
        m *= 2
    return out


def _edf_white_fm(n_phase: int, m: int) -> float:
    # overlapping Allan variance, white FM noise
    return ((3.0 * (n_phase - 1) / (2.0 * m) - 2.0 * (n_phase - 2) / n_phase)
            * 4.0 * m * m / (4.0 * m * m + 5.0))


def allan_deviation(series: FractionalSeries, taus=None) -> list[AllanPoint]:
    """Overlapping Allan deviation from the integrated phase.

    Each ``tau`` must be ``m * tau0`` with ``1 <= m <= N/3``; a bad point
    carries an ``error`` message and NaN values while the others are still
    computed.  The interval is a 1-sigma chi-squared interval assuming white
    FM noise.
    """
    tau0 = series.sample_interval
    y = series.samples
    n = y.size
    if taus is None:
        taus = octave_taus(n, tau0)
    # remove the mean first: the estimator depends on differences only
    # (an exactly constant series stays exactly zero)
    offset = y[0] if np.all(y == y[0]) else y.mean()
    x = np.concatenate([[0.0], np.cumsum(y - offset)]) * tau0
    out = []
    for tau in taus:
        m = int(round(tau / tau0))
        nan = float("nan")
        if m < 1 or not math.isclose(m * tau0, tau, rel_tol=1e-9):
            out.append(AllanPoint(float(tau), nan, nan, nan, nan, f"tau={tau:g} s is not a multiple of tau0={tau0:g} s"))
            continue
        if m > n / 3:
            out.append(AllanPoint(float(tau), nan, nan, nan, nan, f"tau={tau:g} s exceeds N*tau0/3"))
            continue
        d = x[2 * m:] - 2.0 * x[m:-m] + x[:-2 * m]
        adev = math.sqrt(float(d @ d) / (2.0 * d.size * (m * tau0) ** 2))
        edf = max(_edf_white_fm(n + 1, m), 1.0)
        lo = adev * math.sqrt(edf / chi2.ppf(_CI_HIGH, edf))
        hi = adev * math.sqrt(edf / chi2.ppf(_CI_LOW, edf))
        out.append(AllanPoint(m * tau0, adev, lo, hi, edf))
    return out


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def _window(x, y, window, min_points=3):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sl = window if isinstance(window, slice) else slice(*window)
        x, y = x[sl], y[sl]
    if x.size < min_points:
        raise PreconditionError(f"need at least {min_points} points in the fit window")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise PreconditionError("log-log fit needs finite positive values")
    return np.log(x), np.log(y)


def fit_loglog_slope(points, window=None) -> LogLogFit:
    """Least-squares line through ``(ln x, ln y)`` for ``(x, y)`` pairs.

    ``window`` is a slice or a ``(start, stop)`` index pair.  The residual is
    the RMS deviation in ln y.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lx, ly = _window(pts[:, 0], pts[:, 1], window)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return LogLogFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))))


def fit_white_fm_coefficient(points, window=None) -> float:
    """Coefficient ``c`` of ``c / sqrt(tau)`` fitted with the slope held at -1/2."""
    good = [p for p in points if p.ok and p.adev > 0]
    lt, ls = _window([p.tau for p in good], [p.adev for p in good], window, min_points=1)
    return float(np.exp(np.mean(ls + 0.5 * lt)))


def improvement_db(sigma_a: float, sigma_b: float) -> float:
    """How much better ``sigma_b`` is than ``sigma_a``, in dB."""
    if not (sigma_a > 0 and sigma_b > 0):
        raise PreconditionError("stability coefficients must be positive")
    return 10.0 * math.log10(sigma_a / sigma_b)
