"""Ramsey fringe, likelihoods and the simulated measurement.

Frequencies are in Hz and durations in seconds.  The accumulated Ramsey
phase is ``2*pi*(f - f_c + f_s)*T_R`` everywhere, including the CPT
excited-state expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError, PreconditionError

TWO_PI = 2.0 * np.pi


def zero_shift(T_R):
    return 0.0


@dataclass(frozen=True)
class ConstantShift:
    value: float

    def __call__(self, T_R):
        return self.value


class TabulatedShift:
    """Frequency shift ``f_s(T_R)`` linearly interpolated from a table.

    Outside the tabulated range the end values are held constant.
    """

    def __init__(self, t_r, f_s):
        t_r = np.asarray(t_r, dtype=float)
        f_s = np.asarray(f_s, dtype=float)
        if t_r.ndim != 1 or t_r.shape != f_s.shape or t_r.size < 1:
            raise ConfigurationError("shift table needs matching 1-D T_R and f_s columns")
        order = np.argsort(t_r)
        self.t_r = t_r[order]
        self.f_s = f_s[order]
        if np.any(np.diff(self.t_r) <= 0):
            raise ConfigurationError("shift table T_R values must be distinct")

    @classmethod
    def from_file(cls, path) -> TabulatedShift:
        """Load a whitespace/comma separated two-column file: T_R (s), f_s (Hz)."""
        text = Path(path).read_text().replace(",", " ")
        try:
            data = np.loadtxt(text.splitlines(), ndmin=2, comments="#")
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse shift table {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigurationError(f"shift table {path} must have exactly two columns")
        return cls(data[:, 0], data[:, 1])

    def __call__(self, T_R):
        return np.interp(T_R, self.t_r, self.f_s)


@dataclass(frozen=True)
class SignalModel:
    """Ground truth and noise level of the simulated clock transition."""

    f_c_true: float = 0.0
    R: float = 1540.0
    shift_model: Callable = field(default=zero_shift)
    contrast: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError(f"R must be positive, got {self.R}")
        if not 0 < self.contrast <= 1:
            raise ConfigurationError(f"contrast must lie in (0, 1], got {self.contrast}")


@dataclass(frozen=True)
class CptPhysicalParams:
    Omega: float
    Gamma: float
    delta: float
    tau_p: float
    tau_d: float

    def __post_init__(self):
        for name in ("Omega", "Gamma", "tau_p", "tau_d"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def alpha(self) -> float:
        o2 = self.Omega ** 2
        return o2 / (self.Gamma ** 2 + 3.0 * o2 + 4.0 * self.delta ** 2)


def ramsey_signal(f, f_c, f_s, T_R):
    """Normalized fringe ``(1 + cos(2 pi (f - f_c + f_s) T_R)) / 2``."""
    return 0.5 * (1.0 + np.cos(TWO_PI * (f - f_c + f_s) * T_R))


def single_particle_likelihood(u, f_c, f, f_s, T_R):
    """Probability of single-atom outcome ``u`` (1 = upper clock state)."""
    if u not in (0, 1):
        raise PreconditionError(f"outcome u must be 0 or 1, got {u!r}")
    s1 = ramsey_signal(f, f_c, f_s, T_R)
    return s1 if u == 1 else 1.0 - s1


def clamp_probability(p_e, R):
    eps = 0.5 / R
    return np.clip(p_e, eps, 1.0 - eps)


def likelihood_sigma(p_e, R):
    """Width of the ensemble likelihood, ``sqrt(p(1-p)/R)`` with p clamped."""
    p = clamp_probability(p_e, R)
    return np.sqrt(p * (1.0 - p) / R)


def _check_pe(p_e):
    if not 0.0 <= p_e <= 1.0:
        raise PreconditionError(f"p_e must lie in [0, 1], got {p_e}")


def gaussian_log_likelihood(p_e, f_c, f, f_s, T_R, R):
    _check_pe(p_e)
    sigma = likelihood_sigma(p_e, R)
    resid = (p_e - ramsey_signal(f, f_c, f_s, T_R)) / sigma
    return -0.5 * resid * resid - np.log(np.sqrt(TWO_PI) * sigma)


def gaussian_likelihood(p_e, f_c, f, f_s, T_R, R):
    """Ensemble likelihood of observing excitation fraction ``p_e``."""
    return np.exp(gaussian_log_likelihood(p_e, f_c, f, f_s, T_R, R))


def frequency_shift(model: SignalModel, T_R: float) -> float:
    if not T_R > 0:
        raise PreconditionError(f"T_R must be positive, got {T_R}")
    return float(model.shift_model(T_R))


def expected_signal(model: SignalModel, f: float, T_R: float) -> float:
    phase = TWO_PI * (f - model.f_c_true + frequency_shift(model, T_R)) * T_R
    return 0.5 * (1.0 + model.contrast * np.cos(phase))


def simulate_measurement(model: SignalModel, f: float, T_R: float, rng: np.random.Generator) -> float:
    """One noisy excitation fraction with Gaussian projection noise."""
    s = expected_signal(model, f, T_R)
    eta = rng.normal(0.0, np.sqrt(s * (1.0 - s) / model.R))
    return float(np.clip(s + eta, 0.0, 1.0))


def simulate_measurement_binomial(model: SignalModel, f: float, T_R: float,
                                  rng: np.random.Generator, atoms: int | None = None) -> float:
    """Exact projection noise: fraction of ``atoms`` found excited."""
    n = int(round(model.R)) if atoms is None else int(atoms)
    if n < 1:
        raise PreconditionError("atom number must be at least 1")
    s = expected_signal(model, f, T_R)
    return rng.binomial(n, s) / n


def cpt_excited_probability(params: CptPhysicalParams, f, f_c, f_s, T_R):
    """Excited-state amplitude after a CPT-Ramsey sequence."""
    a = params.alpha
    decay = a * params.Gamma
    prep = 1.0 - np.exp(-decay * params.tau_p)
    fringe = prep * abs(1.0 / np.cos(a)) * np.cos(TWO_PI * (f - f_c + f_s) * T_R)
    return a * np.exp(-decay * params.tau_d) * (1.0 - fringe)
