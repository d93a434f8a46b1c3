"""Interrogation-time schedules and their closed-form precision.

A scheme ``{a, g, M_tilde, M_b}`` ramps the Ramsey time geometrically by the
ratio ``a`` every ``g`` iterations up to ``t_max`` and then holds it there
for the final ``M_tilde + 1`` iterations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, InfeasibleBudgetError, PreconditionError

log = logging.getLogger(__name__)

_REL = 1e-12


@dataclass(frozen=True)
class Scheme:
    a: float
    g: int
    m_tilde: int
    m_b: int
    t_max: float
    t_1: float | None = None

    def __post_init__(self):
        if not self.a > 1:
            raise ConfigurationError(f"growth ratio a must exceed 1, got {self.a}", key="a")
        if int(self.g) != self.g or self.g < 1:
            raise ConfigurationError(f"g must be a positive integer, got {self.g}", key="g")
        if int(self.m_b) != self.m_b or self.m_b < 1:
            raise ConfigurationError(f"M_b must be a positive integer, got {self.m_b}", key="m_b")
        if int(self.m_tilde) != self.m_tilde or not 0 <= self.m_tilde < self.m_b:
            raise ConfigurationError(
                f"M_tilde must satisfy 0 <= M_tilde < M_b, got {self.m_tilde}", key="m_tilde")
        if not self.t_max > 0:
            raise ConfigurationError("t_max must be positive", key="t_max")
        if self.t_1 is not None and not 0 < self.t_1 <= self.t_max:
            raise ConfigurationError("t_1 must satisfy 0 < t_1 <= t_max", key="t_1")

    @property
    def ramp_end(self) -> int:
        """1-based index j of the first iteration held at ``t_max``."""
        return self.m_b - self.m_tilde

    def label(self) -> str:
        return f"a={self.a:g},g={self.g},M~={self.m_tilde},Mb={self.m_b}"


@dataclass(frozen=True, eq=False)
class Schedule:
    times: np.ndarray
    scheme: Scheme
    warnings: tuple = ()

    def __len__(self):
        return self.times.size

    @property
    def t_1(self) -> float:
        return float(self.times[0])

    def cumulative(self) -> np.ndarray:
        """Elapsed interrogation time ``t_j`` after each iteration."""
        return np.cumsum(self.times)

    def is_plateau(self, i: int) -> bool:
        return i >= self.scheme.ramp_end


def build_schedule(scheme: Scheme) -> Schedule:
    j = scheme.ramp_end
    i = np.arange(1, scheme.m_b + 1)
    exponent = np.where(i < j, np.ceil((j - i) / scheme.g), 0.0)
    times = scheme.t_max / scheme.a ** exponent
    times[i >= j] = scheme.t_max
    warnings = []
    if scheme.m_tilde > 0 and scheme.g > 1 and j % scheme.g:
        warnings.append(f"ramp end j={j} is not a multiple of g={scheme.g}")
    if scheme.t_1 is not None:
        short = times < scheme.t_1 * (1 - _REL)
        if np.any(short):
            warnings.append(
                f"{int(short.sum())} interrogation time(s) below t_1={scheme.t_1:g} s clamped")
            times = np.maximum(times, scheme.t_1)
    for w in warnings:
        log.warning("%s: %s", scheme.label(), w)
    times.flags.writeable = False
    return Schedule(times, scheme, tuple(warnings))


def total_time(schedule: Schedule) -> float:
    return float(math.fsum(schedule.times))


def fisher_precision(times, R: float) -> np.ndarray:
    """Cramer-Rao width after each iteration, ``1/(2 pi sqrt(R sum T_i^2))``.

    Every closed form in :func:`predicted_precision` is a limit of this sum.
    """
    times = np.asarray(times, dtype=float)
    return 1.0 / (2 * np.pi * np.sqrt(R * np.cumsum(times ** 2)))


def effective_ratio(a: float, g: int) -> float:
    """Ratio whose single-step ramp carries the Fisher information of a g-step ramp."""
    return math.sqrt(1.0 + (a * a - 1.0) / g)


def predicted_precision(scheme: Scheme, R: float) -> float:
    """Closed-form final estimator width for ``scheme``.

    Plateau schemes with ``g > 1`` use the plateau formula with
    :func:`effective_ratio` in place of ``a``.
    """
    if not R > 0:
        raise PreconditionError("R must be positive")
    a, g = scheme.a, scheme.g
    scale = 2 * math.pi * math.sqrt(R)
    if scheme.m_tilde > 0:
        ae = a if g == 1 else effective_ratio(a, g)
        return math.sqrt(1.0 / (scheme.m_tilde + ae * ae / (ae * ae - 1.0))) / (scale * scheme.t_max)
    if g > 1:
        return math.sqrt(1.0 - 1.0 / (a * a)) / (math.sqrt(g) * scale * scheme.t_max)
    T = total_time(build_schedule(scheme))
    return math.sqrt(1.0 + 2.0 / (a - 1.0)) / (scale * T)


def solve_ratio_for_budget(T: float, g: int = 1, t_max: float = 20e-3, m_tilde: int = 0) -> float:
    """Growth ratio spending a total time ``T``.

    ``m_tilde > 0`` selects the plateau relation, otherwise ``a = T/(T - g t_max)``.
    """
    if m_tilde > 0:
        denom = T - (m_tilde + 1) * t_max
        if not denom > 0:
            raise InfeasibleBudgetError(
                f"budget {T} s cannot hold {m_tilde + 1} iterations at t_max={t_max} s")
        return (T - m_tilde * t_max) / denom
    if not T > g * t_max:
        raise InfeasibleBudgetError(f"budget {T} s must exceed g*t_max = {g * t_max} s")
    return T / (T - g * t_max)


class IterationCount(NamedTuple):
    m_b: int
    exact: float

    @property
    def rounded_up(self) -> bool:
        return self.m_b > self.exact


def iteration_count(a: float, t_max: float, t_min: float, g: int = 1,
                    m_tilde: float | None = None, total_time: float | None = None) -> IterationCount:
    """Iterations needed to ramp from ``t_min`` to ``t_max``.

    The plateau length comes from ``m_tilde`` or, failing that, from the
    budget ``total_time`` as ``(T - a t_max/(a-1))/t_max``.  Rounds half up.
    """
    if not (a > 1 and 0 < t_min <= t_max):
        raise PreconditionError("need a > 1 and 0 < t_min <= t_max")
    steps = math.log(t_max / t_min) / math.log(a)
    if m_tilde is None and total_time is not None:
        m_tilde = (total_time - a * t_max / (a - 1)) / t_max
    if m_tilde:
        exact = m_tilde + g * steps + 1
    else:
        exact = g * (steps + 1)
    return IterationCount(int(math.floor(exact + 0.5)), exact)
