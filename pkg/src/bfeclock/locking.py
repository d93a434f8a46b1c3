"""Closed-loop locking of a noisy local oscillator.

Frequencies are detunings in Hz.  The controller steers a command
frequency; the LO actually emits ``command + lo.offset``, and the atoms see
that frequency.  ``delta_nu`` is the emitted frequency minus the true clock
frequency, averaged over a cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .adaptive import BfeConfig, bfe_run
from .errors import ConfigurationError, PreconditionError
from .schedule import Scheme, build_schedule, total_time
from .signal import SignalModel, simulate_measurement

RB87_HYPERFINE_HZ = 6.834682610904e9
# per measurement: 100 ms MOT, 5 ms molasses, 400 us preparation, 50 us detection
DEFAULT_DEAD_TIME = 0.10545


@dataclass(frozen=True)
class LoModel:
    """Free-running LO: white FM about a linearly drifting mean.

    ``offset`` is the mean detuning over the most recent evolution step and
    ``base_offset`` the noiseless drifting part it scatters about.
    """

    offset: float = 0.0
    white_fm_sigma: float = 0.0
    drift_rate: float = 0.0
    nominal_frequency: float = RB87_HYPERFINE_HZ
    base_offset: float | None = None

    def __post_init__(self):
        if not self.white_fm_sigma >= 0:
            raise ConfigurationError("white_fm_sigma must be >= 0", key="white_fm_sigma")
        if not self.nominal_frequency > 0:
            raise ConfigurationError("nominal_frequency must be positive", key="nominal_frequency")
        if self.base_offset is None:
            object.__setattr__(self, "base_offset", self.offset)


def lo_evolve(lo: LoModel, dt: float, rng: np.random.Generator) -> LoModel:
    """Advance the LO by ``dt`` seconds.

    The new offset is the drifted base plus an independent draw of standard
    deviation ``nominal_frequency * white_fm_sigma / sqrt(dt)``, the mean of
    white FM over ``dt``; its Allan deviation is ``white_fm_sigma/sqrt(tau)``.
    """
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    base = lo.base_offset + lo.drift_rate * dt
    noise = 0.0
    if lo.white_fm_sigma > 0:
        noise = rng.normal(0.0, lo.nominal_frequency * lo.white_fm_sigma / math.sqrt(dt))
    return replace(lo, offset=base + noise, base_offset=base)


class LockRecord(NamedTuple):
    cycle: int
    time_s: float
    delta_nu_hz: float
    correction_hz: float
    f_est_hz: float


@dataclass
class LockTrace:
    method: str
    cycle_duration: float
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def delta_nu(self) -> np.ndarray:
        return self.column("delta_nu_hz")


def pid_error(s_plus: float, s_minus: float, T_R: float, P: float) -> float:
    """Error signal ``(s_plus - s_minus) / (4 T_R P)`` in Hz."""
    if not (T_R > 0 and P > 0):
        raise PreconditionError("T_R and P must be positive")
    return (s_plus - s_minus) / (4.0 * T_R * P)


@dataclass(frozen=True)
class PidGains:
    k_p: float = 0.5
    k_i: float = 0.1
    k_d: float = 0.0


def _advance(lo, dt, dead, rng):
    """Evolve through dead time then interrogation; returns the LO seen by the atoms."""
    if dead > 0:
        lo = lo_evolve(lo, dead, rng)
    return lo_evolve(lo, dt, rng)


def run_pid_lock(lo: LoModel, model: SignalModel, T_R: float, gains: PidGains | dict,
                 cycles: int, rng: np.random.Generator, dead_time: float = 0.0,
                 include_dead_time: bool = False) -> LockTrace:
    """Lock on the two half-maximum points ``f +- 1/(4 T_R)``.

    Each cycle makes two measurements of ``T_R`` and feeds the error through
    a PID whose output steps the command frequency.  With all gains zero the
    command never moves and ``delta_nu`` is the free-running LO.
    """
    if not T_R > 0:
        raise PreconditionError("T_R must be positive")
    if cycles < 0:
        raise PreconditionError("cycles must be >= 0")
    if isinstance(gains, dict):
        gains = PidGains(**gains)
    # peak-to-peak fringe amplitude; the error is then -(pi/2) x detuning
    P = model.contrast
    cycle_duration = 2 * T_R + (2 * dead_time if include_dead_time else 0.0)
    trace = LockTrace("pid", cycle_duration, metadata={
        "T_R_s": T_R, "k_p": gains.k_p, "k_i": gains.k_i, "k_d": gains.k_d})
    command = 0.0
    e_sum = e_prev = 0.0
    for j in range(1, cycles + 1):
        lo = _advance(lo, T_R, dead_time, rng)
        plus_offset = lo.offset
        s_plus = simulate_measurement(model, command + plus_offset + 0.25 / T_R, T_R, rng)
        lo = _advance(lo, T_R, dead_time, rng)
        s_minus = simulate_measurement(model, command + lo.offset - 0.25 / T_R, T_R, rng)
        delta_nu = command + 0.5 * (plus_offset + lo.offset) - model.f_c_true
        e = pid_error(s_plus, s_minus, T_R, P)
        e_sum += e
        # the error is a frequency correction, so the PID output steps the command
        step = gains.k_p * e + gains.k_i * e_sum + gains.k_d * (e - e_prev)
        e_prev = e
        command += step
        trace.records.append(LockRecord(j, j * cycle_duration, delta_nu, step, command))
    return trace


def run_bfe_lock(lo: LoModel, model: SignalModel, scheme: Scheme, config: BfeConfig | None,
                 cycles: int, rng: np.random.Generator, dead_time: float = 0.0,
                 include_dead_time: bool = False) -> LockTrace:
    """Lock by running a full BFE sequence per feedback cycle.

    No correction is applied inside a run.  Each run is centred on the
    previous estimate and the command jumps to the new estimate, so the
    correction is ``f_est^j - f_est^(j-1)`` and
    ``delta_nu_j = f_est^j + (mean LO offset over run j) - f_c``.
    """
    if cycles < 0:
        raise PreconditionError("cycles must be >= 0")
    config = BfeConfig(scheme, R=model.R) if config is None else replace(config, scheme=scheme)
    schedule = build_schedule(scheme)
    cycle_duration = total_time(schedule) + (len(schedule) * dead_time if include_dead_time else 0.0)
    trace = LockTrace("bfe", cycle_duration, metadata={"scheme": scheme.label()})
    f_est_prev = 0.0
    state = {"lo": lo}
    for j in range(1, cycles + 1):
        offsets, weights = [], []

        def measure(f, T):
            state["lo"] = _advance(state["lo"], T, dead_time, rng)
            offsets.append(state["lo"].offset)
            weights.append(T)
            return simulate_measurement(model, f + state["lo"].offset, T, rng)

        result = bfe_run(config, measure, model.shift_model, center=f_est_prev, rng=rng)
        f_est = result.f_est
        mean_offset = float(np.average(offsets, weights=weights))
        delta_nu = f_est + mean_offset - model.f_c_true
        trace.records.append(LockRecord(j, j * cycle_duration, delta_nu, f_est - f_est_prev, f_est))
        f_est_prev = f_est
    return trace
