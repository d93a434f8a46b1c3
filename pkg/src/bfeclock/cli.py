"""Command-line driver: estimate, lock, scaling and analyze.

Configuration is an INI file whose physical keys carry their unit, e.g.
``t_max_ms``.  Every output is a pure function of (config, seed): trial k
uses the generator ``default_rng([seed, k])`` whatever the worker count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, locking
from .adaptive import BfeConfig, bfe_run
from .errors import BfeError, ConfigurationError, TraceFormatError
from .posterior import FrequencyInterval
from .schedule import Scheme, build_schedule, fisher_precision, predicted_precision, total_time
from .signal import ConstantShift, SignalModel, TabulatedShift, simulate_measurement, \
    simulate_measurement_binomial, zero_shift

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

TRACE_COLUMNS = ("i", "T_i_s", "f_i_hz", "f_s_hz", "p_e", "f_est_hz", "delta_f_est_hz",
                 "t_j_s", "f_l_hz", "f_r_hz", "enhanced", "degenerate", "f_c_true_hz")
LOCK_COLUMNS = ("cycle", "time_s", "delta_nu_hz", "correction_hz")
ALLAN_COLUMNS = ("tau_s", "adev", "ci_low", "ci_high", "edf")

# every key each section accepts; anything else is a typo and rejected
KNOWN_KEYS = {
    "scheme": {"a", "g", "m_tilde", "m_b", "t_max_ms", "t_1_ms"},
    "signal": {"r", "f_c_true_hz", "contrast", "shift_hz", "shift_table", "noise"},
    "estimate": {"grid_size", "utility_quadrature_points", "lo_candidate_count",
                 "enhancement", "enhancement_trigger", "f_c_spread_hz", "initial_width_hz"},
    "lock": {"methods", "cycles", "duration_s", "t_r_ms", "k_p", "k_i", "k_d", "lo_offset_hz",
             "white_fm_sigma", "drift_hz_per_s", "nominal_frequency_hz", "dead_time_ms",
             "include_dead_time", "fit_tau_min_s", "fit_tau_max_s"},
    "scaling": {"schemes", "ramp_skip", "plateau_skip"},
    "analyze": {"nominal_frequency_hz", "fit_tau_min_s", "fit_tau_max_s"},
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(format(float(x), ".17g"))
        return x if math.isfinite(x) else None
    return x


# -- configuration ---------------------------------------------------------

class _Section:
    """Typed access to one INI section; errors name ``section.key``."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}

    def _raw(self, key, default):
        if key in self.data:
            return self.data[key]
        if default is _REQUIRED:
            raise ConfigurationError(f"missing key '{key}' in [{self.name}]", key=f"{self.name}.{key}")
        return default

    def _convert(self, key, default, conv, what):
        raw = self._raw(key, default)
        if raw is default:
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key} = {raw!r} is not {what}",
                                     key=f"{self.name}.{key}") from None

    def float(self, key, default=None):
        return self._convert(key, default, float, "a number")

    def int(self, key, default=None):
        return self._convert(key, default, int, "an integer")

    def str(self, key, default=None):
        return self._raw(key, default)

    def bool(self, key, default=None):
        return self._convert(key, default, _parse_bool, "a boolean")

    def ratio(self, key, default=None):
        return self._convert(key, default, _parse_ratio, "a number or ratio")


_REQUIRED = object()


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _parse_ratio(text):
    """``1.25`` or ``10/9``."""
    num, _, den = text.partition("/")
    return float(num) / float(den) if den else float(num)


def _scheme_from_tuple(text: str, t_max: float, key: str) -> Scheme:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigurationError(f"scheme '{text}' must be 'a, g, m_tilde, m_b'", key=key)
    try:
        return Scheme(_parse_ratio(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), t_max)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise ConfigurationError(str(exc), key=key) from None
        raise ConfigurationError(f"scheme '{text}' is malformed", key=key) from None


@dataclass
class RunConfig:
    scheme: Scheme | None = None
    signal: SignalModel = field(default_factory=SignalModel)
    noise: str = "gaussian"
    bfe: dict = field(default_factory=dict)
    f_c_spread: float = 10.0
    initial_width: float | None = None
    lock: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    analyze: dict = field(default_factory=dict)

    def bfe_config(self, scheme: Scheme, seed: int = 0) -> BfeConfig:
        return BfeConfig(scheme, R=self.signal.R, seed=seed, **self.bfe)


def load_config(path: str | None, need_scheme: bool = True) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}", key="--config") from None
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}", key="config") from None
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigurationError(f"unknown section [{section}]", key=section)
        for key in parser[section]:
            if key not in KNOWN_KEYS[section]:
                raise ConfigurationError(f"unknown key '{key}' in [{section}]", key=f"{section}.{key}")
    cfg = RunConfig()

    sc = _Section(parser, "scheme")
    if need_scheme or parser.has_section("scheme"):
        req = _REQUIRED
        t_1 = sc.float("t_1_ms")
        try:
            cfg.scheme = Scheme(sc.ratio("a", req), sc.int("g", 1), sc.int("m_tilde", 0),
                                sc.int("m_b", req), sc.float("t_max_ms", 20.0) * 1e-3,
                                None if t_1 is None else t_1 * 1e-3)
        except ConfigurationError as exc:
            if exc.key is not None and "." not in exc.key:
                exc.key = f"scheme.{exc.key}"
            raise

    sg = _Section(parser, "signal")
    shift = zero_shift
    if sg.str("shift_table") is not None:
        table = Path(sg.str("shift_table"))
        if not table.is_absolute() and path is not None:
            table = Path(path).parent / table
        try:
            shift = TabulatedShift.from_file(table)
        except OSError as exc:
            raise ConfigurationError(f"cannot read shift table: {exc.strerror}", key="signal.shift_table") from None
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), key="signal.shift_table") from None
    elif sg.float("shift_hz") is not None:
        shift = ConstantShift(sg.float("shift_hz"))
    try:
        cfg.signal = SignalModel(sg.float("f_c_true_hz", 0.0), sg.float("r", 1540.0), shift,
                                 sg.float("contrast", 1.0))
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key="signal") from None
    cfg.noise = sg.str("noise", "gaussian")
    if cfg.noise not in ("gaussian", "binomial"):
        raise ConfigurationError(f"noise must be gaussian or binomial, got {cfg.noise!r}", key="signal.noise")

    es = _Section(parser, "estimate")
    for key in ("grid_size", "utility_quadrature_points", "lo_candidate_count"):
        if es.int(key) is not None:
            cfg.bfe[key] = es.int(key)
    if es.bool("enhancement") is not None:
        cfg.bfe["enhancement_enabled"] = es.bool("enhancement")
    if es.str("enhancement_trigger") is not None:
        cfg.bfe["enhancement_trigger"] = es.str("enhancement_trigger")
    cfg.f_c_spread = es.float("f_c_spread_hz", 10.0)
    cfg.initial_width = es.float("initial_width_hz")
    if cfg.f_c_spread < 0:
        raise ConfigurationError("f_c_spread_hz must be >= 0", key="estimate.f_c_spread_hz")
    if cfg.scheme is not None:
        try:
            cfg.bfe_config(cfg.scheme)
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), key=f"estimate.{exc.key or ''}".rstrip(".")) from None

    lk = _Section(parser, "lock")
    methods = tuple(m.strip() for m in lk.str("methods", "pid, bfe").split(",") if m.strip())
    for m in methods:
        if m not in ("pid", "bfe"):
            raise ConfigurationError(f"unknown lock method {m!r}", key="lock.methods")
    cfg.lock = {
        "methods": methods,
        "cycles": lk.int("cycles", 300),
        "duration": lk.float("duration_s"),
        "t_r": lk.float("t_r_ms", 20.0) * 1e-3,
        "gains": locking.PidGains(lk.float("k_p", 0.5), lk.float("k_i", 0.1), lk.float("k_d", 0.0)),
        "dead_time": lk.float("dead_time_ms", 0.0) * 1e-3,
        "include_dead_time": lk.bool("include_dead_time", False),
        "fit_tau_min": lk.float("fit_tau_min_s", 0.0),
        "fit_tau_max": lk.float("fit_tau_max_s", math.inf),
    }
    if cfg.lock["duration"] is not None and not cfg.lock["duration"] > 0:
        raise ConfigurationError("duration_s must be positive", key="lock.duration_s")
    if cfg.lock["cycles"] < 0:
        raise ConfigurationError("cycles must be >= 0", key="lock.cycles")
    if not cfg.lock["t_r"] > 0:
        raise ConfigurationError("t_r_ms must be positive", key="lock.t_r_ms")
    try:
        cfg.lock["lo"] = locking.LoModel(lk.float("lo_offset_hz", 0.0), lk.float("white_fm_sigma", 0.0),
                                         lk.float("drift_hz_per_s", 0.0),
                                         lk.float("nominal_frequency_hz", locking.RB87_HYPERFINE_HZ))
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), key=f"lock.{exc.key}") from None

    sl = _Section(parser, "scaling")
    t_max = cfg.scheme.t_max if cfg.scheme is not None else 20e-3
    schemes = []
    for n, item in enumerate(s for s in sl.str("schemes", "").split(";") if s.strip()):
        schemes.append(_scheme_from_tuple(item, t_max, "scaling.schemes"))
    cfg.scaling = {"schemes": schemes, "ramp_skip": sl.int("ramp_skip", 3),
                   "plateau_skip": sl.int("plateau_skip", 5)}

    an = _Section(parser, "analyze")
    cfg.analyze = {
        "nominal_frequency": an.float("nominal_frequency_hz", locking.RB87_HYPERFINE_HZ),
        "fit_tau_min": an.float("fit_tau_min_s", 0.0),
        "fit_tau_max": an.float("fit_tau_max_s", math.inf),
    }
    if not cfg.analyze["nominal_frequency"] > 0:
        raise ConfigurationError("nominal_frequency_hz must be positive", key="analyze.nominal_frequency_hz")
    return cfg


# -- output ----------------------------------------------------------------

class Writer:
    """Writes header-first tables as CSV or JSON under one directory."""

    def __init__(self, out: Path, fmt_name: str):
        self.out = out
        self.format = fmt_name
        out.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns, rows, metadata=None) -> Path:
        if self.format == "json":
            path = self.out / f"{stem}.json"
            doc = {"columns": list(columns),
                   "rows": [[_json_value(v) for v in row] for row in rows]}
            if metadata:
                doc["metadata"] = {k: _json_value(v) for k, v in metadata.items()}
            path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        else:
            path = self.out / f"{stem}.csv"
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
            path.write_text(buf.getvalue())
        return path


def _fan_out(func, jobs, workers: int):
    """Map in order; results are collected by trial id whatever the pool does."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


# -- estimate --------------------------------------------------------------

def _measurement(cfg: RunConfig, model: SignalModel, rng):
    if cfg.noise == "binomial":
        return lambda f, T: simulate_measurement_binomial(model, f, T, rng)
    return lambda f, T: simulate_measurement(model, f, T, rng)


def run_trial(args):
    """One BFE trial; returns the trace rows and the true clock frequency."""
    cfg, scheme, seed, k = args
    rng = np.random.default_rng([seed, k])
    f_c = cfg.signal.f_c_true + cfg.f_c_spread * (rng.random() - 0.5)
    model = replace(cfg.signal, f_c_true=f_c)
    config = cfg.bfe_config(scheme, seed=k)
    if cfg.initial_width is not None:
        config = replace(config, initial_interval=FrequencyInterval.centered(
            cfg.signal.f_c_true, cfg.initial_width))
    trace = bfe_run(config, _measurement(cfg, model, rng), model.shift_model,
                    center=cfg.signal.f_c_true, rng=rng)
    rows = [astuple(r) + (f_c,) for r in trace.records]
    return rows, f_c


def _ensemble(cfg: RunConfig, scheme: Scheme, seed: int, trials: int, workers: int):
    jobs = [(cfg, scheme, seed, k) for k in range(trials)]
    return _fan_out(run_trial, jobs, workers)


def _aggregate(scheme: Scheme, results, R: float):
    errors = np.array([[row[5] - f_c for row in rows] for rows, f_c in results])
    widths = np.array([[row[6] for row in rows] for rows, _ in results])
    sched = build_schedule(scheme)
    t_j = sched.cumulative()
    std = errors.std(axis=0, ddof=1) if len(results) > 1 else np.full(len(t_j), math.nan)
    fisher = fisher_precision(sched.times, R)
    rows = [(i + 1, t_j[i], sched.times[i], std[i], errors[:, i].mean(), widths[:, i].mean(), fisher[i])
            for i in range(len(t_j))]
    return rows, t_j, std


AGGREGATE_COLUMNS = ("i", "t_j_s", "T_i_s", "std_hz", "mean_error_hz", "mean_delta_f_est_hz", "fisher_hz")


def _ramp_fit(t_j, std, scheme: Scheme, skip: int):
    lo, hi = skip, scheme.ramp_end
    try:
        return analysis.fit_loglog_slope(np.column_stack([t_j, std]), (lo, hi))
    except BfeError:
        return analysis.LogLogFit(math.nan, math.nan, math.nan)


def _plateau_fit(t_j, std, scheme: Scheme, skip: int):
    lo = scheme.ramp_end - 1 + skip
    try:
        return analysis.fit_loglog_slope(np.column_stack([t_j, std]), (lo, len(t_j)))
    except BfeError:
        return analysis.LogLogFit(math.nan, math.nan, math.nan)


def cmd_estimate(cfg: RunConfig, args, writer: Writer) -> int:
    scheme = cfg.scheme
    results = _ensemble(cfg, scheme, args.seed, args.trials, args.workers)
    for k, (rows, _) in enumerate(results):
        writer.table(f"trace_{k:04d}", TRACE_COLUMNS, rows)
    rows, t_j, std = _aggregate(scheme, results, cfg.signal.R)
    writer.table("aggregate", AGGREGATE_COLUMNS, rows)
    fit = _ramp_fit(t_j, std, scheme, cfg.scaling["ramp_skip"])
    summary = [
        ("scheme", scheme.label()), ("trials", args.trials), ("seed", args.seed),
        ("total_time_s", total_time(build_schedule(scheme))),
        ("predicted_precision_hz", predicted_precision(scheme, cfg.signal.R)),
        ("final_std_hz", float(std[-1])), ("ramp_slope", fit.slope), ("ramp_residual", fit.residual),
    ]
    writer.table("summary", ("quantity", "value"), summary)
    return EXIT_OK


# -- scaling ---------------------------------------------------------------

def cmd_scaling(cfg: RunConfig, args, writer: Writer) -> int:
    schemes = cfg.scaling["schemes"] or ([cfg.scheme] if cfg.scheme is not None else [])
    if not schemes:
        raise ConfigurationError("no schemes: set [scaling] schemes or [scheme]", key="scaling.schemes")
    curve_rows, fit_rows = [], []
    for s_id, scheme in enumerate(schemes):
        results = _ensemble(cfg, scheme, args.seed, args.trials, args.workers)
        rows, t_j, std = _aggregate(scheme, results, cfg.signal.R)
        curve_rows += [(s_id, scheme.label()) + row[:2] + (row[3], row[6]) for row in rows]
        ramp = _ramp_fit(t_j, std, scheme, cfg.scaling["ramp_skip"])
        region = [("ramp", ramp)]
        if scheme.m_tilde > 0:
            region.append(("plateau", _plateau_fit(t_j, std, scheme, cfg.scaling["plateau_skip"])))
        for name, fit in region:
            fit_rows.append((s_id, scheme.label(), name, fit.slope, fit.intercept, fit.residual,
                             predicted_precision(scheme, cfg.signal.R), float(std[-1])))
    writer.table("scaling", ("scheme_id", "scheme", "i", "t_j_s", "std_hz", "fisher_hz"), curve_rows)
    writer.table("scaling_fits", ("scheme_id", "scheme", "region", "slope", "intercept", "residual",
                                  "predicted_precision_hz", "final_std_hz"), fit_rows)
    return EXIT_OK


# -- lock ------------------------------------------------------------------

def run_lock(args):
    """One locking run of ``method``; deterministic in (seed, run)."""
    cfg, method, seed, run = args
    rng = np.random.default_rng([seed, run, 0 if method == "pid" else 1])
    lk = cfg.lock
    cycles = lock_cycles(cfg, method)
    if method == "pid":
        return locking.run_pid_lock(lk["lo"], cfg.signal, lk["t_r"], lk["gains"], cycles, rng,
                                    lk["dead_time"], lk["include_dead_time"])
    return locking.run_bfe_lock(lk["lo"], cfg.signal, cfg.scheme, cfg.bfe_config(cfg.scheme),
                                cycles, rng, lk["dead_time"], lk["include_dead_time"])


def lock_cycles(cfg: RunConfig, method: str) -> int:
    """``cycles``, or as many cycles as fit in ``duration_s`` when that is set."""
    lk = cfg.lock
    if lk["duration"] is None:
        return lk["cycles"]
    if method == "pid":
        t_c = 2 * lk["t_r"] + (2 * lk["dead_time"] if lk["include_dead_time"] else 0.0)
    else:
        sched = build_schedule(cfg.scheme)
        t_c = total_time(sched) + (len(sched) * lk["dead_time"] if lk["include_dead_time"] else 0.0)
    return int(lk["duration"] / t_c + 1e-9)


def lock_coefficient(trace, nominal: float, tau_min: float, tau_max: float):
    """White-FM coefficient (fractional, at 1 s) and Allan points of a lock trace."""
    if len(trace) < analysis.MIN_SAMPLES:
        return math.nan, []
    series = analysis.FractionalSeries.from_hz(trace.delta_nu, trace.cycle_duration, nominal)
    points = [p for p in analysis.allan_deviation(series) if tau_min <= p.tau <= tau_max]
    try:
        return analysis.fit_white_fm_coefficient(points), points
    except BfeError:
        return math.nan, points


def cmd_lock(cfg: RunConfig, args, writer: Writer) -> int:
    lk = cfg.lock
    nominal = lk["lo"].nominal_frequency
    coeffs = {}
    summary = []
    for method in lk["methods"]:
        jobs = [(cfg, method, args.seed, r) for r in range(args.trials)]
        traces = _fan_out(run_lock, jobs, args.workers)
        per_run, all_points = [], []
        for r, trace in enumerate(traces):
            rows = [r_[:4] for r_ in trace.records]
            writer.table(f"lock_{method}_{r:04d}", LOCK_COLUMNS, rows,
                         metadata={"cycle_duration_s": trace.cycle_duration, "method": method})
            c, points = lock_coefficient(trace, nominal, lk["fit_tau_min"], lk["fit_tau_max"])
            per_run.append(c)
            all_points.append(points)
        coeffs[method] = np.array(per_run)
        if all_points and all_points[0]:
            taus = [p.tau for p in all_points[0]]
            adev = np.mean([[p.adev for p in pts] for pts in all_points], axis=0)
            rows = [(t, a) for t, a in zip(taus, adev)]
        else:
            rows = []
        writer.table(f"allan_{method}", ("tau_s", "adev"), rows)
        c = coeffs[method]
        sem = c.std(ddof=1) / math.sqrt(c.size) if c.size > 1 else math.nan
        summary += [(f"{method}_coefficient", float(np.mean(c)) if c.size else math.nan),
                    (f"{method}_coefficient_sem", sem),
                    (f"{method}_cycle_duration_s", traces[0].cycle_duration if traces else math.nan)]
    if {"pid", "bfe"} <= set(coeffs) and coeffs["pid"].size:
        d = np.array([analysis.improvement_db(a, b) if a > 0 and b > 0 else math.nan
                      for a, b in zip(coeffs["pid"], coeffs["bfe"])])
        mean_db = float(np.mean(d))
        sem_db = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.nan
        summary += [("improvement_db", mean_db), ("improvement_db_sem", sem_db)]
    writer.table("lock_summary", ("quantity", "value"), summary)
    return EXIT_OK


# -- analyze ---------------------------------------------------------------

def read_lock_trace(path: Path):
    """Parse a lock trace CSV; returns (time_s, delta_nu_hz) arrays."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise TraceFormatError(f"cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise TraceFormatError(f"{path} is empty", line=1)
    header = [c.strip() for c in lines[0].split(",")]
    if tuple(header[:len(LOCK_COLUMNS)]) != LOCK_COLUMNS:
        raise TraceFormatError(f"{path}: header must start with {','.join(LOCK_COLUMNS)}", line=1)
    time_s, dnu = [], []
    for n, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise TraceFormatError(f"{path}: expected {len(header)} fields, got {len(cells)}", line=n)
        try:
            values = [float(c) for c in cells[:len(LOCK_COLUMNS)]]
        except ValueError:
            raise TraceFormatError(f"{path}: non-numeric field", line=n) from None
        if not all(math.isfinite(v) for v in values):
            raise TraceFormatError(f"{path}: non-finite field", line=n)
        time_s.append(values[1])
        dnu.append(values[2])
    if len(dnu) < analysis.MIN_SAMPLES:
        raise TraceFormatError(f"{path}: need at least {analysis.MIN_SAMPLES} rows", line=len(lines))
    time_s = np.array(time_s)
    steps = np.diff(time_s)
    tau0 = float(time_s[0])
    bad = np.flatnonzero(np.abs(steps - tau0) > 1e-9 * max(abs(tau0), 1.0))
    if not tau0 > 0 or bad.size:
        raise TraceFormatError(f"{path}: time_s must advance in uniform steps from one cycle",
                               line=int(bad[0]) + 3 if bad.size else 2)
    return tau0, np.array(dnu)


def cmd_analyze(cfg: RunConfig, args, writer: Writer) -> int:
    if not args.inputs:
        raise ConfigurationError("analyze needs at least one trace file", key="inputs")
    an = cfg.analyze
    summary = []
    for n, path in enumerate(args.inputs):
        tau0, dnu = read_lock_trace(Path(path))
        series = analysis.FractionalSeries.from_hz(dnu, tau0, an["nominal_frequency"])
        points = analysis.allan_deviation(series)
        writer.table(f"allan_{n:04d}", ALLAN_COLUMNS,
                     [(p.tau, p.adev, p.ci_low, p.ci_high, p.edf) for p in points])
        window = [p for p in points if an["fit_tau_min"] <= p.tau <= an["fit_tau_max"]]
        try:
            coeff = analysis.fit_white_fm_coefficient(window)
            fit = analysis.fit_loglog_slope([(p.tau, p.adev) for p in window])
        except BfeError:
            coeff, fit = math.nan, analysis.LogLogFit(math.nan, math.nan, math.nan)
        summary.append((n, Path(path).name, len(dnu), tau0, coeff, fit.slope, fit.residual))
    writer.table("analyze_summary", ("file_id", "file", "samples", "tau0_s", "coefficient",
                                     "slope", "residual"), summary)
    return EXIT_OK


# -- entry point -----------------------------------------------------------

COMMANDS = {"estimate": cmd_estimate, "lock": cmd_lock, "scaling": cmd_scaling, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bfeclock", description="Bayesian frequency estimation clock simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=1, help="trials (estimate, scaling) or runs (lock)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "analyze":
            p.add_argument("inputs", nargs="*", help="lock trace CSV files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.trials < 0 or args.workers < 1 or args.seed < 0:
            raise ConfigurationError("--trials and --seed must be >= 0 and --workers >= 1", key="--trials")
        cfg = load_config(args.config, need_scheme=args.command == "estimate")
        if args.command == "lock" and "bfe" in cfg.lock["methods"] and cfg.scheme is None:
            raise ConfigurationError("the bfe lock needs a [scheme] section", key="scheme")
        if args.command == "estimate" and args.trials < 1:
            raise ConfigurationError("--trials must be >= 1 for estimate", key="--trials")
        writer = Writer(Path(args.out), args.format)
        return COMMANDS[args.command](cfg, args, writer)
    except (ConfigurationError, TraceFormatError) as exc:
        key = getattr(exc, "key", None)
        where = f" [{key}]" if key else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001  any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
