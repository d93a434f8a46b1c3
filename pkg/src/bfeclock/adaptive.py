"""Adaptive Bayesian frequency estimation.

Each iteration re-centres a window of width ``1/T_i`` on the current
estimate, resets the prior to a Gaussian of the current width, picks the LO
frequency that maximizes the expected Shannon-information gain, measures,
and performs a grid Bayes update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import entr

from . import posterior as post
from .errors import ConfigurationError, DegenerateUpdateError, PreconditionError
from .posterior import FrequencyInterval, GridDistribution
from .schedule import Scheme, build_schedule
from .signal import TWO_PI, gaussian_log_likelihood, zero_shift

log = logging.getLogger(__name__)

MIN_QUADRATURE_POINTS = 8
_TIE_RTOL = 1e-9
_TIE_ATOL = 1e-12
# utilities this close to the maximum are treated as equal, since the
# discretized p_e integral is not more accurate than that
NEAR_TIE_RTOL = 1e-3
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class BfeConfig:
    scheme: Scheme
    R: float = 1540.0
    initial_interval: FrequencyInterval | None = None
    grid_size: int = post.DEFAULT_GRID_SIZE
    # 128 nodes keep the quadrature error below the near-tie band for
    # posteriors down to the grid spacing
    utility_quadrature_points: int = 128
    lo_candidate_count: int = 128
    enhancement_enabled: bool = True
    # "plateau": perturb while T_i == t_max; "literal": only when T_i > t_max
    enhancement_trigger: str = "plateau"
    seed: int = 0
    # "utility": maximize the information gain; "mid_fringe": f_est + 1/(4 T_i)
    lo_selection: str = "utility"

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError("R must be positive", key="r")
        if self.utility_quadrature_points < MIN_QUADRATURE_POINTS:
            raise ConfigurationError(
                f"utility_quadrature_points must be >= {MIN_QUADRATURE_POINTS}",
                key="utility_quadrature_points")
        if self.lo_candidate_count < 1:
            raise ConfigurationError("lo_candidate_count must be >= 1", key="lo_candidate_count")
        if self.grid_size < post.MIN_GRID_SIZE:
            raise ConfigurationError(f"grid_size must be >= {post.MIN_GRID_SIZE}", key="grid_size")
        if self.enhancement_trigger not in ("plateau", "literal"):
            raise ConfigurationError("enhancement_trigger must be 'plateau' or 'literal'",
                                     key="enhancement_trigger")
        if self.lo_selection not in ("utility", "mid_fringe"):
            raise ConfigurationError("lo_selection must be 'utility' or 'mid_fringe'", key="lo_selection")
        if self.initial_interval is not None:
            t_1 = build_schedule(self.scheme).t_1
            if self.initial_interval.width() * t_1 < 1 - 1e-9:
                raise ConfigurationError("initial interval must be at least 1/T_1 wide",
                                         key="initial_interval")

    def interval_for(self, t_1: float, center: float = 0.0) -> FrequencyInterval:
        if self.initial_interval is not None:
            return self.initial_interval
        return FrequencyInterval.centered(center, 1.0 / t_1)


@dataclass(frozen=True)
class IterationRecord:
    i: int
    T_i: float
    f_i: float
    f_s: float
    p_e: float
    f_est: float
    delta_f_est: float
    t_j: float
    f_l: float
    f_r: float
    enhanced: bool = False
    degenerate: bool = False


@dataclass
class EstimationTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def f_est(self) -> float:
        return self.records[-1].f_est

    @property
    def delta_f_est(self) -> float:
        return self.records[-1].delta_f_est

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def pe_nodes(R: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes for the p_e integral on ``[eps, 1 - eps]``.

    Nodes are uniform in the fringe phase ``theta`` with
    ``p_e = sin(theta/2)**2``; in that variable the likelihood width is the
    constant ``1/sqrt(R)``, so a fixed node count resolves it at both fringe
    extremes and mid-fringe.  Returns nodes and trapezoid weights in p_e.
    """
    eps = 0.5 / R
    edge = 2.0 * np.arcsin(np.sqrt(eps))
    theta = np.linspace(edge, np.pi - edge, points)
    weights = post.trapezoid_weights(points, theta[1] - theta[0]) * 0.5 * np.sin(theta)
    return np.sin(0.5 * theta) ** 2, weights


def _xlogx(x):
    # x ln x with 0 ln 0 = 0; FFT round-off may leave tiny negatives
    return -entr(np.maximum(x, 0.0))


def likelihood_table(mu, R: float, quadrature_points: int) -> np.ndarray:
    """Ensemble likelihood density at every p_e node for fringe values ``mu``.

    Uses the observed-p_e width ``sqrt(p_e (1 - p_e) / R)`` on the nodes of
    :func:`pe_nodes`.  Returns shape ``(quadrature_points,) + mu.shape``.
    """
    q, _ = pe_nodes(R, quadrature_points)
    mu = np.asarray(mu, dtype=float)
    shape = (-1,) + (1,) * mu.ndim
    sigma = np.sqrt(q * (1.0 - q) / R).reshape(shape)
    z = (q.reshape(shape) - mu) / sigma
    return np.exp(-0.5 * z * z) / (np.sqrt(TWO_PI) * sigma)


def _prior_terms(prior: GridDistribution):
    """Normalized prior masses ``pi`` and ``pi * (H + ln pi)`` on the nodes."""
    pi = prior.quadrature * prior.weights
    pi = pi / pi.sum()
    h = float(entr(pi).sum())
    return pi, _xlogx(pi) + h * pi


def _combine(e, ell_log_ell, z_term, v):
    # sum_m v_m [sum pi l ln l - e ln e] plus the prior-entropy term; the
    # unnormalized p_e density can push this slightly below zero at the
    # fringe extremes, where no information is gained anyway
    return np.maximum(z_term + v @ (ell_log_ell - _xlogx(e)), 0.0)


def utility_curve(prior: GridDistribution, candidates, T_R: float, R: float,
                  quadrature_points: int = 64, f_s: float = 0.0) -> np.ndarray:
    """Expected information gain (nats) for each LO frequency in ``candidates``.

    For every p_e node the hypothetical posterior's entropy is compared with
    the prior's, weighted by the node's evidence, and the p_e integral is
    summed with the weights of :func:`pe_nodes`.  Entropies are taken over
    the grid masses.  The hypothetical posteriors never need forming: with
    ``e_m`` the evidence of node m,

        U = sum_m v_m [e_m H + sum_f pi l_m ln pi + sum_f pi l_m ln l_m - e_m ln e_m].
    """
    if quadrature_points < MIN_QUADRATURE_POINTS:
        raise PreconditionError(f"quadrature_points must be >= {MIN_QUADRATURE_POINTS}")
    candidates = np.atleast_1d(np.asarray(candidates, dtype=float))
    _, v = pe_nodes(R, quadrature_points)
    pi, b = _prior_terms(prior)
    support = pi > 0
    x, pi, b = prior.nodes[support], pi[support], b[support]

    out = np.empty(candidates.size)
    chunk = max(1, _CHUNK_ELEMENTS // (quadrature_points * x.size))
    for start in range(0, candidates.size, chunk):
        f = candidates[start:start + chunk]
        mu = 0.5 * (1.0 + np.cos(TWO_PI * (f[:, None] - x[None, :] + f_s) * T_R))
        ell = likelihood_table(mu, R, quadrature_points)
        z_term = np.tensordot(v, ell, axes=1) @ b
        out[start:start + chunk] = _combine(ell @ pi, _xlogx(ell) @ pi, z_term, v)
    return out


def utility(prior: GridDistribution, f: float, T_R: float, R: float,
            quadrature_points: int = 64, f_s: float = 0.0) -> float:
    return float(utility_curve(prior, [f], T_R, R, quadrature_points, f_s)[0])


class PeriodicUtility:
    """Utility at lattice LO frequencies via circular convolution.

    Valid when the prior's grid spans exactly one fringe period, i.e.
    ``width * T_R == 1``; then the readout distribution depends on
    ``f - f_c`` only through the lattice offset modulo ``n = grid_size - 1``.
    Kernels depend only on ``(R, quadrature_points, grid_size)``.
    """

    def __init__(self, R: float, quadrature_points: int, grid_size: int):
        self.R = R
        self.points = quadrature_points
        self.n = grid_size - 1
        mu = 0.5 * (1.0 + np.cos(TWO_PI * np.arange(self.n) / self.n))
        ell = likelihood_table(mu, R, quadrature_points)
        self._v = pe_nodes(R, quadrature_points)[1]
        # likelihood and l ln l kernels stacked on one axis
        self._kernel_hat = np.fft.fft(np.concatenate([ell, _xlogx(ell)]), axis=1)
        self._z_hat = np.fft.fft(self._v @ ell)
        self._folded = {}

    def _kernels_for(self, count: int) -> np.ndarray:
        # spectrum bins l*count + r rearranged to shape (r, kernel, l) so the
        # fold over l becomes a batched matrix-vector product
        if count not in self._folded:
            k = self._kernel_hat.reshape(2 * self.points, self.n // count, count)
            self._folded[count] = np.ascontiguousarray(k.transpose(2, 0, 1))
        return self._folded[count]

    @staticmethod
    def applies(prior: GridDistribution, T_R: float) -> bool:
        return abs(prior.interval.width() * T_R - 1.0) < 1e-9

    def matches(self, R: float, quadrature_points: int, grid_size: int) -> bool:
        return (self.R, self.points, self.n) == (R, quadrature_points, grid_size - 1)

    def scan(self, prior: GridDistribution, count: int | None = None) -> np.ndarray:
        """Utilities at ``f_l + s * width / count`` for ``s = 0..count-1``.

        ``count`` must divide ``grid_size - 1``; the default evaluates every
        lattice point.
        """
        if prior.grid_size - 1 != self.n:
            raise PreconditionError("prior grid does not match the cached kernels")
        count = self.n if count is None else count
        if self.n % count:
            raise PreconditionError(f"{count} candidates do not divide the {self.n}-point lattice")
        stride = self.n // count
        pi, b = _prior_terms(prior)

        def periodic(u):
            # first and last nodes are the same point of the period
            out = u[:-1].copy()
            out[0] += u[-1]
            return np.fft.fft(out)

        pi_hat, b_hat = periodic(pi), periodic(b)
        # every stride-th output of the circular convolution: fold the
        # product spectrum onto `count` bins, then invert
        folded = np.matmul(self._kernels_for(count), pi_hat.reshape(stride, count).T[:, :, None])
        out = np.fft.ifft(folded[:, :, 0].T, axis=1).real / stride
        z_fold = (self._z_hat * b_hat).reshape(stride, count).sum(axis=0)
        z_term = np.fft.ifft(z_fold).real / stride
        return _combine(out[:self.points], out[self.points:], z_term, self._v)


@lru_cache(maxsize=8)
def periodic_utility(R: float, quadrature_points: int, grid_size: int) -> PeriodicUtility:
    return PeriodicUtility(R, quadrature_points, grid_size)


def _argmax_lowest(values: np.ndarray) -> int:
    top = values.max()
    tol = _TIE_ATOL + _TIE_RTOL * abs(top)
    return int(np.flatnonzero(values >= top - tol)[0])


def choose_candidate(values: np.ndarray, candidates: np.ndarray, f_est: float, T_R: float) -> int:
    """Index of the selected LO candidate.

    Candidates within ``NEAR_TIE_RTOL`` of the best utility form a near-tie
    set; within it the one with the steepest fringe slope at ``f_est`` wins,
    which keeps the LO off the fringe extremes where the readout is
    clipped.  Exact ties go to the lowest frequency.
    """
    top = values.max()
    if top <= _TIE_ATOL:
        return _argmax_lowest(values)
    near = np.flatnonzero(values >= top * (1.0 - NEAR_TIE_RTOL) - _TIE_ATOL)
    slope = np.abs(np.sin(TWO_PI * (candidates[near] - f_est) * T_R))
    return int(near[_argmax_lowest(slope)])


def lo_candidates(interval: FrequencyInterval, count: int) -> np.ndarray:
    """``count`` frequencies spaced by ``width/count`` starting at ``f_l``."""
    return interval.f_l + interval.width() * np.arange(count) / count


def select_lo_frequency(prior: GridDistribution, T_R: float, R: float, config: BfeConfig,
                        periodic: PeriodicUtility | None = None) -> float:
    """LO frequency maximizing :func:`utility` (see :func:`choose_candidate`)."""
    k = config.lo_candidate_count
    n = prior.grid_size - 1
    if PeriodicUtility.applies(prior, T_R) and n % k == 0:
        if periodic is None or not periodic.matches(R, config.utility_quadrature_points, prior.grid_size):
            periodic = periodic_utility(R, config.utility_quadrature_points, prior.grid_size)
        values = periodic.scan(prior, k)
    else:
        values = utility_curve(prior, lo_candidates(prior.interval, k), T_R, R,
                               config.utility_quadrature_points)
    candidates = lo_candidates(prior.interval, k)
    return float(candidates[choose_candidate(values, candidates, post.mean(prior), T_R)])


def random_enhancement(f: float, delta_f_est: float, rng: np.random.Generator) -> float:
    """Perturb ``f`` by a normal draw of standard deviation ``2 * delta_f_est``."""
    if not delta_f_est >= 0:
        raise PreconditionError("delta_f_est must be non-negative")
    return float(f + rng.normal(0.0, 2.0 * delta_f_est))


def _enhance(config: BfeConfig, i: int, T_i: float) -> bool:
    if not config.enhancement_enabled or i == 1:
        return False
    if config.enhancement_trigger == "literal":
        return T_i > config.scheme.t_max
    return i >= config.scheme.ramp_end


def bfe_run(config: BfeConfig, measure: Callable[[float, float], float],
            shift_model: Callable = zero_shift, center: float = 0.0,
            rng: np.random.Generator | None = None) -> EstimationTrace:
    """Run all ``M_b`` iterations against ``measure(f, T_R) -> p_e``.

    ``shift_model`` is the known (calibrated) shift ``f_s(T_R)``; the request
    sent to ``measure`` is displaced so that the shift cancels.  ``center``
    positions the default initial window when ``config.initial_interval`` is
    unset.
    """
    schedule = build_schedule(config.scheme)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    kernels = periodic_utility(config.R, config.utility_quadrature_points, config.grid_size)
    interval = config.interval_for(schedule.t_1, center)
    prior = post.uniform_prior(interval, config.grid_size)
    f_est = delta_f = float("nan")
    t_j = 0.0
    trace = EstimationTrace()
    for i, T_i in enumerate(schedule.times, start=1):
        T_i = float(T_i)
        if i > 1:
            interval = FrequencyInterval.centered(f_est, 1.0 / T_i)
            width = max(delta_f, interval.width() / (config.grid_size - 1))
            prior = post.gaussian_prior(f_est, width, interval, config.grid_size)
        if config.lo_selection == "mid_fringe":
            f = post.mean(prior) + 0.25 / T_i
        else:
            f = select_lo_frequency(prior, T_i, config.R, config, kernels)
        enhanced = _enhance(config, i, T_i)
        if enhanced:
            f = random_enhancement(f, delta_f, rng)
        f_s = float(shift_model(T_i))
        p_e = float(measure(f - f_s, T_i))
        degenerate = False
        try:
            posterior = post.bayes_update_log(
                prior, lambda x: gaussian_log_likelihood(p_e, x, f, 0.0, T_i, config.R))
        except DegenerateUpdateError:
            log.warning("iteration %d: degenerate update, keeping the prior", i)
            posterior, degenerate = prior, True
        f_est, delta_f = post.mean(posterior), post.std(posterior)
        t_j += T_i
        trace.records.append(IterationRecord(
            i, T_i, f, f_s, p_e, f_est, delta_f, t_j,
            interval.f_l, interval.f_r, enhanced, degenerate))
    return trace


def seeded(config: BfeConfig, seed: int) -> BfeConfig:
    return replace(config, seed=seed)
