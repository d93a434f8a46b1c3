"""Grid representation of a probability density over the clock frequency.

All densities live on a uniform grid spanning a closed interval, and every
integral is a trapezoidal sum over that grid.  Distributions are immutable;
each operation returns a new, normalized :class:`GridDistribution`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import entr

from .errors import ConfigurationError, DegenerateUpdateError, PreconditionError, RegridError

MIN_GRID_SIZE = 16
DEFAULT_GRID_SIZE = 2049
DEGENERATE_MASS = 1e-300


@dataclass(frozen=True)
class FrequencyInterval:
    f_l: float
    f_r: float

    def __post_init__(self):
        if not (np.isfinite(self.f_l) and np.isfinite(self.f_r)) or not self.f_l < self.f_r:
            raise ConfigurationError(f"invalid frequency interval [{self.f_l}, {self.f_r}]")

    @classmethod
    def centered(cls, center: float, width: float) -> FrequencyInterval:
        return cls(center - 0.5 * width, center + 0.5 * width)

    def width(self) -> float:
        return self.f_r - self.f_l

    @property
    def center(self) -> float:
        return 0.5 * (self.f_l + self.f_r)

    def contains(self, f: float) -> bool:
        return self.f_l <= f <= self.f_r


def trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GridDistribution:
    """Normalized density sampled on ``len(nodes)`` equally spaced nodes.

    Construct through :meth:`from_weights` (or the prior factories) so the
    normalization invariant holds; the raw constructor trusts its input.
    """

    interval: FrequencyInterval
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_weights(cls, interval: FrequencyInterval, weights) -> GridDistribution:
        weights = np.asarray(weights, dtype=float)
        n = weights.size
        if n < MIN_GRID_SIZE:
            raise ConfigurationError(f"grid_size must be >= {MIN_GRID_SIZE}, got {n}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise PreconditionError("density values must be finite and non-negative")
        nodes = np.linspace(interval.f_l, interval.f_r, n)
        mass = float(trapezoid_weights(n, interval.width() / (n - 1)) @ weights)
        if not mass > DEGENERATE_MASS:
            raise DegenerateUpdateError(f"total probability mass {mass:g} is zero")
        return cls(interval, _frozen(nodes), _frozen(weights / mass))

    @property
    def grid_size(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return self.interval.width() / (self.grid_size - 1)

    @property
    def quadrature(self) -> np.ndarray:
        """Trapezoid weights matching :attr:`nodes`."""
        return trapezoid_weights(self.grid_size, self.spacing)

    def integral(self) -> float:
        return float(self.quadrature @ self.weights)

    def pdf(self, f) -> np.ndarray:
        """Linear interpolation of the density; zero outside the interval."""
        return np.interp(f, self.nodes, self.weights, left=0.0, right=0.0)


def _check_grid_size(grid_size: int) -> int:
    if int(grid_size) != grid_size or grid_size < MIN_GRID_SIZE:
        raise ConfigurationError(f"grid_size must be an integer >= {MIN_GRID_SIZE}, got {grid_size}")
    return int(grid_size)


def uniform_prior(interval: FrequencyInterval, grid_size: int = DEFAULT_GRID_SIZE) -> GridDistribution:
    n = _check_grid_size(grid_size)
    return GridDistribution.from_weights(interval, np.full(n, 1.0 / interval.width()))


def gaussian_prior(mu: float, sigma: float, interval: FrequencyInterval,
                   grid_size: int = DEFAULT_GRID_SIZE) -> GridDistribution:
    """Gaussian of mean ``mu`` and width ``sigma`` truncated to ``interval``."""
    n = _check_grid_size(grid_size)
    if not sigma > 0:
        raise PreconditionError(f"sigma must be positive, got {sigma}")
    if not interval.contains(mu):
        raise PreconditionError(f"mu={mu} lies outside [{interval.f_l}, {interval.f_r}]")
    nodes = np.linspace(interval.f_l, interval.f_r, n)
    # the peak node is exp(0) = 1, so the mass never underflows
    z = (nodes - mu) / sigma
    logw = -0.5 * z * z
    return GridDistribution.from_weights(interval, np.exp(logw - logw.max()))


def bayes_update(prior: GridDistribution, likelihood_at: Callable[[np.ndarray], np.ndarray]) -> GridDistribution:
    """Multiply ``prior`` by ``likelihood_at(nodes)`` and renormalize.

    ``likelihood_at`` is called once with the full node array.  Raises
    :class:`DegenerateUpdateError` when the product carries no mass.
    """
    like = np.broadcast_to(np.asarray(likelihood_at(prior.nodes), dtype=float), prior.nodes.shape)
    if not np.all(np.isfinite(like)) or np.any(like < 0):
        raise PreconditionError("likelihood must be finite and non-negative on every node")
    return GridDistribution.from_weights(prior.interval, like * prior.weights)


def bayes_update_log(prior: GridDistribution, log_likelihood_at: Callable[[np.ndarray], np.ndarray]) -> GridDistribution:
    """Same as :func:`bayes_update` for a log-likelihood; immune to underflow."""
    logl = np.broadcast_to(np.asarray(log_likelihood_at(prior.nodes), dtype=float), prior.nodes.shape)
    if np.any(np.isnan(logl)) or np.any(logl == np.inf):
        raise PreconditionError("log-likelihood must be < +inf and not NaN")
    support = prior.weights > 0
    if not np.any(np.isfinite(logl[support])):
        raise DegenerateUpdateError("likelihood vanishes on the support of the prior")
    shifted = np.where(support, logl, -np.inf)
    shifted = shifted - shifted[np.isfinite(shifted)].max()
    return GridDistribution.from_weights(prior.interval, np.exp(shifted) * prior.weights)


def mean(dist: GridDistribution) -> float:
    return float(dist.quadrature @ (dist.nodes * dist.weights))


def std(dist: GridDistribution) -> float:
    # central moment about the mean: no cancellation against f_est**2
    m = mean(dist)
    var = float(dist.quadrature @ ((dist.nodes - m) ** 2 * dist.weights))
    return float(np.sqrt(max(var, 0.0)))


def entropy(dist: GridDistribution) -> float:
    """Differential entropy in nats, ``-int p ln p``."""
    return float(dist.quadrature @ entr(dist.weights))


def regrid(dist: GridDistribution, new_interval: FrequencyInterval,
           grid_size: int = DEFAULT_GRID_SIZE) -> GridDistribution:
    n = _check_grid_size(grid_size)
    if new_interval.f_l >= dist.interval.f_r or new_interval.f_r <= dist.interval.f_l:
        raise RegridError(
            f"[{new_interval.f_l}, {new_interval.f_r}] does not overlap "
            f"[{dist.interval.f_l}, {dist.interval.f_r}]")
    nodes = np.linspace(new_interval.f_l, new_interval.f_r, n)
    try:
        return GridDistribution.from_weights(new_interval, dist.pdf(nodes))
    except DegenerateUpdateError as exc:
        raise RegridError("no probability mass inside the new interval") from exc
