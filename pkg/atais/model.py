"""Observation models, priors and density evaluations.

All densities are evaluated in the log domain. A residual of ``+inf`` is a
regular value meaning the forward map is undefined at that point, which makes
the likelihood zero.
"""

import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .const import PROPOSAL_STD_FRACTION
from .exceptions import DimensionMismatchError, DomainError

_LOGGER = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``y`` with optional acquisition times (days)."""

    y: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        """Validate and freeze the arrays."""
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.size < 1:
            raise DomainError("dataset must contain at least one observation")
        if not np.all(np.isfinite(y)):
            raise DomainError("dataset observations must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

        if self.times is not None:
            times = np.array(self.times, dtype=float).reshape(-1)
            if times.shape != y.shape:
                raise DimensionMismatchError(
                    f"times has {times.size} entries, y has {y.size}"
                )
            if not np.all(np.isfinite(times)):
                raise DomainError("acquisition times must be finite")
            times.setflags(write=False)
            object.__setattr__(self, "times", times)

    @property
    def K(self) -> int:
        """Return the number of observations."""
        return int(self.y.size)


@dataclass(frozen=True, eq=False)
class BoxPrior:
    """Uniform prior over an axis-aligned box."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        """Validate the bounds."""
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionMismatchError("lower and upper bounds differ in length")
        if not np.all(lower < upper):
            raise DomainError("box prior requires lower < upper in every dimension")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        """Return the dimension M."""
        return int(self.lower.size)

    @property
    def sides(self) -> np.ndarray:
        """Return the side lengths."""
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        """Return the box center."""
        return 0.5 * (self.lower + self.upper)

    @property
    def log_volume(self) -> float:
        """Return the log of the box volume."""
        return float(np.sum(np.log(self.sides)))

    def contains(self, theta: np.ndarray) -> Union[bool, np.ndarray]:
        """Return whether theta (or each row of a batch) lies in the box."""
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= self.lower) & (theta <= self.upper)
        if theta.ndim == 1:
            return bool(np.all(inside))
        return np.all(inside, axis=-1)

    def log_density(self, theta: np.ndarray) -> ArrayLike:
        """Return the normalized log density, -inf outside the box."""
        inside = self.contains(theta)
        return np.where(inside, -self.log_volume, -np.inf)[()]


@dataclass(frozen=True)
class SigmaPrior:
    """Uniform prior over the noise scale on (a, b]."""

    a: float
    b: float
    kind: str = "uniform"

    def __post_init__(self) -> None:
        """Validate the support."""
        if self.kind != "uniform":
            raise DomainError(f"unsupported sigma prior kind: {self.kind}")
        if not (0.0 <= self.a < self.b) or not math.isfinite(self.b):
            raise DomainError(f"sigma prior needs 0 <= a < b, got ({self.a}, {self.b})")

    @property
    def support(self) -> Tuple[float, float]:
        """Return the support bounds."""
        return self.a, self.b

    def log_density(self, sigma: ArrayLike) -> ArrayLike:
        """Return the log density; the lower bound is excluded."""
        sigma = np.asarray(sigma, dtype=float)
        inside = (sigma > self.a) & (sigma <= self.b) & (sigma > 0.0)
        return np.where(inside, -math.log(self.b - self.a), -np.inf)[()]

    def pdf(self, sigma: ArrayLike) -> ArrayLike:
        """Return the density."""
        return np.exp(self.log_density(sigma))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw from the prior, never returning the excluded lower bound."""
        draws = self.b - rng.uniform(0.0, self.b - self.a, size=size)
        return draws

    def midpoint_grid(self, points: int) -> Tuple[np.ndarray, float]:
        """Return midpoint quadrature nodes and the node spacing."""
        step = (self.b - self.a) / points
        nodes = self.a + (np.arange(points) + 0.5) * step
        return nodes, step


class ObservationModel(ABC):
    """A forward map f: Theta -> R^K bundled with its data and box prior.

    Forward evaluations go through :meth:`evaluate`, which counts calls under
    a lock so independent workers may share one model.
    """

    def __init__(
        self,
        dataset: Dataset,
        prior: BoxPrior,
        log_prior: Optional[Callable[[np.ndarray], float]] = None,
    ) -> None:
        """Initialize the model."""
        self.dataset = dataset
        self.prior = prior
        self._log_prior_hook = log_prior
        self._lock = threading.Lock()
        self._n_forward_evals = 0

    @property
    def dimension(self) -> int:
        """Return the parameter dimension M."""
        return self.prior.dimension

    @property
    def K(self) -> int:
        """Return the number of observations."""
        return self.dataset.K

    @property
    def initial_proposal_std(self) -> np.ndarray:
        """Return the per-component std of the first proposal."""
        return PROPOSAL_STD_FRACTION * self.prior.sides

    @property
    def uniform_prior(self) -> bool:
        """Return True unless a generic log-prior hook is installed."""
        return self._log_prior_hook is None

    @property
    def n_forward_evals(self) -> int:
        """Return the number of forward-map calls so far."""
        with self._lock:
            return self._n_forward_evals

    def reset_counter(self) -> None:
        """Reset the forward-map call counter."""
        with self._lock:
            self._n_forward_evals = 0

    @abstractmethod
    def forward(self, theta: np.ndarray) -> np.ndarray:
        """Return f(theta) as a length-K vector (non-finite where undefined)."""

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate the forward map and count the call."""
        with self._lock:
            self._n_forward_evals += 1
        return np.asarray(self.forward(np.asarray(theta, dtype=float)), dtype=float)

    def log_prior(self, theta: np.ndarray) -> float:
        """Return log g_theta(theta)."""
        value = float(self.prior.log_density(theta))
        if self._log_prior_hook is not None and value > -np.inf:
            value += float(self._log_prior_hook(np.asarray(theta, dtype=float)))
        return value

    def log_prior_batch(self, thetas: np.ndarray) -> np.ndarray:
        """Return log g_theta for every row of a batch."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self._log_prior_hook is None:
            return np.asarray(self.prior.log_density(thetas), dtype=float).reshape(-1)
        return np.array([self.log_prior(theta) for theta in thetas])


def residual_ss(model: ObservationModel, theta: np.ndarray) -> float:
    """Return V(theta) = ||y - f(theta)||^2, or +inf where f is undefined."""
    predicted = model.evaluate(theta).reshape(-1)
    if predicted.shape != model.dataset.y.shape:
        raise DimensionMismatchError(
            f"forward map returned {predicted.size} values, dataset has {model.K}"
        )
    if not np.all(np.isfinite(predicted)):
        return math.inf
    return float(np.sum((model.dataset.y - predicted) ** 2))


def log_likelihood(V: ArrayLike, K: int, sigma: ArrayLike) -> ArrayLike:
    """Return the Gaussian log-likelihood for residual V at noise scale sigma."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0.0)):
        raise DomainError("sigma must be positive")
    if K < 1:
        raise DomainError("K must be at least 1")
    V = np.asarray(V, dtype=float)
    return (-0.5 * K * (LOG_2PI + 2.0 * np.log(sigma)) - V / (2.0 * sigma**2))[()]


def sigma_ml_given_theta(V: ArrayLike, K: int) -> ArrayLike:
    """Return the maximum-likelihood noise scale sqrt(V/K)."""
    if K < 1:
        raise DomainError("K must be at least 1")
    return np.sqrt(np.asarray(V, dtype=float) / K)[()]


def log_tempered_posterior(
    model: ObservationModel, theta: np.ndarray, sigma: float
) -> float:
    """Return log l(y|theta,sigma) + log g_theta(theta), -inf outside the box."""
    log_prior = model.log_prior(theta)
    if log_prior == -np.inf:
        return -math.inf
    return float(log_likelihood(residual_ss(model, theta), model.K, sigma)) + log_prior
