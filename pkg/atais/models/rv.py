"""Radial-velocity model of a star hosting non-interacting planets."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..const import (
    RV_AMPLITUDE_BOUND,
    RV_ECCENTRICITY_BOUNDS,
    RV_OMEGA_BOUNDS,
    RV_PERIOD_BOUNDS,
    RV_PLANET_FIELDS,
    RV_PROPOSAL_STD,
    RV_TAU_BOUNDS,
    RV_V0_BOUNDS,
)
from ..exceptions import DimensionMismatchError, DomainError, KeplerConvergenceError
from ..model import BoxPrior, Dataset, ObservationModel
from .kepler import mean_anomaly, solve_kepler, true_anomaly

_LOGGER = logging.getLogger(__name__)

PLANET_SIZE = len(RV_PLANET_FIELDS)


@dataclass(frozen=True)
class OrbitParams:
    """Orbital elements of one planet."""

    A: float
    omega: float
    e: float
    P: float
    tau: float

    @property
    def is_valid(self) -> bool:
        """Return whether the elements describe a bound orbit."""
        return self.P > 0.0 and 0.0 <= self.e < 1.0 and all(
            np.isfinite([self.A, self.omega, self.e, self.P, self.tau])
        )

    def as_tuple(self) -> Tuple[float, ...]:
        """Return the elements in parameter-vector order."""
        return (self.A, self.omega, self.e, self.P, self.tau)


def rv_dimension(S: int) -> int:
    """Return M = 1 + 5 S."""
    return 1 + PLANET_SIZE * S


def planet_count(dimension: int) -> int:
    """Return S for a parameter vector of the given length."""
    S, rest = divmod(dimension - 1, PLANET_SIZE)
    if rest or S < 1:
        raise DimensionMismatchError(f"{dimension} is not a radial-velocity dimension")
    return S


def split_theta(theta: np.ndarray) -> Tuple[float, List[OrbitParams]]:
    """Return (V0, planets) from theta = [V0, A1, omega1, e1, P1, tau1, ...]."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    S = planet_count(theta.size)
    planets = [
        OrbitParams(*(float(value) for value in theta[start : start + PLANET_SIZE]))
        for start in range(1, 1 + PLANET_SIZE * S, PLANET_SIZE)
    ]
    return float(theta[0]), planets


def join_theta(V0: float, planets: Sequence[Sequence[float]]) -> np.ndarray:
    """Return the parameter vector for V0 and per-planet element tuples."""
    values = [float(V0)]
    for planet in planets:
        elements = planet.as_tuple() if isinstance(planet, OrbitParams) else tuple(planet)
        if len(elements) != PLANET_SIZE:
            raise DimensionMismatchError(f"planet needs {PLANET_SIZE} elements")
        values.extend(float(value) for value in elements)
    return np.array(values)


def planet_velocity(planet: OrbitParams, times: np.ndarray) -> np.ndarray:
    """Return A [cos(u + omega) + e cos omega] at every time."""
    E = solve_kepler(mean_anomaly(times, planet.P, planet.tau), planet.e)
    u = true_anomaly(E, planet.e)
    return planet.A * (np.cos(u + planet.omega) + planet.e * np.cos(planet.omega))


def rv_forward(theta: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Return V0 plus the sum of planet contributions; nan where undefined."""
    times = np.asarray(times, dtype=float).reshape(-1)
    V0, planets = split_theta(theta)
    if not all(planet.is_valid for planet in planets):
        return np.full(times.size, np.nan)

    velocity = np.full(times.size, V0)
    for planet in planets:
        try:
            velocity += planet_velocity(planet, times)
        except KeplerConvergenceError as err:
            _LOGGER.debug("Kepler solver failed for %s: %s", planet, err)
            return np.full(times.size, np.nan)
    return velocity


def default_rv_box(S: int, amplitude_bound: float = RV_AMPLITUDE_BOUND) -> BoxPrior:
    """Return the box prior for S planets."""
    if S < 1:
        raise DomainError("S must be at least 1")
    planet_lower = [
        -amplitude_bound,
        RV_OMEGA_BOUNDS[0],
        RV_ECCENTRICITY_BOUNDS[0],
        RV_PERIOD_BOUNDS[0],
        RV_TAU_BOUNDS[0],
    ]
    planet_upper = [
        amplitude_bound,
        RV_OMEGA_BOUNDS[1],
        RV_ECCENTRICITY_BOUNDS[1],
        RV_PERIOD_BOUNDS[1],
        RV_TAU_BOUNDS[1],
    ]
    lower = np.array([RV_V0_BOUNDS[0]] + planet_lower * S)
    upper = np.array([RV_V0_BOUNDS[1]] + planet_upper * S)
    return BoxPrior(lower, upper)


class RvModel(ObservationModel):
    """Stellar radial velocity at the dataset times for S planets."""

    def __init__(
        self,
        dataset: Dataset,
        S: int,
        prior: Optional[BoxPrior] = None,
        amplitude_bound: float = RV_AMPLITUDE_BOUND,
        log_prior=None,
    ) -> None:
        """Initialize the model."""
        if dataset.times is None:
            raise DomainError("radial-velocity data needs acquisition times")
        if prior is None:
            prior = default_rv_box(S, amplitude_bound)
        if prior.dimension != rv_dimension(S):
            raise DimensionMismatchError(
                f"box has {prior.dimension} dimensions, {S} planets need {rv_dimension(S)}"
            )
        super().__init__(dataset, prior, log_prior)
        self.S = S

    @property
    def initial_proposal_std(self) -> np.ndarray:
        """Return the same std for every component."""
        return np.full(self.dimension, RV_PROPOSAL_STD)

    def forward(self, theta: np.ndarray) -> np.ndarray:
        """Return the predicted velocities (m/s)."""
        return rv_forward(theta, self.dataset.times)
