"""Scalar multimodal toy model."""

import logging
from typing import Optional, Union

import numpy as np

from ..const import MODEL_TOY, MODEL_TOY_SINE, TOY_BOX, TOY_PROPOSAL_STD
from ..exceptions import DomainError
from ..model import BoxPrior, Dataset, ObservationModel

_LOGGER = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def toy_forward(theta: ArrayLike) -> ArrayLike:
    """Return theta^2 + log|sin(10 theta)|; -inf where sin(10 theta) = 0.

    A sine within rounding of zero counts as zero, so multiples of pi/10 hit
    the singularity exactly.
    """
    theta = np.asarray(theta, dtype=float)
    x = 10.0 * theta
    sine = np.abs(np.sin(x))
    singular = sine <= 4.0 * np.spacing(np.maximum(np.abs(x), 1.0))
    value = theta**2 + np.log(np.where(singular, 1.0, sine))
    return np.where(singular, -np.inf, value)[()]


def toy_sine_forward(theta: ArrayLike) -> ArrayLike:
    """Return sin(10 theta)."""
    return np.sin(10.0 * np.asarray(theta, dtype=float))[()]


FORWARD_MAPS = {
    MODEL_TOY: toy_forward,
    MODEL_TOY_SINE: toy_sine_forward,
}


def toy_box(bounds: Optional[tuple] = None) -> BoxPrior:
    """Return the one-dimensional box prior of the toy model."""
    lower, upper = TOY_BOX if bounds is None else bounds
    return BoxPrior(np.array([lower]), np.array([upper]))


class ToyModel(ObservationModel):
    """K replicate observations of a scalar function of one parameter."""

    def __init__(
        self,
        dataset: Dataset,
        variant: str = MODEL_TOY,
        prior: Optional[BoxPrior] = None,
        log_prior=None,
    ) -> None:
        """Initialize the toy model."""
        if variant not in FORWARD_MAPS:
            raise DomainError(f"unknown toy variant: {variant}")
        super().__init__(dataset, toy_box() if prior is None else prior, log_prior)
        if self.dimension != 1:
            raise DomainError("toy model has exactly one parameter")
        self.variant = variant
        self._forward = FORWARD_MAPS[variant]

    @property
    def initial_proposal_std(self) -> np.ndarray:
        """Return a std of 2, i.e. a starting variance of 4."""
        return np.array([TOY_PROPOSAL_STD])

    def forward(self, theta: np.ndarray) -> np.ndarray:
        """Return the scalar prediction repeated K times."""
        value = float(self._forward(np.asarray(theta, dtype=float).reshape(-1)[0]))
        return np.full(self.K, value)
