"""Linear-Gaussian reference model f(theta) = H theta."""

from typing import Optional

import numpy as np

from ..const import LINEAR_BOX
from ..exceptions import DimensionMismatchError
from ..model import BoxPrior, Dataset, ObservationModel


def linear_design(K: int, M: int) -> np.ndarray:
    """Return the K x M polynomial design matrix on [0, 1]."""
    grid = np.linspace(0.0, 1.0, K)
    return np.vander(grid, M, increasing=True)


def linear_box(M: int, bounds: Optional[tuple] = None) -> BoxPrior:
    """Return a cube prior of dimension M."""
    lower, upper = LINEAR_BOX if bounds is None else bounds
    return BoxPrior(np.full(M, lower), np.full(M, upper))


class LinearModel(ObservationModel):
    """Observations linear in the parameters."""

    def __init__(
        self,
        dataset: Dataset,
        H: np.ndarray,
        prior: Optional[BoxPrior] = None,
        log_prior=None,
    ) -> None:
        """Initialize the model."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape[0] != dataset.K:
            raise DimensionMismatchError(f"H has {H.shape[0]} rows, dataset has {dataset.K}")
        super().__init__(dataset, linear_box(H.shape[1]) if prior is None else prior, log_prior)
        if self.dimension != H.shape[1]:
            raise DimensionMismatchError("H columns do not match the box dimension")
        self.H = H

    def forward(self, theta: np.ndarray) -> np.ndarray:
        """Return H theta."""
        return self.H @ np.asarray(theta, dtype=float).reshape(-1)
