"""Gaussian proposal densities."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
from scipy import linalg

from .exceptions import DimensionMismatchError, NumericalError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GaussianProposal:
    """Multivariate normal q(theta | mean, cov) with a cached Cholesky factor."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Symmetrize the covariance and factorize it."""
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        cov = 0.5 * (cov + cov.T)
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as err:
            raise NumericalError("proposal covariance is not positive definite") from err

        for array in (mean, cov, chol):
            array.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dimension(self) -> int:
        """Return the dimension."""
        return int(self.mean.size)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` rows mean + L z."""
        z = rng.standard_normal((size, self.dimension))
        return self.mean + z @ self.chol.T

    def log_pdf(self, thetas: np.ndarray) -> np.ndarray:
        """Return log q for each row of thetas."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        z = linalg.solve_triangular(self.chol, (thetas - self.mean).T, lower=True)
        log_det = np.sum(np.log(np.diag(self.chol)))
        return (
            -0.5 * np.sum(z**2, axis=0)
            - log_det
            - 0.5 * self.dimension * math.log(2.0 * math.pi)
        )

    def as_dict(self) -> Dict[str, Any]:
        """Return a JSON-serializable snapshot."""
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaussianProposal":
        """Rebuild a proposal from :meth:`as_dict` output."""
        return cls(np.asarray(data["mean"]), np.asarray(data["cov"]))


def sample_proposal(
    q: GaussianProposal, N: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw N i.i.d. parameter vectors from q."""
    return q.sample(rng, N)
