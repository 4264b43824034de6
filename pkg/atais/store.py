"""Append-only particle storage."""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError, DimensionMismatchError, DomainError
from .proposal import GaussianProposal

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ParticleRecord:
    """One weighted particle as drawn and evaluated."""

    theta: np.ndarray
    log_w: float
    residual: float
    iteration: int
    index: int
    proposal_id: int
    sigma_prev: float


def particle_columns(dimension: int) -> List[str]:
    """Return the particle CSV header."""
    return (
        ["t", "n"]
        + [f"theta_{i}" for i in range(dimension)]
        + ["log_w", "residual", "sigma_prev"]
    )


class ParticleStore:
    """Record of every particle, its uncorrected log-weight and cached residual.

    Iterations are appended whole and never modified. Proposal snapshot ``t-1``
    is the proposal that generated iteration ``t``.
    """

    def __init__(self, dimension: int, K: int) -> None:
        """Initialize an empty store."""
        if K < 1:
            raise DomainError("K must be at least 1")
        self.dimension = int(dimension)
        self.K = int(K)
        self.proposals: List[Optional[GaussianProposal]] = []
        self.sigma_schedule: List[float] = []
        self.n_forward_evals = 0
        self._chunks: List[Dict[str, np.ndarray]] = []
        self._cache: Dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        """Return the number of stored particles."""
        return sum(len(chunk["log_w"]) for chunk in self._chunks)

    @property
    def n_iterations(self) -> int:
        """Return the number of stored iterations."""
        return len(self._chunks)

    def append_iteration(
        self,
        t: int,
        thetas: np.ndarray,
        log_w: np.ndarray,
        residuals: np.ndarray,
        sigma_prev: float,
        proposal: Optional[GaussianProposal],
    ) -> None:
        """Append the particles of iteration t."""
        if t != self.n_iterations + 1:
            raise DomainError(f"expected iteration {self.n_iterations + 1}, got {t}")
        thetas = np.array(thetas, dtype=float).reshape(-1, self.dimension)
        log_w = np.array(log_w, dtype=float).reshape(-1)
        residuals = np.array(residuals, dtype=float).reshape(-1)
        if not len(thetas) == len(log_w) == len(residuals):
            raise DimensionMismatchError("particles, weights and residuals differ in length")

        chunk = {
            "thetas": thetas,
            "log_w": log_w,
            "residuals": residuals,
            "sigma_prev": np.full(len(log_w), float(sigma_prev)),
            "iterations": np.full(len(log_w), t, dtype=int),
            "indices": np.arange(len(log_w)),
        }
        for array in chunk.values():
            array.setflags(write=False)
        self._chunks.append(chunk)
        self.proposals.append(proposal)
        self._cache.clear()

    def _column(self, name: str) -> np.ndarray:
        """Return a concatenated column."""
        if name not in self._cache:
            if not self._chunks:
                width = (0, self.dimension) if name == "thetas" else (0,)
                column = np.empty(width)
            else:
                column = np.concatenate([chunk[name] for chunk in self._chunks])
            column.setflags(write=False)
            self._cache[name] = column
        return self._cache[name]

    @property
    def thetas(self) -> np.ndarray:
        """Return all particles as an (NT, M) array."""
        return self._column("thetas")

    @property
    def log_w(self) -> np.ndarray:
        """Return the uncorrected log-weights."""
        return self._column("log_w")

    @property
    def residuals(self) -> np.ndarray:
        """Return the cached residuals e_t^(n)."""
        return self._column("residuals")

    @property
    def sigma_prev(self) -> np.ndarray:
        """Return the tempering scale each particle was weighted at."""
        return self._column("sigma_prev")

    @property
    def iterations(self) -> np.ndarray:
        """Return the iteration index t of every particle."""
        return self._column("iterations")

    @property
    def indices(self) -> np.ndarray:
        """Return the within-iteration index n of every particle."""
        return self._column("indices")

    @property
    def final_sigma(self) -> float:
        """Return the last entry of the tempering schedule."""
        if not self.sigma_schedule:
            raise DomainError("store has no tempering schedule")
        return float(self.sigma_schedule[-1])

    def records(self) -> Iterator[ParticleRecord]:
        """Iterate over the stored particles."""
        for theta, log_w, residual, t, n, sigma in zip(
            self.thetas,
            self.log_w,
            self.residuals,
            self.iterations,
            self.indices,
            self.sigma_prev,
        ):
            yield ParticleRecord(
                theta=theta,
                log_w=float(log_w),
                residual=float(residual),
                iteration=int(t),
                index=int(n),
                proposal_id=int(t) - 1,
                sigma_prev=float(sigma),
            )

    def log_rho(self, sigma: float) -> np.ndarray:
        """Return log rho_t^(n)(sigma) for every particle.

        rho(sigma) = w * l(sigma) / l(sigma_prev), evaluated from the cached
        residual; no forward-map call is made.
        """
        if not sigma > 0.0:
            raise DomainError("sigma must be positive")
        log_w = self.log_w
        valid = np.isfinite(log_w)
        residuals = np.where(valid, self.residuals, 0.0)
        sigma_prev = self.sigma_prev
        delta = self.K * np.log(sigma_prev / sigma) + residuals * (
            0.5 / sigma_prev**2 - 0.5 / sigma**2
        )
        return np.where(valid, log_w + delta, -np.inf)

    def to_csv(self, path: PathLike) -> None:
        """Write the particles as CSV."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(particle_columns(self.dimension))
            for t, n, theta, log_w, residual, sigma in zip(
                self.iterations,
                self.indices,
                self.thetas,
                self.log_w,
                self.residuals,
                self.sigma_prev,
            ):
                writer.writerow(
                    [int(t), int(n)]
                    + [repr(float(value)) for value in theta]
                    + [repr(float(log_w)), repr(float(residual)), repr(float(sigma))]
                )

    def proposals_as_json(self) -> List[Optional[Dict[str, Any]]]:
        """Return the proposal snapshots as JSON-serializable data."""
        return [q.as_dict() if q is not None else None for q in self.proposals]

    @classmethod
    def from_csv(
        cls,
        path: PathLike,
        K: int,
        sigma_schedule: Optional[Sequence[float]] = None,
        proposals: Optional[Sequence[Optional[Dict[str, Any]]]] = None,
    ) -> "ParticleStore":
        """Load a store written by :meth:`to_csv`."""
        try:
            with open(path, newline="") as handle:
                rows = list(csv.reader(handle))
        except OSError as err:
            raise ConfigError(f"cannot read particle file {path}: {err}") from err
        if not rows:
            raise ConfigError(f"particle file {path} is empty")

        header = rows[0]
        dimension = len(header) - 5
        if dimension < 1 or header != particle_columns(dimension):
            raise ConfigError(f"particle file {path} has an unexpected header")

        data = np.array([[float(value) for value in row] for row in rows[1:]], dtype=float)
        store = cls(dimension, K)
        if data.size == 0:
            return store
        iterations = data[:, 0].astype(int)
        for t in np.unique(iterations):
            rows_t = data[iterations == t]
            rows_t = rows_t[np.argsort(rows_t[:, 1], kind="stable")]
            proposal = None
            if proposals is not None and proposals[t - 1] is not None:
                proposal = GaussianProposal.from_dict(proposals[t - 1])
            store.append_iteration(
                int(t),
                rows_t[:, 2 : 2 + dimension],
                rows_t[:, 2 + dimension],
                rows_t[:, 3 + dimension],
                float(rows_t[0, 4 + dimension]),
                proposal,
            )
        if sigma_schedule is not None:
            store.sigma_schedule = [float(value) for value in sigma_schedule]
        else:
            store.sigma_schedule = [float(chunk["sigma_prev"][0]) for chunk in store._chunks]
        return store


def write_json(path: PathLike, data: Any) -> None:
    """Write data as stable, sorted JSON."""
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path: PathLike) -> Any:
    """Read a JSON file."""
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read JSON file {path}: {err}") from err
