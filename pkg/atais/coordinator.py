"""Evaluation coordinator for forward-map calls."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .model import ObservationModel, residual_ss

_LOGGER = logging.getLogger(__name__)


class EvaluationCoordinator:
    """Coordinator spreading residual evaluations over a worker pool.

    Results are always gathered in submission order, so the worker count never
    changes what a run produces.
    """

    def __init__(self, workers: int = 1) -> None:
        """Initialize the coordinator."""
        self.workers = max(1, int(workers))
        self._executor: Optional[ThreadPoolExecutor] = None

    def __enter__(self) -> "EvaluationCoordinator":
        """Start the pool."""
        return self

    def __exit__(self, *exc_info: object) -> None:
        """Shutdown the pool."""
        self.shutdown()

    def _ensure_executor(self) -> ThreadPoolExecutor:
        """Ensure we have an active executor."""
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self.workers, thread_name_prefix="atais-eval"
            )
        return self._executor

    def shutdown(self) -> None:
        """Shutdown the coordinator."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def residuals(self, model: ObservationModel, thetas: np.ndarray) -> np.ndarray:
        """Return residual_ss for every row of thetas, one forward call each."""
        thetas = np.atleast_2d(thetas)
        if self.workers == 1 or len(thetas) < 2:
            return np.array([residual_ss(model, theta) for theta in thetas], dtype=float)

        executor = self._ensure_executor()
        results = executor.map(lambda theta: residual_ss(model, theta), thetas)
        return np.fromiter(results, dtype=float, count=len(thetas))


_default_coordinator = EvaluationCoordinator(workers=1)


def get_coordinator(coordinator: Optional[EvaluationCoordinator]) -> EvaluationCoordinator:
    """Return the given coordinator or the shared serial one."""
    if coordinator is None:
        return _default_coordinator
    return coordinator
