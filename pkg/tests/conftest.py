"""Shared fixtures for the atais tests."""

import math
import os
from typing import Callable, Tuple

import hypothesis
import numpy as np
import pytest
from scipy.integrate import quad

from atais.model import Dataset, SigmaPrior
from atais.models import LinearModel, ToyModel
from atais.models.simulate import simulate_dataset
from atais.oracle import OracleSummary, grid_joint_and_marginals
from atais.sampler import AtaisConfig, TemperState, run_atais
from atais.store import ParticleStore

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

LINEAR_K = 20
LINEAR_LEVEL = 3.0
LINEAR_NOISE = 0.5
LINEAR_WIDTH = 20.0


@pytest.fixture
def toy_dataset() -> Dataset:
    """Eight replicate observations of the toy model at theta = 2.5."""
    return simulate_dataset("toy", seed=1)


@pytest.fixture
def toy_model(toy_dataset: Dataset) -> ToyModel:
    """Toy model over the default box (0, 20]."""
    return ToyModel(toy_dataset)


@pytest.fixture(scope="session")
def toy_sigma_prior() -> SigmaPrior:
    """Uniform noise-scale prior of the toy model on (0, 20]."""
    return SigmaPrior(0.0, 20.0)


@pytest.fixture(scope="session")
def toy_oracle(toy_sigma_prior: SigmaPrior) -> OracleSummary:
    """Grid ground truth of the toy dataset on the default grid."""
    model = ToyModel(simulate_dataset("toy", seed=1))
    return grid_joint_and_marginals(model, toy_sigma_prior, certify=False)


def level_dataset() -> Dataset:
    """Noisy observations of a constant level."""
    rng = np.random.default_rng(3)
    return Dataset(y=LINEAR_LEVEL + LINEAR_NOISE * rng.standard_normal(LINEAR_K))


@pytest.fixture
def level_model() -> LinearModel:
    """Constant-level model f(theta) = theta 1 with a uniform prior on [-10, 10]."""
    return LinearModel(level_dataset(), np.ones((LINEAR_K, 1)))


@pytest.fixture(scope="session")
def level_run() -> Tuple[LinearModel, TemperState, ParticleStore]:
    """One sampler run on the constant-level model, shared across tests."""
    model = LinearModel(level_dataset(), np.ones((LINEAR_K, 1)))
    config = AtaisConfig.for_model(model, N=1000, T=10, sigma0=10.0, seed=11)
    state, store = run_atais(model, config)
    return model, state, store


@pytest.fixture
def level_sigma_prior() -> SigmaPrior:
    """Uniform noise-scale prior on (0, 10]."""
    return SigmaPrior(0.0, 10.0)


@pytest.fixture(scope="session")
def level_log_evidence() -> Callable[[float], float]:
    """Closed-form log Z(sigma) of the constant-level model."""
    y = level_dataset().y
    K = y.size
    spread = float(np.sum((y - y.mean()) ** 2))

    def log_evidence(sigma: float) -> float:
        return (
            -0.5 * K * math.log(2.0 * math.pi * sigma**2)
            - spread / (2.0 * sigma**2)
            + 0.5 * math.log(2.0 * math.pi * sigma**2 / K)
            - math.log(LINEAR_WIDTH)
        )

    return log_evidence


@pytest.fixture(scope="session")
def level_global_log_evidence(level_log_evidence: Callable[[float], float]) -> float:
    """log of the closed-form Z(sigma) integrated against the (0, 10] prior."""
    y = level_dataset().y
    peak = math.sqrt(float(np.sum((y - y.mean()) ** 2)) / (y.size - 1))
    shift = level_log_evidence(peak)
    value, _ = quad(
        lambda sigma: math.exp(level_log_evidence(sigma) - shift) / 10.0,
        1e-3,
        10.0,
        points=[peak],
        limit=200,
    )
    return math.log(value) + shift
