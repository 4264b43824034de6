"""Tests for the tempered adaptive importance sampler."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atais.coordinator import EvaluationCoordinator
from atais.evidence import EvidenceCurve, global_evidence, marginal_posterior_sigma
from atais.exceptions import DomainError
from atais.model import Dataset, SigmaPrior
from atais.models import LinearModel, RvModel, ToyModel
from atais.models.simulate import simulate_dataset
from atais.oracle import OracleSummary
from atais.proposal import GaussianProposal
from atais.sampler import (
    AtaisConfig,
    CurrentMax,
    TemperState,
    adapt_proposal,
    correct_weights,
    effective_sample_size,
    normalize_log_weights,
    posterior_estimates,
    run_atais,
    update_current_max,
    update_global_max,
    weigh_particles,
)
from atais.store import ParticleStore


def small_toy_run(model: ToyModel, seed: int = 5, coordinator=None):
    config = AtaisConfig.for_model(model, N=200, T=5, sigma0=20.0, seed=seed)
    return run_atais(model, config, coordinator)


def test_config_defaults_follow_the_box(level_model: LinearModel) -> None:
    config = AtaisConfig.for_model(level_model, N=10, T=2, sigma0=10.0)
    np.testing.assert_allclose(config.mu0, [0.0])
    np.testing.assert_allclose(config.cov0, [[25.0]])
    assert config.eps == pytest.approx(4e-4)


def test_benchmark_models_set_their_first_proposal(toy_model: ToyModel) -> None:
    config = AtaisConfig.for_model(toy_model, N=10, T=2, sigma0=20.0)
    np.testing.assert_allclose(config.mu0, [10.0])
    np.testing.assert_allclose(config.cov0, [[4.0]])
    rv = RvModel(simulate_dataset("rv", seed=7), 2)
    config = AtaisConfig.for_model(rv, N=10, T=2, sigma0=30.0)
    np.testing.assert_allclose(np.diag(config.cov0), np.full(11, 25.0))
    config = AtaisConfig.for_model(rv, N=10, T=2, sigma0=30.0, proposal_std=np.array([1.0]))
    np.testing.assert_allclose(np.diag(config.cov0), np.ones(11))


def test_config_rejects_empty_population(level_model: LinearModel) -> None:
    with pytest.raises(DomainError):
        AtaisConfig.for_model(level_model, N=0, T=2, sigma0=10.0)
    with pytest.raises(DomainError):
        AtaisConfig.for_model(level_model, N=10, T=2, sigma0=0.0)


def test_initial_state_has_no_map() -> None:
    state = TemperState.initial(7.0)
    assert state.sigma_ml_hat == 7.0
    assert state.theta_map_hat is None
    assert state.V_min == math.inf
    assert state.log_pi_map == -math.inf


def test_effective_sample_size_limits() -> None:
    assert effective_sample_size(np.zeros(10)) == pytest.approx(10.0)
    assert effective_sample_size(np.array([0.0, -np.inf, -np.inf])) == pytest.approx(1.0)
    assert effective_sample_size(np.full(4, -np.inf)) == 0.0


@given(st.lists(st.floats(min_value=-700.0, max_value=700.0), min_size=1, max_size=30))
def test_normalized_weights_sum_to_one(log_w: list) -> None:
    weights = normalize_log_weights(np.array(log_w))
    assert np.sum(weights) == pytest.approx(1.0)
    assert np.all(weights >= 0.0)


def test_weigh_particles_keeps_residuals_outside_the_box(level_model: LinearModel) -> None:
    q = GaussianProposal(np.array([0.0]), np.array([[25.0]]))
    log_w, residuals = weigh_particles(level_model, np.array([[3.0], [50.0]]), 1.0, q)
    assert np.isfinite(log_w[0])
    assert log_w[1] == -np.inf
    assert residuals[1] == pytest.approx(np.sum((level_model.dataset.y - 50.0) ** 2))
    assert level_model.n_forward_evals == 2


def test_current_max_picks_smallest_valid_residual() -> None:
    particles = np.array([[0.0], [1.0], [2.0]])
    residuals = np.array([5.0, 1.0, 3.0])
    best = update_current_max(particles, residuals, 4)
    assert best.index == 1
    assert best.sigma == pytest.approx(0.5)
    best = update_current_max(particles, residuals, 4, np.array([0.0, -np.inf, 0.0]))
    assert best.index == 2
    assert update_current_max(particles, residuals, 4, np.full(3, -np.inf)) is None


def test_global_max_accepts_ties_and_rejects_worse() -> None:
    state = TemperState(
        sigma_ml_hat=1.0, theta_map_hat=np.array([0.0]), V_min=4.0, log_pi_map=0.0
    )
    tie = CurrentMax(index=0, theta=np.array([1.0]), V=4.0, sigma=1.0)
    worse = CurrentMax(index=0, theta=np.array([2.0]), V=9.0, sigma=1.5)
    assert update_global_max(state, worse, 4) is state
    accepted = update_global_max(state, tie, 4)
    np.testing.assert_array_equal(accepted.theta_map_hat, [1.0])
    assert accepted.sigma_ml_hat == pytest.approx(1.0)


def test_adapted_proposal_is_centred_on_the_map() -> None:
    particles = np.array([[0.0], [2.0]])
    q = adapt_proposal(particles, np.zeros(2), np.array([5.0]), 0.01)
    np.testing.assert_allclose(q.mean, [5.0])
    np.testing.assert_allclose(q.cov, [[1.01]])


def test_adaptation_without_valid_weights_keeps_covariance() -> None:
    previous = GaussianProposal(np.array([1.0]), np.array([[4.0]]))
    q = adapt_proposal(np.array([[0.0]]), np.array([-np.inf]), None, 0.01, previous)
    np.testing.assert_allclose(q.mean, [1.0])
    np.testing.assert_allclose(q.cov, [[4.0]])
    with pytest.raises(DomainError):
        adapt_proposal(np.array([[0.0]]), np.array([-np.inf]), None, 0.01)


def test_run_makes_exactly_one_call_per_particle(toy_model: ToyModel) -> None:
    _, store = small_toy_run(toy_model)
    assert store.n_forward_evals == 1000
    assert toy_model.n_forward_evals == 1000
    assert len(store) == 1000


def test_schedule_starts_at_sigma0_and_never_increases(toy_model: ToyModel) -> None:
    state, store = small_toy_run(toy_model)
    schedule = np.array(store.sigma_schedule)
    assert schedule.size == 6
    assert schedule[0] == 20.0
    assert np.all(np.diff(schedule) <= 0.0)
    assert schedule[-1] == state.sigma_ml_hat


def test_sigma_ml_tracks_smallest_residual(toy_model: ToyModel) -> None:
    state, store = small_toy_run(toy_model)
    valid = np.isfinite(store.log_w)
    assert state.V_min == np.min(store.residuals[valid])
    assert state.sigma_ml_hat == pytest.approx(math.sqrt(state.V_min / toy_model.K))


def test_runs_are_reproducible(toy_dataset: Dataset) -> None:
    _, first = small_toy_run(ToyModel(toy_dataset), seed=9)
    _, second = small_toy_run(ToyModel(toy_dataset), seed=9)
    np.testing.assert_array_equal(first.thetas, second.thetas)
    np.testing.assert_array_equal(first.log_w, second.log_w)
    assert first.sigma_schedule == second.sigma_schedule


def test_worker_count_does_not_change_results(toy_dataset: Dataset) -> None:
    _, serial = small_toy_run(ToyModel(toy_dataset), seed=2)
    with EvaluationCoordinator(workers=4) as pool:
        _, parallel = small_toy_run(ToyModel(toy_dataset), seed=2, coordinator=pool)
    np.testing.assert_array_equal(serial.residuals, parallel.residuals)
    np.testing.assert_array_equal(serial.log_w, parallel.log_w)


def test_generic_prior_is_reported(
    toy_dataset: Dataset, caplog: pytest.LogCaptureFixture
) -> None:
    model = ToyModel(toy_dataset, log_prior=lambda theta: 0.0)
    with caplog.at_level(logging.WARNING):
        run_atais(model, AtaisConfig.for_model(model, N=5, T=1, sigma0=20.0))
    assert "Generic theta prior" in caplog.text


def test_corrected_weights_are_rho_at_final_sigma(level_run) -> None:
    _, state, store = level_run
    weights = correct_weights(store)
    assert np.sum(weights) == pytest.approx(1.0)
    np.testing.assert_allclose(weights, normalize_log_weights(store.log_rho(state.sigma_ml_hat)))


def test_conditional_posterior_of_the_level_model(level_run) -> None:
    model, state, store = level_run
    y = model.dataset.y
    assert state.sigma_ml_hat == pytest.approx(
        math.sqrt(np.sum((y - y.mean()) ** 2) / y.size), rel=1e-3
    )
    estimate = posterior_estimates(store, correct_weights(store), state)
    assert estimate.mean[0] == pytest.approx(y.mean(), abs=0.02)
    assert estimate.cov[0, 0] == pytest.approx(state.sigma_ml_hat**2 / y.size, rel=0.15)
    assert estimate.theta_map[0] == pytest.approx(y.mean(), abs=0.05)
    assert estimate.ess > 100
    assert estimate.warnings == []


def test_posterior_estimates_warn_on_degenerate_weights() -> None:
    store = ParticleStore(1, 3)
    thetas = np.array([[1.0], [2.0]])
    store.append_iteration(1, thetas, np.array([0.0, -np.inf]), np.ones(2), 1.0, None)
    estimate = posterior_estimates(store, np.array([1.0, 0.0]))
    np.testing.assert_allclose(estimate.mean, [1.0])
    assert estimate.ess == pytest.approx(1.0)
    assert estimate.warnings
    with pytest.raises(DomainError):
        posterior_estimates(store, np.zeros(2))


def toy_errors(
    oracle: OracleSummary, prior: SigmaPrior, N: int, seeds: range
) -> np.ndarray:
    """Squared errors of E[theta|y,sigma_ML], sigma_ML and E[sigma|y], one row per seed."""
    dataset = simulate_dataset("toy", seed=1)
    rows = []
    for seed in seeds:
        model = ToyModel(dataset)
        config = AtaisConfig.for_model(model, N=N, T=10, sigma0=20.0, seed=seed)
        state, store = run_atais(model, config)
        estimate = posterior_estimates(store, correct_weights(store), state)
        curve = EvidenceCurve(store)
        sigma_mean = marginal_posterior_sigma(
            curve, prior, global_evidence(curve, prior)
        ).moments()["mean"]
        rows.append(
            [
                (estimate.mean[0] - oracle.conditional.mean) ** 2,
                (state.sigma_ml_hat - oracle.sigma_ml) ** 2,
                (sigma_mean - oracle.sigma_mean) ** 2,
            ]
        )
    return np.array(rows)


@pytest.mark.slow
def test_toy_estimates_agree_with_the_grid(
    toy_oracle: OracleSummary, toy_sigma_prior: SigmaPrior
) -> None:
    mse = toy_errors(toy_oracle, toy_sigma_prior, 1000, range(100)).mean(axis=0)
    assert mse[0] <= 0.034
    assert mse[1] <= 1e-4
    assert mse[2] <= 0.1


@pytest.mark.slow
def test_toy_errors_shrink_with_more_particles(
    toy_oracle: OracleSummary, toy_sigma_prior: SigmaPrior
) -> None:
    seeds = range(100)
    errors = [toy_errors(toy_oracle, toy_sigma_prior, N, seeds) for N in (10, 100, 1000)]
    for smaller, larger in zip(errors, errors[1:]):
        # paired over seeds; larger N may not be significantly worse
        gain = smaller - larger
        margin = 2.0 * gain.std(axis=0, ddof=1) / math.sqrt(len(seeds))
        assert np.all(gain.mean(axis=0) + margin >= 0.0)
    assert errors[2][:, 0].mean() < errors[0][:, 0].mean()


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_schedule_settles_on_the_grid_sigma_ml(seed: int, toy_oracle: OracleSummary) -> None:
    model = ToyModel(simulate_dataset("toy", seed=1))
    state, store = run_atais(
        model, AtaisConfig.for_model(model, N=1000, T=10, sigma0=20.0, seed=seed)
    )
    schedule = np.array(store.sigma_schedule)
    assert schedule[0] == 20.0 > toy_oracle.sigma_ml
    assert np.all(np.diff(schedule) <= 0.0)
    assert state.sigma_ml_hat == pytest.approx(toy_oracle.sigma_ml, rel=0.05)
