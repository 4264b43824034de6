"""Tests for evidence, the noise-scale posterior and joint inference."""

import logging
import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import logsumexp
from scipy.stats import kstest

from atais.evidence import (
    EvidenceCurve,
    JointPosteriorApprox,
    McmcConfig,
    MonteCarlo,
    PostProcessingSettings,
    RiemannGrid,
    conditional_evidence,
    global_evidence,
    joint_expectation,
    make_scheme,
    marginal_posterior_sigma,
    noisy_mcmc_sigma,
    rho_weights,
    run_post_processing,
    sigma_map_marg,
    sir_resample_joint,
)
from atais.exceptions import DomainError, NumericalError
from atais.model import SigmaPrior
from atais.models import ToyModel
from atais.models.simulate import simulate_dataset
from atais.oracle import OracleSummary
from atais.sampler import AtaisConfig, correct_weights, run_atais
from atais.store import ParticleStore


class LogCurve:
    """Stand-in evidence curve given by a log function of sigma."""

    def __init__(self, function) -> None:
        self.function = function

    def log_value(self, sigma: float) -> float:
        return self.function(sigma)


def test_curve_is_the_mean_rho_weight(level_run) -> None:
    _, _, store = level_run
    curve = EvidenceCurve(store)
    expected = logsumexp(store.log_rho(0.7)) - math.log(len(store))
    assert curve.log_value(0.7) == pytest.approx(expected)
    assert curve(0.7) == pytest.approx(float(np.mean(rho_weights(store, 0.7))))
    assert curve.log_value(0.7) == curve.log_value(0.7)


def test_curve_memo_is_bounded(level_run, monkeypatch: pytest.MonkeyPatch) -> None:
    _, _, store = level_run
    monkeypatch.setattr("atais.evidence.EVIDENCE_CACHE_SIZE", 8)
    curve = EvidenceCurve(store)
    sigmas = np.linspace(0.3, 1.0, 20)
    first = curve.log_values(sigmas)
    assert curve.cache_size() == 8
    np.testing.assert_array_equal(curve.log_values(sigmas), first)
    assert curve.cache_size() == 8


def test_conditional_evidence_matches_closed_form(level_run, level_log_evidence) -> None:
    _, _, store = level_run
    value, log_value = conditional_evidence(store, 0.5)
    assert value == pytest.approx(math.exp(log_value))
    assert log_value == pytest.approx(level_log_evidence(0.5), abs=0.1)


def test_vanishing_rho_weights_are_reported(caplog: pytest.LogCaptureFixture) -> None:
    store = ParticleStore(1, 2)
    store.append_iteration(1, np.zeros((2, 1)), np.full(2, -np.inf), np.ones(2), 1.0, None)
    with caplog.at_level(logging.WARNING):
        value, log_value = conditional_evidence(store, 1.0)
    assert value == 0.0
    assert log_value == -math.inf
    assert "vanish" in caplog.text


def test_curve_needs_particles() -> None:
    with pytest.raises(DomainError):
        EvidenceCurve(ParticleStore(1, 2))


def test_riemann_evidence_matches_closed_form(
    level_run, level_sigma_prior, level_global_log_evidence
) -> None:
    _, _, store = level_run
    estimate = global_evidence(EvidenceCurve(store), level_sigma_prior, RiemannGrid(2000))
    assert estimate.log_value == pytest.approx(level_global_log_evidence, abs=0.1)
    assert estimate.value == pytest.approx(math.exp(estimate.log_value))


def test_monte_carlo_evidence_is_seeded(
    level_run, level_sigma_prior, level_global_log_evidence
) -> None:
    _, _, store = level_run
    curve = EvidenceCurve(store)
    first = global_evidence(curve, level_sigma_prior, MonteCarlo(20_000, seed=3))
    again = global_evidence(curve, level_sigma_prior, MonteCarlo(20_000, seed=3))
    assert first.log_value == again.log_value
    assert first.log_value == pytest.approx(level_global_log_evidence, abs=0.3)


def test_unknown_scheme_is_rejected() -> None:
    assert make_scheme("monte_carlo", 10, 2) == MonteCarlo(10, 2)
    with pytest.raises(DomainError):
        make_scheme("simpson")


def test_sigma_posterior_integrates_to_one(level_run, level_sigma_prior) -> None:
    _, _, store = level_run
    curve = EvidenceCurve(store)
    evidence = global_evidence(curve, level_sigma_prior, RiemannGrid(400))
    posterior = marginal_posterior_sigma(curve, level_sigma_prior, evidence)
    assert posterior.moments(400)["mass"] == pytest.approx(1.0, rel=1e-9)
    assert posterior.pdf(-1.0) == 0.0
    assert posterior.pdf(11.0) == 0.0
    assert posterior.pdf(0.5) > 0.0


def test_sigma_map_refines_between_grid_nodes() -> None:
    curve = LogCurve(lambda sigma: -((sigma - 3.01) ** 2) / 0.5)
    assert sigma_map_marg(curve, SigmaPrior(0.0, 10.0)) == pytest.approx(3.01, abs=1e-4)


def test_sigma_map_at_the_support_edge_returns_the_node() -> None:
    curve = LogCurve(lambda sigma: -sigma)
    assert sigma_map_marg(curve, SigmaPrior(0.0, 10.0)) == pytest.approx(0.025)


def test_flat_sigma_objective_is_reported(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING):
        value = sigma_map_marg(LogCurve(lambda sigma: 0.0), SigmaPrior(0.0, 10.0))
    assert 0.0 < value <= 10.0
    assert "Flat" in caplog.text


def test_chain_accepts_every_move_of_a_flat_log_target() -> None:
    curve = LogCurve(lambda sigma: -math.log(sigma))
    config = McmcConfig(J=1000, burn_in=100, step=0.25, seed=1)
    chain = noisy_mcmc_sigma(curve, SigmaPrior(0.0, 1e300), config, sigma_init=1.0)
    assert chain.acceptance_rate == 1.0
    assert chain.draws.shape == (1000,)


def test_chain_samples_the_sigma_posterior() -> None:
    curve = LogCurve(lambda sigma: -((sigma - 3.0) ** 2) / 0.5)
    config = McmcConfig(J=20_000, burn_in=1000, step=0.25, seed=2)
    chain = noisy_mcmc_sigma(curve, SigmaPrior(0.0, 10.0), config)
    assert np.mean(chain.draws) == pytest.approx(3.0, abs=0.05)
    assert np.std(chain.draws) == pytest.approx(0.5, abs=0.05)
    again = noisy_mcmc_sigma(curve, SigmaPrior(0.0, 10.0), config)
    np.testing.assert_array_equal(chain.draws, again.draws)


def test_chain_that_never_moves_is_a_hard_error() -> None:
    curve = LogCurve(lambda sigma: 0.0 if sigma == 1.0 else -math.inf)
    config = McmcConfig(J=50, burn_in=0, seed=0)
    with pytest.raises(NumericalError):
        noisy_mcmc_sigma(curve, SigmaPrior(0.0, 10.0), config, sigma_init=1.0)


def test_chain_start_must_lie_in_the_support() -> None:
    with pytest.raises(DomainError):
        noisy_mcmc_sigma(LogCurve(lambda sigma: 0.0), SigmaPrior(0.0, 1.0), McmcConfig(), 2.0)


def test_joint_expectation_with_one_sigma_is_the_corrected_mean(level_run) -> None:
    _, _, store = level_run
    expected = correct_weights(store, 0.6) @ store.thetas
    value = joint_expectation(store, np.array([0.6, 0.6]), lambda thetas, sigma: thetas)
    np.testing.assert_allclose(value, expected)
    scalar = joint_expectation(
        store, np.array([0.6]), lambda thetas, sigma: np.full(len(thetas), sigma)
    )
    assert scalar == pytest.approx(0.6)


def test_joint_resampling_recycles_particles(level_run) -> None:
    _, _, store = level_run
    draws = np.array([0.5, 0.6, 0.5])
    samples = sir_resample_joint(store, draws, 100, seed=1)
    assert samples.shape == (100, 2)
    assert set(np.unique(samples[:, -1])) <= {0.5, 0.6}
    assert np.all(np.isin(samples[:, 0], store.thetas[:, 0]))
    np.testing.assert_array_equal(samples, sir_resample_joint(store, draws, 100, seed=1))
    with pytest.raises(DomainError):
        JointPosteriorApprox(store, np.array([]))


def test_post_processing_uses_only_stored_particles(level_run, level_log_evidence) -> None:
    model, _, store = level_run
    calls = model.n_forward_evals
    settings = PostProcessingSettings(
        scheme=RiemannGrid(1000),
        mcmc=McmcConfig(J=3000, burn_in=300, seed=5),
        sir_samples=500,
        grid_points=1000,
        sir_seed=5,
    )
    result = run_post_processing(store, SigmaPrior(0.0, 10.0), settings)
    assert model.n_forward_evals == calls

    shift = level_log_evidence(0.5)

    def density(s: float) -> float:
        return math.exp(level_log_evidence(s) - shift)

    mass, _ = quad(density, 1e-3, 10.0, points=[0.5])
    first, _ = quad(lambda s: s * density(s), 1e-3, 10.0, points=[0.5])
    sigma_mean = first / mass

    summary = result.summary
    y = model.dataset.y
    assert summary["sigma_mean"] == pytest.approx(sigma_mean, abs=0.02)
    assert summary["sigma_chain_mean"] == pytest.approx(sigma_mean, abs=0.03)
    assert summary["theta_mean"][0] == pytest.approx(y.mean(), abs=0.02)
    assert summary["log_Z_hat"] == result.evidence.log_value
    assert result.joint_samples.shape == (500, 2)
    assert len(result.curve_table) == 1000
    assert len(result.posterior_table) == 1000


@pytest.mark.slow
def test_chain_draws_follow_the_sigma_posterior(level_run, level_sigma_prior) -> None:
    _, _, store = level_run
    curve = EvidenceCurve(store)
    posterior = marginal_posterior_sigma(
        curve, level_sigma_prior, global_evidence(curve, level_sigma_prior, RiemannGrid(2000))
    )
    nodes = np.linspace(0.2, 1.5, 4001)
    cdf = cumulative_trapezoid(posterior.pdf(nodes), nodes, initial=0.0)
    cdf /= cdf[-1]

    config = McmcConfig(J=40_000, burn_in=1000, step=0.25, seed=9)
    chain = noisy_mcmc_sigma(curve, level_sigma_prior, config)
    thinned = chain.draws[::20]
    result = kstest(thinned, lambda sigma: np.interp(sigma, nodes, cdf))
    assert result.statistic < 0.05


@pytest.mark.slow
def test_toy_evidence_agrees_with_the_grid(
    toy_oracle: OracleSummary, toy_sigma_prior: SigmaPrior
) -> None:
    dataset = simulate_dataset("toy", seed=1)
    for seed in range(10):
        model = ToyModel(dataset)
        config = AtaisConfig.for_model(model, N=500, T=10, sigma0=20.0, seed=seed)
        _, store = run_atais(model, config)
        estimate = global_evidence(EvidenceCurve(store), toy_sigma_prior)
        assert abs(math.expm1(estimate.log_value - toy_oracle.log_Z)) <= 0.25
