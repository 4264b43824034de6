"""Tests for Gaussian proposals and random substreams."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from atais.exceptions import ConfigError, DimensionMismatchError, NumericalError
from atais.proposal import GaussianProposal, sample_proposal
from atais.rng import resolve_seed, substream

MEAN = np.array([1.0, -2.0])
COV = np.array([[2.0, 0.3], [0.3, 0.5]])


def test_log_pdf_matches_scipy() -> None:
    q = GaussianProposal(MEAN, COV)
    points = np.array([[0.0, 0.0], [1.0, -2.0], [3.5, -1.0]])
    expected = multivariate_normal(MEAN, COV).logpdf(points)
    np.testing.assert_allclose(q.log_pdf(points), expected, rtol=1e-12)


def test_rejects_non_positive_definite_covariance() -> None:
    with pytest.raises(NumericalError):
        GaussianProposal(MEAN, np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_rejects_covariance_of_wrong_shape() -> None:
    with pytest.raises(DimensionMismatchError):
        GaussianProposal(MEAN, np.eye(3))


def test_scalar_covariance_is_accepted_in_one_dimension() -> None:
    q = GaussianProposal(np.array([0.0]), 4.0)
    assert q.cov.shape == (1, 1)
    assert q.log_pdf(np.array([[0.0]]))[0] == pytest.approx(-0.5 * np.log(2 * np.pi * 4.0))


def test_samples_follow_the_proposal() -> None:
    q = GaussianProposal(MEAN, COV)
    draws = sample_proposal(q, 50_000, substream(0, 0, 1))
    assert draws.shape == (50_000, 2)
    np.testing.assert_allclose(draws.mean(axis=0), MEAN, atol=0.03)
    np.testing.assert_allclose(np.cov(draws.T), COV, atol=0.08)


def test_snapshot_restores_the_same_density() -> None:
    q = GaussianProposal(MEAN, COV)
    restored = GaussianProposal.from_dict(q.as_dict())
    point = np.array([[0.2, 0.7]])
    assert restored.log_pdf(point)[0] == q.log_pdf(point)[0]


def test_substreams_are_reproducible_and_distinct() -> None:
    first = substream(42, 0, 3).standard_normal(5)
    again = substream(42, 0, 3).standard_normal(5)
    other_counter = substream(42, 0, 4).standard_normal(5)
    other_stream = substream(42, 1, 3).standard_normal(5)
    np.testing.assert_array_equal(first, again)
    assert not np.allclose(first, other_counter)
    assert not np.allclose(first, other_stream)


def test_seed_falls_back_to_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ATAIS_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(3) == 3
    monkeypatch.delenv("ATAIS_SEED")
    assert resolve_seed(None) == 0


def test_invalid_seed_variable_is_a_config_error(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ATAIS_SEED", "abc")
    with pytest.raises(ConfigError):
        resolve_seed(None)
