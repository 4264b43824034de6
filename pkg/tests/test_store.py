"""Tests for the particle store."""

import math

import numpy as np
import pytest

from atais.exceptions import ConfigError, DomainError
from atais.model import log_likelihood
from atais.models import ToyModel
from atais.sampler import AtaisConfig, run_atais
from atais.store import ParticleStore, particle_columns, read_json, write_json


@pytest.fixture
def toy_store(toy_model: ToyModel) -> ParticleStore:
    config = AtaisConfig.for_model(toy_model, N=50, T=4, sigma0=20.0, seed=4)
    return run_atais(toy_model, config)[1]


def test_iterations_must_be_appended_in_order() -> None:
    store = ParticleStore(1, 2)
    with pytest.raises(DomainError):
        store.append_iteration(2, np.zeros((1, 1)), [0.0], [1.0], 1.0, None)


def test_rho_at_the_weighting_scale_is_the_stored_weight(toy_store: ParticleStore) -> None:
    first = toy_store.iterations == 1
    np.testing.assert_allclose(
        toy_store.log_rho(toy_store.sigma_schedule[0])[first], toy_store.log_w[first]
    )


def test_rho_matches_direct_reweighting(toy_store: ParticleStore) -> None:
    sigma = 3.0
    expected = np.empty(len(toy_store))
    for i, record in enumerate(toy_store.records()):
        q = toy_store.proposals[record.proposal_id]
        if not math.isfinite(record.log_w):
            expected[i] = -np.inf
            continue
        expected[i] = (
            log_likelihood(record.residual, toy_store.K, sigma)
            - math.log(20.0)
            - q.log_pdf(record.theta)[0]
        )
    np.testing.assert_allclose(toy_store.log_rho(sigma), expected, rtol=1e-9)


def test_rho_rejects_non_positive_sigma(toy_store: ParticleStore) -> None:
    with pytest.raises(DomainError):
        toy_store.log_rho(0.0)


def test_csv_file_restores_every_weight(toy_store: ParticleStore, tmp_path) -> None:
    path = tmp_path / "particles.csv"
    toy_store.to_csv(path)
    with open(path) as handle:
        assert handle.readline().strip() == ",".join(particle_columns(1))
    restored = ParticleStore.from_csv(
        path,
        toy_store.K,
        sigma_schedule=toy_store.sigma_schedule,
        proposals=toy_store.proposals_as_json(),
    )
    assert restored.n_iterations == toy_store.n_iterations
    assert restored.sigma_schedule == toy_store.sigma_schedule
    np.testing.assert_array_equal(restored.log_rho(2.5), toy_store.log_rho(2.5))
    np.testing.assert_array_equal(restored.proposals[2].cov, toy_store.proposals[2].cov)


def test_csv_file_with_wrong_header_is_rejected(tmp_path) -> None:
    path = tmp_path / "particles.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ConfigError):
        ParticleStore.from_csv(path, 8)
    with pytest.raises(ConfigError):
        ParticleStore.from_csv(tmp_path / "missing.csv", 8)


def test_json_output_is_sorted(tmp_path) -> None:
    path = tmp_path / "out.json"
    write_json(path, {"b": 1, "a": [1.5, -math.inf]})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(path)["a"][1] == -math.inf


def test_unreadable_json_is_a_config_error(tmp_path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        read_json(path)
