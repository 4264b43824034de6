"""End-to-end jobs behind the command line: run, post-process, compare, oracle."""

import copy
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from . import __version__
from .baseline import run_standard_ais
from .config import (
    apply_overrides,
    atais_config_for,
    baseline_config_for,
    dataset_for,
    model_for,
    output_dir_for,
    post_settings_for,
    sigma_prior_for,
    simulate_for,
    validate_run_config,
)
from .const import (
    FILE_BASELINE_PARTICLES,
    FILE_BASELINE_SUMMARY,
    FILE_COMPARISON,
    FILE_DATASET,
    FILE_DATASET_INFO,
    FILE_EVIDENCE_CURVE,
    FILE_JOINT_SAMPLES,
    FILE_ORACLE_SIGMA,
    FILE_ORACLE_SUMMARY,
    FILE_ORACLE_THETA,
    FILE_PARTICLES,
    FILE_PROPOSALS,
    FILE_SIGMA_POSTERIOR,
    FILE_SUMMARY,
)
from .coordinator import EvaluationCoordinator
from .evidence import EvidenceCurve, PostProcessingResult, global_evidence, run_post_processing
from .exceptions import ConfigError, NumericalError
from .model import Dataset, ObservationModel
from .models.simulate import simulation_echo, write_dataset
from .oracle import GridSpec, OracleSummary, grid_joint_and_marginals
from .sampler import TemperState, correct_weights, posterior_estimates, run_atais
from .store import ParticleStore, read_json, write_json

_LOGGER = logging.getLogger(__name__)


def _write_rows(path: Path, header: Sequence[str], rows: Any) -> None:
    """Write a CSV table with repr-formatted floats."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(value)) for value in row])


def simulate_job(config: Mapping[str, Any]) -> Dataset:
    """Simulate a dataset and write it with its settings."""
    out = output_dir_for(config)
    dataset = simulate_for(config)
    write_dataset(out / FILE_DATASET, dataset)
    echo = simulation_echo(config["model"]["kind"], dataset, **config["simulate"])
    write_json(out / FILE_DATASET_INFO, echo)
    _LOGGER.info("Wrote %s observations to %s", dataset.K, out / FILE_DATASET)
    return dataset


def _post_artifacts(out: Path, store: ParticleStore, result: PostProcessingResult) -> None:
    """Write the evidence curve, sigma posterior and joint samples."""
    _write_rows(out / FILE_EVIDENCE_CURVE, ["sigma", "Z_hat", "log_Z_hat"], result.curve_table)
    _write_rows(out / FILE_SIGMA_POSTERIOR, ["sigma", "pdf"], result.posterior_table)
    header = [f"theta_{i}" for i in range(store.dimension)] + ["sigma"]
    _write_rows(out / FILE_JOINT_SAMPLES, header, result.joint_samples)


def _run_summary(
    config: Mapping[str, Any],
    state: TemperState,
    store: ParticleStore,
    weights: np.ndarray,
    post: PostProcessingResult,
) -> Dict[str, Any]:
    """Return the JSON summary of a complete run."""
    estimate = posterior_estimates(store, weights, state)
    summary = {
        "version": __version__,
        "config": config,
        "K": store.K,
        "theta_map": None if state.theta_map_hat is None else state.theta_map_hat.tolist(),
        "sigma_ml": state.sigma_ml_hat,
        "V_min": state.V_min,
        "sigma_schedule": list(store.sigma_schedule),
        "n_forward_evals": store.n_forward_evals,
        "conditional_mean": estimate.mean.tolist(),
        "conditional_cov": estimate.cov.tolist(),
        "ess": estimate.ess,
        "warnings": estimate.warnings,
    }
    summary.update(post.summary)
    return summary


def run_job(
    config: Mapping[str, Any], coordinator: Optional[EvaluationCoordinator] = None
) -> Dict[str, Any]:
    """Run the sampler and the whole post-processing chain; write every artifact."""
    out = output_dir_for(config)
    dataset = dataset_for(config)
    model = model_for(config, dataset)
    sigma_prior = sigma_prior_for(config)
    settings = post_settings_for(config)
    sampler_config = atais_config_for(config, model)

    if coordinator is None:
        with EvaluationCoordinator(config["workers"]) as pool:
            state, store = run_atais(model, sampler_config, pool)
    else:
        state, store = run_atais(model, sampler_config, coordinator)

    calls = model.n_forward_evals
    weights = correct_weights(store)
    post = run_post_processing(store, sigma_prior, settings)
    if model.n_forward_evals != calls:
        raise NumericalError("post-processing evaluated the forward map")

    store.to_csv(out / FILE_PARTICLES)
    write_json(
        out / FILE_PROPOSALS,
        {"proposals": store.proposals_as_json(), "sigma_schedule": list(store.sigma_schedule)},
    )
    _post_artifacts(out, store, post)
    summary = _run_summary(config, state, store, weights, post)
    write_json(out / FILE_SUMMARY, summary)
    _LOGGER.info("Run artifacts written to %s", out)
    return summary


def post_job(run_dir: Path, overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """Recompute the post-processing artifacts of an existing run directory."""
    run_dir = Path(run_dir)
    summary = read_json(run_dir / FILE_SUMMARY)
    saved = read_json(run_dir / FILE_PROPOSALS)
    if not isinstance(summary, dict) or "config" not in summary or "K" not in summary:
        raise ConfigError(f"{run_dir / FILE_SUMMARY} is not a run summary")

    data = copy.deepcopy(summary["config"])
    data["output_dir"] = str(run_dir)
    config = validate_run_config(apply_overrides(data, overrides or {}))

    store = ParticleStore.from_csv(
        run_dir / FILE_PARTICLES,
        int(summary["K"]),
        sigma_schedule=saved.get("sigma_schedule"),
        proposals=saved.get("proposals"),
    )
    post = run_post_processing(store, sigma_prior_for(config), post_settings_for(config))
    _post_artifacts(run_dir, store, post)
    summary.update(post.summary)
    summary["config"] = config
    write_json(run_dir / FILE_SUMMARY, summary)
    return summary


def baseline_job(
    config: Mapping[str, Any], coordinator: Optional[EvaluationCoordinator] = None
) -> Dict[str, Any]:
    """Run the joint-space baseline and write its particles and summary."""
    out = output_dir_for(config)
    dataset = dataset_for(config)
    model = model_for(config, dataset)
    sigma_prior = sigma_prior_for(config)
    baseline_config = baseline_config_for(config, model, sigma_prior)

    if coordinator is None:
        with EvaluationCoordinator(config["workers"]) as pool:
            result = run_standard_ais(model, sigma_prior, baseline_config, pool)
    else:
        result = run_standard_ais(model, sigma_prior, baseline_config, coordinator)

    result.to_csv(out / FILE_BASELINE_PARTICLES)
    summary = {"version": __version__, "config": config, **result.summary()}
    write_json(out / FILE_BASELINE_SUMMARY, summary)
    return summary


def oracle_job(config: Mapping[str, Any]) -> OracleSummary:
    """Compute and write the grid ground truth of a one-parameter model."""
    out = output_dir_for(config)
    model = model_for(config, dataset_for(config))
    if model.dimension != 1:
        raise ConfigError("the grid oracle needs a one-parameter model")
    sigma_prior = sigma_prior_for(config)
    block = config["oracle"]
    spec = GridSpec.for_model(
        model, sigma_prior, theta_points=block["theta_points"], sigma_points=block["sigma_points"]
    )
    summary = grid_joint_and_marginals(model, sigma_prior, spec, certify=block["certify"])

    write_json(out / FILE_ORACLE_SUMMARY, {"version": __version__, **summary.to_dict()})
    conditional = summary.conditional.density
    _write_rows(
        out / FILE_ORACLE_THETA,
        ["theta", "p_theta", "p_theta_given_sigma_ml"],
        zip(summary.theta_nodes, summary.theta_marginal, conditional),
    )
    _write_rows(
        out / FILE_ORACLE_SIGMA,
        ["sigma", "p_sigma"],
        zip(summary.sigma_nodes, summary.sigma_marginal),
    )
    return summary


def with_seed(config: Mapping[str, Any], seed: int) -> Dict[str, Any]:
    """Return a copy of a configuration with every sampling seed replaced."""
    seeded = copy.deepcopy(dict(config))
    seeded["algorithm"]["seed"] = seed
    seeded["post"]["evidence_seed"] = seed
    seeded["post"]["sir_seed"] = seed
    seeded["post"]["mcmc"]["seed"] = seed
    return seeded


def estimate_log_evidence(
    config: Mapping[str, Any],
    dataset: Dataset,
    coordinator: Optional[EvaluationCoordinator] = None,
) -> Tuple[float, ObservationModel]:
    """Return log Z_hat of the configured model on a dataset."""
    model = model_for(config, dataset)
    _, store = run_atais(model, atais_config_for(config, model), coordinator)
    settings = post_settings_for(config)
    evidence = global_evidence(EvidenceCurve(store), sigma_prior_for(config), settings.scheme)
    return evidence.log_value, model


@dataclass(frozen=True)
class Comparison:
    """Evidence of two models on one dataset for one seed."""

    seed: int
    log_Z_a: float
    log_Z_b: float

    @property
    def log_B(self) -> float:
        """Return log(Z_b / Z_a)."""
        return self.log_Z_b - self.log_Z_a

    @property
    def selected(self) -> str:
        """Return the model with the larger evidence."""
        return "b" if self.log_B > 0.0 else "a"


def relative_variance(log_values: np.ndarray) -> float:
    """Return var(B) / mean(B)^2 of values given as logs."""
    log_values = np.asarray(log_values, dtype=float)
    if log_values.size < 2:
        return 0.0
    log_n = math.log(log_values.size)
    log_mean = logsumexp(log_values) - log_n
    log_second = logsumexp(2.0 * log_values) - log_n
    return float(math.expm1(log_second - 2.0 * log_mean))


def compare_models_job(
    config_a: Mapping[str, Any],
    config_b: Mapping[str, Any],
    seeds: Optional[Sequence[int]] = None,
    true_model: Optional[str] = None,
) -> Dict[str, Any]:
    """Compare two models on the dataset of the first configuration."""
    out = output_dir_for(config_a)
    if true_model not in (None, "a", "b"):
        raise ConfigError("true model must be 'a' or 'b'")
    if config_b["data"]["path"] not in (None, config_a["data"]["path"]):
        raise ConfigError("both models must be compared on the same dataset")
    dataset = dataset_for(config_a)
    seeds = [config_a["algorithm"]["seed"]] if not seeds else list(seeds)

    results: List[Comparison] = []
    with EvaluationCoordinator(config_a["workers"]) as pool:
        for seed in seeds:
            log_Z_a, _ = estimate_log_evidence(with_seed(config_a, seed), dataset, pool)
            log_Z_b, _ = estimate_log_evidence(with_seed(config_b, seed), dataset, pool)
            results.append(Comparison(seed=seed, log_Z_a=log_Z_a, log_Z_b=log_Z_b))
            _LOGGER.info("Seed %s: log B=%.4g", seed, results[-1].log_B)

    log_B = np.array([result.log_B for result in results])
    report: Dict[str, Any] = {
        "version": __version__,
        "models": {"a": config_a["model"], "b": config_b["model"]},
        "runs": [
            {
                "seed": result.seed,
                "Z_a": math.exp(result.log_Z_a),
                "Z_b": math.exp(result.log_Z_b),
                "log_Z_a": result.log_Z_a,
                "log_Z_b": result.log_Z_b,
                "log_B": result.log_B,
                "B": math.exp(result.log_B),
                "selected": result.selected,
            }
            for result in results
        ],
        "median_log_B": float(np.median(log_B)),
        "relative_variance_B": relative_variance(log_B),
    }
    if true_model is not None:
        hits = sum(result.selected == true_model for result in results)
        report["true_model"] = true_model
        report["detection_percentage"] = 100.0 * hits / len(results)
    write_json(out / FILE_COMPARISON, report)
    return report
