"""Run configuration: JSON files validated with voluptuous, dotted-flag overrides."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import voluptuous as vol

from .baseline import StandardAisConfig
from .const import (
    DEFAULT_EVIDENCE_POINTS,
    DEFAULT_MCMC_BURN_IN,
    DEFAULT_MCMC_LENGTH,
    DEFAULT_MCMC_STEP,
    DEFAULT_N,
    DEFAULT_ORACLE_POINTS,
    DEFAULT_ORACLE_THETA_POINTS,
    DEFAULT_SIR_SAMPLES,
    DEFAULT_T,
    EVIDENCE_SCHEMES,
    LINEAR_SIGMA0,
    LINEAR_SIGMA_PRIOR,
    MODEL_KINDS,
    MODEL_LINEAR,
    MODEL_RV,
    MODEL_TOY,
    MODEL_TOY_SINE,
    RV_AMPLITUDE_BOUND,
    RV_NARROW_AMPLITUDE_BOUND,
    RV_SIGMA0,
    RV_SIGMA_PRIOR,
    RV_SPAN,
    RV_WINDOW_LENGTH,
    RV_WINDOWS,
    SCHEME_RIEMANN,
    TOY_SIGMA0,
    TOY_SIGMA_PRIOR,
)
from .evidence import McmcConfig, PostProcessingSettings, make_scheme
from .exceptions import ConfigError
from .model import Dataset, ObservationModel, SigmaPrior
from .models import build_model
from .models.simulate import default_rv_theta, read_dataset, simulate_dataset
from .rng import resolve_seed
from .sampler import AtaisConfig
from .store import read_json

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

# sigma0 and sigma prior support per model kind
MODEL_DEFAULTS: Dict[str, Dict[str, Any]] = {
    MODEL_TOY: {"sigma0": TOY_SIGMA0, "sigma_prior": TOY_SIGMA_PRIOR},
    MODEL_TOY_SINE: {"sigma0": TOY_SIGMA0, "sigma_prior": TOY_SIGMA_PRIOR},
    MODEL_RV: {"sigma0": RV_SIGMA0, "sigma_prior": RV_SIGMA_PRIOR},
    MODEL_LINEAR: {"sigma0": LINEAR_SIGMA0, "sigma_prior": LINEAR_SIGMA_PRIOR},
}


def ensure_list(value: Any) -> List[Any]:
    """Wrap a value in a list if it is not one already."""
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


positive_float = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
non_negative_float = vol.All(vol.Coerce(float), vol.Range(min=0.0))
positive_int = vol.All(vol.Coerce(int), vol.Range(min=1))
float_list = vol.All(ensure_list, [vol.Coerce(float)])
optional_int = vol.Any(None, vol.Coerce(int))
interval = vol.All(ensure_list, [vol.Coerce(float)], vol.Length(min=2, max=2))

MODEL_SCHEMA = vol.Schema(
    {
        vol.Optional("kind", default=MODEL_TOY): vol.In(MODEL_KINDS),
        vol.Optional("planets", default=1): positive_int,
        vol.Optional("amplitude_bound", default=RV_AMPLITUDE_BOUND): positive_float,
        vol.Optional("narrow_amplitude_box", default=False): vol.Boolean(),
        vol.Optional("dimension", default=1): positive_int,
        vol.Optional("box", default=None): vol.Any(None, interval),
    }
)

DATA_SCHEMA = vol.Schema({vol.Optional("path", default=None): vol.Any(None, str)})

SIMULATE_SCHEMA = vol.Schema(
    {
        vol.Optional("theta_true", default=None): vol.Any(None, float_list),
        vol.Optional("sigma_true", default=None): vol.Any(None, non_negative_float),
        vol.Optional("k", default=None): vol.Any(None, positive_int),
        vol.Optional("planets", default=None): vol.Any(None, positive_int),
        vol.Optional("seed", default=None): optional_int,
        vol.Optional("span", default=list(RV_SPAN)): interval,
        vol.Optional("windows", default=RV_WINDOWS): positive_int,
        vol.Optional("window_length", default=RV_WINDOW_LENGTH): positive_float,
    }
)

ALGORITHM_SCHEMA = vol.Schema(
    {
        vol.Optional("N", default=DEFAULT_N): positive_int,
        vol.Optional("T", default=DEFAULT_T): positive_int,
        vol.Optional("sigma0", default=None): vol.Any(None, positive_float),
        vol.Optional("mu0", default=None): vol.Any(None, float_list),
        vol.Optional("proposal_std", default=None): vol.Any(None, float_list),
        vol.Optional("eps", default=None): vol.Any(None, positive_float),
        vol.Optional("seed", default=None): optional_int,
    }
)

MCMC_SCHEMA = vol.Schema(
    {
        vol.Optional("J", default=DEFAULT_MCMC_LENGTH): positive_int,
        vol.Optional("burn_in", default=DEFAULT_MCMC_BURN_IN): vol.All(
            vol.Coerce(int), vol.Range(min=0)
        ),
        vol.Optional("step", default=DEFAULT_MCMC_STEP): positive_float,
        vol.Optional("seed", default=None): optional_int,
    }
)

POST_SCHEMA = vol.Schema(
    {
        vol.Optional("sigma_prior", default=None): vol.Any(None, interval),
        vol.Optional("scheme", default=SCHEME_RIEMANN): vol.In(EVIDENCE_SCHEMES),
        vol.Optional("R", default=DEFAULT_EVIDENCE_POINTS): positive_int,
        vol.Optional("evidence_seed", default=None): optional_int,
        vol.Optional("mcmc", default={}): MCMC_SCHEMA,
        vol.Optional("sir_samples", default=DEFAULT_SIR_SAMPLES): positive_int,
        vol.Optional("sir_seed", default=None): optional_int,
        vol.Optional("grid_points", default=DEFAULT_EVIDENCE_POINTS): positive_int,
    }
)

ORACLE_SCHEMA = vol.Schema(
    {
        vol.Optional("theta_points", default=DEFAULT_ORACLE_THETA_POINTS): vol.All(
            vol.Coerce(int), vol.Range(min=2)
        ),
        vol.Optional("sigma_points", default=DEFAULT_ORACLE_POINTS): vol.All(
            vol.Coerce(int), vol.Range(min=2)
        ),
        vol.Optional("certify", default=True): vol.Boolean(),
    }
)

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional("model", default={}): MODEL_SCHEMA,
        vol.Optional("data", default={}): DATA_SCHEMA,
        vol.Optional("simulate", default={}): SIMULATE_SCHEMA,
        vol.Optional("algorithm", default={}): ALGORITHM_SCHEMA,
        vol.Optional("post", default={}): POST_SCHEMA,
        vol.Optional("oracle", default={}): ORACLE_SCHEMA,
        vol.Optional("output_dir", default="."): str,
        vol.Optional("workers", default=1): positive_int,
    }
)


def schema_paths(schema: vol.Schema = RUN_CONFIG_SCHEMA, prefix: str = "") -> List[str]:
    """Return the dotted names of every leaf of a schema."""
    paths = []
    for key, value in schema.schema.items():
        name = f"{prefix}{key.schema}"
        if isinstance(value, vol.Schema):
            paths.extend(schema_paths(value, f"{name}."))
        else:
            paths.append(name)
    return paths


def parse_override(raw: str) -> Any:
    """Parse a flag value as JSON, falling back to the raw string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set dotted keys in a nested dictionary; string values are parsed first."""
    known = set(schema_paths())
    for path, raw in overrides.items():
        if path not in known:
            raise ConfigError(f"unknown configuration key: {path}")
        value = parse_override(raw) if isinstance(raw, str) else raw
        node = data
        *parents, leaf = path.split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"configuration key {part} is not a block")
            node = child
        node[leaf] = value
    return data


def validate_run_config(data: Mapping[str, Any]) -> Dict[str, Any]:
    """Validate a configuration and resolve every seed."""
    try:
        config = RUN_CONFIG_SCHEMA(dict(data))
    except vol.Invalid as err:
        raise ConfigError(f"invalid configuration: {err}") from err

    seed = resolve_seed(config["algorithm"]["seed"])
    config["algorithm"]["seed"] = seed
    for block, key in (("simulate", "seed"), ("post", "evidence_seed"), ("post", "sir_seed")):
        if config[block][key] is None:
            config[block][key] = seed
    if config["post"]["mcmc"]["seed"] is None:
        config["post"]["mcmc"]["seed"] = seed
    if config["model"]["narrow_amplitude_box"]:
        config["model"]["amplitude_bound"] = RV_NARROW_AMPLITUDE_BOUND
    return config


def load_run_config(
    path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Load, override and validate a run configuration."""
    data: Dict[str, Any] = {}
    if path is not None:
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigError(f"configuration {path} must be a JSON object")
    return validate_run_config(apply_overrides(data, overrides or {}))


def output_dir_for(config: Mapping[str, Any]) -> Path:
    """Return the output directory, which must already exist."""
    directory = Path(config["output_dir"])
    if not directory.is_dir():
        raise ConfigError(f"output directory {directory} does not exist")
    return directory


def sigma_prior_for(config: Mapping[str, Any]) -> SigmaPrior:
    """Return the configured sigma prior or the model kind's default."""
    bounds = config["post"]["sigma_prior"]
    if bounds is None:
        bounds = MODEL_DEFAULTS[config["model"]["kind"]]["sigma_prior"]
    try:
        return SigmaPrior(float(bounds[0]), float(bounds[1]))
    except ValueError as err:
        raise ConfigError(str(err)) from err


def sigma0_for(config: Mapping[str, Any]) -> float:
    """Return the initial tempering scale."""
    sigma0 = config["algorithm"]["sigma0"]
    return MODEL_DEFAULTS[config["model"]["kind"]]["sigma0"] if sigma0 is None else sigma0


def simulate_for(config: Mapping[str, Any]) -> Dataset:
    """Simulate the dataset described by the ``simulate`` block."""
    block = config["simulate"]
    kind = config["model"]["kind"]
    theta_true = block["theta_true"]
    if kind == MODEL_RV and theta_true is None and block["planets"] is not None:
        theta_true = default_rv_theta(block["planets"])
    try:
        return simulate_dataset(
            kind,
            theta_true=theta_true,
            sigma_true=block["sigma_true"],
            K=block["k"],
            seed=block["seed"],
            span=block["span"],
            windows=block["windows"],
            window_length=block["window_length"],
        )
    except ValueError as err:
        raise ConfigError(f"cannot simulate dataset: {err}") from err


def dataset_for(config: Mapping[str, Any]) -> Dataset:
    """Return the dataset from ``data.path``, or simulate one."""
    path = config["data"]["path"]
    if path is None:
        return simulate_for(config)
    return read_dataset(path)


def model_for(config: Mapping[str, Any], dataset: Dataset) -> ObservationModel:
    """Return the configured observation model over a dataset."""
    block = config["model"]
    try:
        return build_model(
            block["kind"],
            dataset,
            planets=block["planets"],
            amplitude_bound=block["amplitude_bound"],
            dimension=block["dimension"],
            box=block["box"],
        )
    except ValueError as err:
        raise ConfigError(f"cannot build model: {err}") from err


def _vector(value: Optional[List[float]]) -> Optional[np.ndarray]:
    """Return a list as an array, keeping None."""
    return None if value is None else np.asarray(value, dtype=float)


def atais_config_for(config: Mapping[str, Any], model: ObservationModel) -> AtaisConfig:
    """Return the sampler settings for a model."""
    block = config["algorithm"]
    try:
        return AtaisConfig.for_model(
            model,
            N=block["N"],
            T=block["T"],
            sigma0=sigma0_for(config),
            mu0=_vector(block["mu0"]),
            proposal_std=_vector(block["proposal_std"]),
            eps=block["eps"],
            seed=block["seed"],
        )
    except ValueError as err:
        raise ConfigError(f"invalid sampler settings: {err}") from err


def baseline_config_for(
    config: Mapping[str, Any], model: ObservationModel, sigma_prior: SigmaPrior
) -> StandardAisConfig:
    """Return the baseline settings; mu0 and proposal_std cover (theta, sigma)."""
    block = config["algorithm"]
    try:
        return StandardAisConfig.for_model(
            model,
            sigma_prior,
            N=block["N"],
            T=block["T"],
            mu0=_vector(block["mu0"]),
            proposal_std=_vector(block["proposal_std"]),
            eps=block["eps"],
            seed=block["seed"],
        )
    except ValueError as err:
        raise ConfigError(f"invalid baseline settings: {err}") from err


def post_settings_for(config: Mapping[str, Any]) -> PostProcessingSettings:
    """Return the post-processing settings."""
    block = config["post"]
    mcmc = block["mcmc"]
    return PostProcessingSettings(
        scheme=make_scheme(block["scheme"], block["R"], block["evidence_seed"]),
        mcmc=McmcConfig(
            J=mcmc["J"], burn_in=mcmc["burn_in"], step=mcmc["step"], seed=mcmc["seed"]
        ),
        sir_samples=block["sir_samples"],
        grid_points=block["grid_points"],
        sir_seed=block["sir_seed"],
    )
