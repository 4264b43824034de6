"""Synthetic datasets and dataset files."""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from ..const import (
    MODEL_LINEAR,
    MODEL_RV,
    MODEL_TOY,
    MODEL_TOY_SINE,
    RV_K,
    RV_PLANETS,
    RV_SIGMA_TRUE,
    RV_SPAN,
    RV_V0_TRUE,
    RV_WINDOW_LENGTH,
    RV_WINDOWS,
    STREAM_SIMULATE,
    TOY_K,
    TOY_SIGMA_TRUE,
    TOY_THETA_TRUE,
)
from ..exceptions import ConfigError, DomainError
from ..model import Dataset
from ..rng import substream
from .linear import linear_design
from .rv import join_theta, rv_forward
from .toy import FORWARD_MAPS

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


def default_rv_theta(planets: int = len(RV_PLANETS)) -> np.ndarray:
    """Return the simulated system truncated to the first ``planets`` planets."""
    if not 1 <= planets <= len(RV_PLANETS):
        raise DomainError(f"planets must lie in [1, {len(RV_PLANETS)}]")
    return join_theta(RV_V0_TRUE, RV_PLANETS[:planets])


def observation_windows(
    rng: np.random.Generator,
    K: int,
    span: Sequence[float] = RV_SPAN,
    windows: int = RV_WINDOWS,
    length: float = RV_WINDOW_LENGTH,
) -> np.ndarray:
    """Return K sorted times drawn uniformly inside randomly placed windows."""
    start, stop = float(span[0]), float(span[1])
    if windows < 1 or not 0.0 < length <= stop - start:
        raise DomainError("observation windows do not fit in the span")
    openings = rng.uniform(start, stop - length, size=windows)
    counts = np.full(windows, K // windows)
    counts[: K % windows] += 1
    times = np.concatenate(
        [
            rng.uniform(opening, opening + length, size=count)
            for opening, count in zip(openings, counts)
        ]
    )
    return np.sort(times)


def simulate_dataset(
    kind: str,
    theta_true: Optional[Sequence[float]] = None,
    sigma_true: Optional[float] = None,
    K: Optional[int] = None,
    seed: int = 0,
    span: Sequence[float] = RV_SPAN,
    windows: int = RV_WINDOWS,
    window_length: float = RV_WINDOW_LENGTH,
) -> Dataset:
    """Return y = f(theta_true) + sigma_true * noise, deterministic in seed."""
    rng = substream(seed, STREAM_SIMULATE)

    if kind in (MODEL_TOY, MODEL_TOY_SINE):
        theta = TOY_THETA_TRUE if theta_true is None else float(np.ravel(theta_true)[0])
        sigma = TOY_SIGMA_TRUE if sigma_true is None else float(sigma_true)
        K = TOY_K if K is None else int(K)
        clean = np.full(K, float(FORWARD_MAPS[kind](theta)))
        times = None
    elif kind == MODEL_RV:
        theta = (
            default_rv_theta() if theta_true is None else np.asarray(theta_true, dtype=float)
        )
        sigma = RV_SIGMA_TRUE if sigma_true is None else float(sigma_true)
        K = RV_K if K is None else int(K)
        times = observation_windows(rng, K, span, windows, window_length)
        clean = rv_forward(theta, times)
    elif kind == MODEL_LINEAR:
        if theta_true is None:
            raise ConfigError("the linear model needs theta_true")
        theta = np.asarray(theta_true, dtype=float).reshape(-1)
        sigma = 1.0 if sigma_true is None else float(sigma_true)
        K = 2 * theta.size if K is None else int(K)
        clean = linear_design(K, theta.size) @ theta
        times = None
    else:
        raise ConfigError(f"unknown model kind: {kind}")

    if K < 1:
        raise DomainError("K must be at least 1")
    if sigma < 0.0:
        raise DomainError("sigma_true must be non-negative")
    if not np.all(np.isfinite(clean)):
        raise DomainError("forward map is undefined at theta_true")

    y = clean + sigma * rng.standard_normal(K)
    _LOGGER.debug("Simulated %s observations of %s", K, kind)
    return Dataset(y=y, times=times)


def simulation_echo(kind: str, dataset: Dataset, **settings: Any) -> Dict[str, Any]:
    """Return the JSON record stored next to a simulated dataset."""
    echo = {"model": kind, "K": dataset.K}
    for key, value in settings.items():
        echo[key] = value.tolist() if isinstance(value, np.ndarray) else value
    return echo


def write_dataset(path: PathLike, dataset: Dataset) -> None:
    """Write ``t,y`` rows; t is empty when the dataset has no times."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "y"])
        times = dataset.times if dataset.times is not None else [None] * dataset.K
        for t, y in zip(times, dataset.y):
            writer.writerow(["" if t is None else repr(float(t)), repr(float(y))])


def read_dataset(path: PathLike) -> Dataset:
    """Read a dataset written by :func:`write_dataset`."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as err:
        raise ConfigError(f"cannot read dataset {path}: {err}") from err
    if not rows or "y" not in rows[0]:
        raise ConfigError(f"dataset {path} has no y column")

    try:
        y = np.array([float(row["y"]) for row in rows])
        stamps = [row.get("t") or "" for row in rows]
        times = None
        if all(stamps):
            times = np.array([float(stamp) for stamp in stamps])
        elif any(stamps):
            raise ConfigError(f"dataset {path} has times for only some rows")
    except ValueError as err:
        raise ConfigError(f"dataset {path} has a malformed value: {err}") from err
    return Dataset(y=y, times=times)
