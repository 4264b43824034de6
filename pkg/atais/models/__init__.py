"""Benchmark observation models."""

from typing import Optional, Sequence

from ..const import MODEL_LINEAR, MODEL_RV, MODEL_TOY, MODEL_TOY_SINE, RV_AMPLITUDE_BOUND
from ..exceptions import ConfigError
from ..model import Dataset, ObservationModel
from .linear import LinearModel, linear_box, linear_design
from .rv import RvModel
from .toy import ToyModel, toy_box

__all__ = [
    "LinearModel",
    "RvModel",
    "ToyModel",
    "build_model",
]


def build_model(
    kind: str,
    dataset: Dataset,
    planets: int = 1,
    amplitude_bound: float = RV_AMPLITUDE_BOUND,
    dimension: int = 1,
    box: Optional[Sequence[float]] = None,
) -> ObservationModel:
    """Return the observation model of the given kind over a dataset."""
    if kind in (MODEL_TOY, MODEL_TOY_SINE):
        return ToyModel(dataset, variant=kind, prior=toy_box(box))
    if kind == MODEL_RV:
        if box is not None:
            raise ConfigError("the radial-velocity box is set through amplitude_bound")
        return RvModel(dataset, planets, amplitude_bound=amplitude_bound)
    if kind == MODEL_LINEAR:
        return LinearModel(
            dataset, linear_design(dataset.K, dimension), prior=linear_box(dimension, box)
        )
    raise ConfigError(f"unknown model kind: {kind}")
