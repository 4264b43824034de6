"""Counter-based random substreams.

Every random draw in the package comes from a generator keyed by
(master seed, stream id, counter...), so results do not depend on the order
in which workers finish.
"""

import os
from typing import Optional

import numpy as np

from .const import DEFAULT_SEED, ENV_SEED
from .exceptions import ConfigError


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the Philox generator for (seed, *key)."""
    sequence = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))


def resolve_seed(seed: Optional[int]) -> int:
    """Return seed, falling back to the ATAIS_SEED environment variable."""
    if seed is not None:
        return int(seed)
    value = os.environ.get(ENV_SEED)
    if value is None or value == "":
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"{ENV_SEED} must be an integer, got {value!r}") from err
