from functools import lru_cache

import numpy as np
import pytest

from gameinverse import GameSpec, MethodConfig
from gameinverse.evaluation import random_completely_mixed_game


@lru_cache(maxsize=None)
def mixed_games(n: int, seed: int = 2024) -> tuple[GameSpec, ...]:
    """Random completely mixed 2x2 games on the default grid range."""
    rng = np.random.default_rng(seed)
    return tuple(random_completely_mixed_game(rng, name=f"g{k}") for k in range(n))


@pytest.fixture
def cfg():
    return MethodConfig()


@pytest.fixture
def pennies():
    return GameSpec([[1, 0], [0, 1]], [[0, 1], [1, 0]], "pennies")
