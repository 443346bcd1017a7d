import numpy as np
import pytest

from guessgame import world
from guessgame.config import ModelConfig


@pytest.fixture
def tiny_cfg():
    """Small enough that elementwise finite-difference sweeps stay fast."""
    return ModelConfig(d_word=4, d_h=5, d_v=3, k=4, max_len=6, category_emb=3)


@pytest.fixture
def small_cfg():
    return ModelConfig(d_word=8, d_h=12, d_v=6, k=4, max_len=8)


@pytest.fixture
def scene4():
    return world.generate_scene(42, k=4, d_v=6)


@pytest.fixture
def tiny_scene():
    return world.generate_scene(42, k=4, d_v=3)


def make_dialogue(scene, target, seed=0, max_turns=4):
    return world.sample_human_dialogue(scene, target, seed, max_turns)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
