import numpy as np
import pytest

from sqvi.problems import SyntheticGame, make_regression_game, make_translated_box_qvi


@pytest.fixture(scope="session")
def box_problem():
    return make_translated_box_qvi(n=20, seed=7)


@pytest.fixture(scope="session")
def noisy_box_problem():
    return make_translated_box_qvi(n=20, seed=7, noise_level=0.5)


@pytest.fixture(scope="session")
def game_problem():
    return make_regression_game(SyntheticGame(), sigma=1e-2)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
