import numpy as np
import pytest

from mimosd.channel import qpsk
from mimosd.predictor import TrainerConfig, generate_dataset, load_model, save_model, train

import helpers


@pytest.fixture(scope="session")
def qpsk_c():
    return qpsk()


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    return tmp_path_factory.mktemp("artifacts")


def _build_model(artifacts, name, recipe, constellation):
    path = artifacts / f"{name}.json"
    dataset = generate_dataset(recipe["n_t"], recipe["n_r"], constellation,
                               (4.0, 14.0), recipe["samples"],
                               np.random.default_rng(recipe["data_seed"]))
    model, _ = train(dataset, TrainerConfig(max_epochs=recipe["epochs"],
                                            seed=recipe["train_seed"]))
    save_model(model, path)
    return str(path)


@pytest.fixture(scope="session")
def model4_path(artifacts, qpsk_c):
    return _build_model(artifacts, "model4", helpers.MODEL4_RECIPE, qpsk_c)


@pytest.fixture(scope="session")
def model4(model4_path):
    return load_model(model4_path)


@pytest.fixture(scope="session")
def model8_path(artifacts, qpsk_c):
    return _build_model(artifacts, "model8", helpers.MODEL8_RECIPE, qpsk_c)


@pytest.fixture(scope="session")
def model8(model8_path):
    return load_model(model8_path)


@pytest.fixture(scope="session")
def model16_path(artifacts, qpsk_c):
    return _build_model(artifacts, "model16", helpers.MODEL16_RECIPE, qpsk_c)


@pytest.fixture(scope="session")
def model16(model16_path):
    return load_model(model16_path)
