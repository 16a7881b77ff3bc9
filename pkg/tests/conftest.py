"""Test fixtures for the explainability engine."""

from pathlib import Path
from typing import List

import numpy as np
import pytest
from click.testing import CliRunner

from xaidesk.models.dataset import Sample, ShapeClass, gen_shapes_dataset
from xaidesk.models.network import ModelHandle, ToyConvNet, build_toycnn
from xaidesk.models.weights import save_weights
from xaidesk.schemas.model import ArchitectureConfig
from xaidesk.services.training_service import train
from xaidesk.utils.imageio import write_ppm


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# Networks
@pytest.fixture(scope="session")
def network() -> ToyConvNet:
    """Untrained full-size toy CNN."""
    return build_toycnn(7)


@pytest.fixture(scope="session")
def small_network() -> ToyConvNet:
    """Untrained 16x16 variant for gradient checks."""
    return build_toycnn(3, ArchitectureConfig.reduced())


@pytest.fixture
def model(network: ToyConvNet) -> ModelHandle:
    """Gradient-capable handle over the untrained network."""
    return ModelHandle.from_network(network)


@pytest.fixture(scope="session")
def trained_network() -> ToyConvNet:
    """Toy CNN trained on the desk-scale dataset (slow tests only)."""
    samples = gen_shapes_dataset(1000, 9)
    trained, _ = train(build_toycnn(0), samples, epochs=5, lr=0.005, seed=0)
    return trained


# Images
@pytest.fixture(scope="session")
def samples() -> List[Sample]:
    """Small deterministic dataset."""
    return gen_shapes_dataset(8, 1)


@pytest.fixture
def disk_image(samples: List[Sample]) -> np.ndarray:
    """First disk of the small dataset."""
    return next(s.image for s in samples if s.label == ShapeClass.DISK)


@pytest.fixture
def flat_image() -> np.ndarray:
    """Uniform 64x64 image far from the gray baseline."""
    return np.full((64, 64, 3), 200, dtype=np.uint8)


# Files
@pytest.fixture
def runner() -> CliRunner:
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:  # click >= 8.2 always keeps stderr separate
        return CliRunner()


@pytest.fixture
def weights_file(tmp_path: Path, network: ToyConvNet) -> Path:
    """The untrained network saved as a weight file."""
    return save_weights(network, tmp_path / "model.xaiw")


@pytest.fixture
def image_file(tmp_path: Path, disk_image: np.ndarray) -> Path:
    return write_ppm(tmp_path / "disk.ppm", disk_image)
