import warnings
from pathlib import Path

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*httpx.*")

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def sample_csv_path() -> Path:
    return DATA_DIR / "west_triplet_grotto_sample.csv"


@pytest.fixture(scope="session")
def fullscale_csv_path() -> Path:
    return DATA_DIR / "simulated_fullscale.csv"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20080620)
