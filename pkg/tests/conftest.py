import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emoattack.fixtures import fixture_image, fixture_oracle


@pytest.fixture
def clean_image():
    return fixture_image()


@pytest.fixture
def oracle():
    # fresh instance per test so query counters start at zero
    return fixture_oracle()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
