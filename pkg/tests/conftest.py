import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mtnn.platform import PlatformFeatures

# The two reference platform rows used throughout the tests.
PLATFORM_A = {"gm": 8, "sm": 20, "cc": 1607, "mbw": 256, "l2c": 2048}
PLATFORM_B = {"gm": 10, "sm": 28, "cc": 1417, "mbw": 384, "l2c": 3072}


@pytest.fixture
def platform_a() -> PlatformFeatures:
    return PlatformFeatures(**{k: float(v) for k, v in PLATFORM_A.items()})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
