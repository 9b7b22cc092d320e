import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from denaudit import Dataset, build_distance_profile  # noqa: E402


@pytest.fixture
def line3():
    """Three points on a line at 0, 1, 3 with errors 0, 0.2, 0.8."""
    return Dataset.create([0.0, 1.0, 3.0], [0.0, 0.2, 0.8])


@pytest.fixture
def line3_profile(line3):
    return build_distance_profile(line3)

