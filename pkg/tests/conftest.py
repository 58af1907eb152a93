import numpy as np
import pytest


def reflect_index(i: int, n: int) -> int:
    """Mirror an out-of-range index without repeating the edge pixel."""
    while i < 0 or i >= n:
        i = -i if i < 0 else 2 * n - 2 - i
    return i


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
