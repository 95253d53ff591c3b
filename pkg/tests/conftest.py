import numpy as np
import pytest

from trapdist.geometry import DepthKind, DepthMap, DisparityMap


def depth_map(values, valid=None, kind=DepthKind.GROUND_TRUTH) -> DepthMap:
    values = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.ones(values.shape, dtype=bool)
    return DepthMap(np.where(valid, values, 0.0), valid, kind)


def disparity_map(values, valid=None) -> DisparityMap:
    values = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.ones(values.shape, dtype=bool)
    return DisparityMap(np.where(valid, values, 0.0), valid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
