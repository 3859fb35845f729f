import numpy as np
import pytest
from exits.geometry import BBox, CropWindow
from exits.synth import SceneSpec


@pytest.fixture()
def rng():
    """
    Seeded generator, fresh for every test
    """

    return np.random.default_rng(1234)


@pytest.fixture()
def window8():
    """
    Window whose rect is the 512px target square, split in 8x8 patches
    """

    return CropWindow(BBox(0, 0, 511, 511), 512, 8)


@pytest.fixture()
def scene_spec():
    """
    Separated-object scene specification
    """

    def _scene_spec(**kwargs) -> SceneSpec:
        values = {"count": 1, "seed": 7}
        values.update(kwargs)
        return SceneSpec(**values)

    return _scene_spec


@pytest.fixture()
def two_communities():
    """
    Block-diagonal similarity of two uniform communities
    """

    def _two_communities(size_a: int, size_b: int, leak: float = 0.0) -> np.ndarray:
        n = size_a + size_b
        matrix = np.full((n, n), leak)
        matrix[:size_a, :size_a] = 1.0
        matrix[size_a:, size_a:] = 1.0
        return matrix

    return _two_communities
