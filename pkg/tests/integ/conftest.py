import os
from pathlib import Path
import numpy as np
import pytest
from exits import config, synth


RESOURCES = Path(os.path.dirname(__file__)).parent.parent / "resources"


@pytest.fixture(scope="session")
def resources():
    """
    Directory of the bundled suite and run configurations
    """

    return RESOURCES


@pytest.fixture(scope="session")
def separated_config():
    cfg, _ = config.load_config(RESOURCES / "separated-run.yaml")
    return cfg


@pytest.fixture(scope="session")
def separated_suite():
    """
    The 50 scenes of the separated-parts suite
    """

    return list(synth.generate_suite(config.load_scene_spec(RESOURCES / "separated.yaml")))


@pytest.fixture
def small_run(tmp_path):
    """
    Spec and run configuration files for a two-scene suite on a coarse patch grid
    """

    spec = tmp_path / "spec.yaml"
    spec.write_text("count: 2\nseed: 3\nnoise_sigma: 0.0\n")
    run = tmp_path / "run.yaml"
    run.write_text("delta: 24\ntarget_side: 128\npatch_side: 8\ncrf_iterations: 2\nsinkhorn_max_iterations: 5000\n")
    return spec, run


@pytest.fixture
def rng_image():
    """
    Small random RGB guide image
    """

    return np.random.default_rng(5).integers(0, 256, (12, 12, 3), dtype=np.uint8)
