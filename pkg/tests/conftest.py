import json

import pytest

from hspr.config import load_config

SMALL = {
    "frame": {"rows": 32, "cols": 32},
    "delay": {"n_steps": 400},
    "solver": {
        "max_cube_iterations": 2,
        "wavelengths": 4,
        "tolerance": 1e-12,
    },
    "render": {"slices": [0, 1], "rows": [16], "cols": [8]},
    "study": {"sigmas": [0.25, 0.5]},
}


@pytest.fixture
def small_overrides():
    return json.loads(json.dumps(SMALL))


@pytest.fixture
def small_config(small_overrides):
    return load_config(overrides=small_overrides)


@pytest.fixture
def small_config_file(tmp_path, small_overrides):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_overrides))
    return path
