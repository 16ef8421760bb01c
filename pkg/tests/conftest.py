import math

import pytest

from camris.channel import RadioConfig, UpaGeometry
from camris.scene import (
    AlignedBox,
    BlockerSpec,
    CameraModel,
    Pose,
    ScenarioConfig,
    generate_scene,
    street_scenario,
)


@pytest.fixture
def street_config():
    return street_scenario(master_seed=123)


@pytest.fixture
def street_scene(street_config):
    return generate_scene(street_config, 0)


@pytest.fixture
def tiny_radio():
    # Small but with a tap window long enough for the test scenario's paths.
    return RadioConfig(n_subcarriers=48, n_taps=40, n_scatter=1)


@pytest.fixture
def small_geom():
    return UpaGeometry(4, 2)


def make_scenario(**overrides):
    """Minimal valid scenario for targeted geometry tests."""
    base = dict(
        ris=Pose([0.0, 0.0, 5.0], yaw=math.pi / 2),
        bs_position=[45.0, 25.0, 22.0],
        street_axis=[1.0, 0.0, 0.0],
        ue_count_range=(1, 3),
        ue_speed_range=(0.0, 10.0),
        ue_region=AlignedBox([-20.0, 8.0, 0.7], [20.0, 16.0, 1.7]),
        blockers=[BlockerSpec([24.0, 21.0, 7.0], [48.0, 8.0, 14.0])],
        cameras=[CameraModel([0.0, 0.0, 5.0], yaw=math.pi / 2)],
        master_seed=7,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def forward_facing_camera(fov=math.pi / 2, width=800, height=600):
    """Camera at the origin looking along +x with a square-friendly fov."""
    return CameraModel([0.0, 0.0, 0.0], yaw=0.0, pitch=0.0, horizontal_fov=fov,
                       image_width=width, image_height=height)
